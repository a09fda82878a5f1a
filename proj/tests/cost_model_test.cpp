/* Copyright 2026 The lsched Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lsched/cost_model.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

#include "lsched/error.hpp"
#include "lsched/workload.hpp"

namespace lsched {
namespace {

QoeParams known_params() {
  QoeParams p;
  p.d << 4e-3, 3e-5, 2e-8, 1e-12, 6e-9;
  return p;
}

// Feature vectors shaped like lifetime averages of real batches.
std::vector<ProfilingSample> synthetic_samples(Rng& rng, int count,
                                               const QoeParams& truth,
                                               double noise) {
  std::vector<ProfilingSample> out;
  for (int i = 0; i < count; ++i) {
    const double n = 1.0 + rng.below(64);
    const double mean_in = 64.0 + rng.uniform() * 16000.0;
    const double spread = 0.5 + rng.uniform();
    FeatureVector<double> f;
    f << 1.0, n, n * mean_in, n * mean_in * mean_in * spread,
        n * (mean_in + rng.uniform() * 4000.0);
    ProfilingSample s;
    s.features = f;
    s.normalized_latency = request_qoe<double>(f, truth) * (1.0 + noise * rng.normal());
    if (s.normalized_latency <= 0.0) s.normalized_latency = 1e-6;
    out.push_back(s);
  }
  return out;
}

TEST(BatchFeatures, SumsPerRequestTerms) {
  const std::vector<RequestShape> shapes{{3, 5}, {4, 10}};
  const BatchFeatures f = batch_features(shapes);
  EXPECT_EQ(f.count, 2);
  EXPECT_EQ(f.input_sum, 7);
  EXPECT_EQ(f.input_sq_sum, 25);
  EXPECT_EQ(f.seq_sum, 15);
  const auto v = f.vector<double>();
  EXPECT_EQ(v(0), 1.0);
}

TEST(BatchFeatures, EmptyBatchKeepsConstantTerm) {
  const BatchFeatures f = batch_features({});
  EXPECT_EQ(f.vector<double>()(0), 1.0);
  EXPECT_EQ(f.count, 0);
  EXPECT_EQ(batch_qoe(f, known_params()), 0.0);
}

TEST(BatchFeatures, UnionIsElementwiseSumAndSatisfiesCauchySchwarz) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<RequestShape> a, b;
    for (uint64_t i = 0, n = rng.below(10); i < n; ++i) {
      const int64_t in = 1 + static_cast<int64_t>(rng.below(5000));
      a.push_back({in, in + static_cast<int64_t>(rng.below(3000))});
    }
    for (uint64_t i = 0, n = rng.below(10); i < n; ++i) {
      const int64_t in = 1 + static_cast<int64_t>(rng.below(5000));
      b.push_back({in, in + static_cast<int64_t>(rng.below(3000))});
    }
    std::vector<RequestShape> both = a;
    both.insert(both.end(), b.begin(), b.end());
    BatchFeatures sum = batch_features(a);
    sum += batch_features(b);
    EXPECT_EQ(sum, batch_features(both));
    const BatchFeatures f = batch_features(both);
    if (f.count > 0) {
      EXPECT_GE(static_cast<double>(f.input_sq_sum) * f.count,
                static_cast<double>(f.input_sum) * f.input_sum);
    }
  }
}

TEST(Qoe, BatchIsCountTimesRequest) {
  const std::vector<RequestShape> shapes{{100, 150}, {200, 260}, {50, 51}};
  const BatchFeatures f = batch_features(shapes);
  const QoeParams p = known_params();
  const double per = p.d(0) + p.d(1) * 3 + p.d(2) * 350 + p.d(3) * (1e4 + 4e4 + 2500) +
                     p.d(4) * 461;
  EXPECT_NEAR(request_qoe(f, p), per, 1e-15);
  EXPECT_NEAR(batch_qoe(shapes, p), 3 * per, 1e-15);
}

TEST(Fit, RecoversNoiselessCoefficients) {
  Rng rng(17);
  const QoeParams truth = known_params();
  const auto samples = synthetic_samples(rng, 400, truth, 0.0);
  const QoeParams fitted = fit_params(samples);
  for (int k = 0; k < kNumFeatures; ++k) {
    EXPECT_LT(std::abs(fitted.d(k) - truth.d(k)) / std::abs(truth.d(k)), 1e-6) << "D" << k;
  }
}

TEST(Fit, NoisyValidationBeatsConstantPredictor) {
  Rng rng(23);
  const QoeParams truth = known_params();
  const auto train = synthetic_samples(rng, 600, truth, 0.08);
  const auto valid = synthetic_samples(rng, 200, truth, 0.08);
  const QoeParams fitted = fit_params(train);
  double mean = 0.0;
  for (const auto& s : train) mean += s.normalized_latency;
  mean /= static_cast<double>(train.size());
  const double model = prediction_error(fitted, valid).mean_abs;
  const double constant = constant_predictor_error(mean, valid);
  EXPECT_LT(model, constant);
  EXPECT_LT(model, 0.15);
}

TEST(Fit, RejectsTooFewSamples) {
  Rng rng(1);
  const auto samples = synthetic_samples(rng, 4, known_params(), 0.0);
  try {
    fit_params(samples);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTooFewSamples);
  }
}

TEST(Fit, RejectsCollinearFeatures) {
  std::vector<ProfilingSample> samples;
  for (int i = 1; i <= 20; ++i) {
    ProfilingSample s;
    // f4 duplicates f2, so the design has rank 4.
    s.features << 1.0, i, 10.0 * i * i, 3.0 * i, 10.0 * i * i;
    s.normalized_latency = 0.01 * i;
    samples.push_back(s);
  }
  try {
    fit_params(samples);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRankDeficient);
  }
}

TEST(Fit, RejectsAllZeroColumn) {
  std::vector<ProfilingSample> samples;
  for (int i = 1; i <= 10; ++i) {
    ProfilingSample s;
    s.features << 1.0, i, 0.0, i * i, i * 3.0;
    s.normalized_latency = 0.01 * i;
    samples.push_back(s);
  }
  EXPECT_THROW(fit_params(samples), Error);
}

TEST(PredictionError, SignedRelativeErrors) {
  QoeParams p;
  p.d << 2.0, 0, 0, 0, 0;
  std::vector<ProfilingSample> v(2);
  v[0].features << 1, 0, 0, 0, 0;
  v[0].normalized_latency = 1.0;
  v[1].features << 1, 0, 0, 0, 0;
  v[1].normalized_latency = 4.0;
  const auto e = prediction_error(p, v);
  EXPECT_DOUBLE_EQ(e.relative[0], 1.0);
  EXPECT_DOUBLE_EQ(e.relative[1], -0.5);
  EXPECT_DOUBLE_EQ(e.mean_abs, 0.75);
  EXPECT_DOUBLE_EQ(constant_predictor_error(2.0, v), 0.75);
}

TEST(HardwareFits, RecoverPrefillAndDecodeCoefficients) {
  std::vector<PrefillTiming> prefill;
  for (int64_t len : {16, 100, 1000, 5000, 20000, 60000}) {
    const double l = static_cast<double>(len);
    prefill.push_back({len, 1e-3 + 5e-7 * l + 1e-11 * l * l});
  }
  const Eigen::Vector3d a = fit_prefill_model(prefill);
  EXPECT_NEAR(a(0), 1e-3, 1e-12);
  EXPECT_NEAR(a(1), 5e-7, 1e-15);
  EXPECT_NEAR(a(2), 1e-11, 1e-18);

  std::vector<DecodeTiming> decode;
  for (int64_t n : {1, 4, 16, 64}) {
    for (int64_t sum : {1000, 50000, 400000}) {
      decode.push_back({n, sum * n, 6e-3 + 2e-5 * n + 1e-7 * sum * n});
    }
  }
  const Eigen::Vector3d b = fit_decode_model(decode);
  EXPECT_NEAR(b(0), 6e-3, 1e-12);
  EXPECT_NEAR(b(1), 2e-5, 1e-13);
  EXPECT_NEAR(b(2), 1e-7, 1e-16);
}

TEST(ParamsIo, JsonRoundTripIsExact) {
  QoeParams p = known_params();
  p.d(3) = -1.2345678901234567e-13;
  const QoeParams back = params_from_json(params_to_json(p));
  for (int k = 0; k < kNumFeatures; ++k) EXPECT_EQ(back.d(k), p.d(k));
}

TEST(ParamsIo, RejectsMalformedJson) {
  EXPECT_THROW(params_from_json("{\"d\": [1, 2]}"), Error);
  EXPECT_THROW(params_from_json("not json"), Error);
}

TEST(SamplesIo, CsvRoundTrip) {
  Rng rng(8);
  const auto samples = synthetic_samples(rng, 20, known_params(), 0.0);
  const std::string path =
      (std::filesystem::temp_directory_path() / "lsched_samples_test.csv").string();
  write_samples_csv(path, samples);
  const auto back = read_samples_csv(path);
  ASSERT_EQ(back.size(), samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(back[i].normalized_latency, samples[i].normalized_latency);
    for (int k = 0; k < kNumFeatures; ++k) {
      EXPECT_EQ(back[i].features(k), samples[i].features(k));
    }
  }
  std::remove(path.c_str());
}

TEST(SamplesIo, MissingFileIsIoError) {
  try {
    read_samples_csv("/nonexistent/lsched/samples.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace lsched
