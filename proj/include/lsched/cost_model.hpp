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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsched/error.hpp"

namespace lsched {

inline constexpr int kNumFeatures = 5;

template <typename Scalar>
using FeatureVector = Eigen::Matrix<Scalar, kNumFeatures, 1>;

// One sequence as seen by the QoE model: prompt length and current total
// length (prompt plus generated tokens).
struct RequestShape {
  int64_t input_len = 1;
  int64_t seq_len = 1;
};

// Batch load features (1, n, sum I, sum I^2, sum L). Sums are kept as exact
// 64-bit integers; a 131072-token prompt squared already exceeds 32 bits.
struct BatchFeatures {
  int64_t count = 0;
  int64_t input_sum = 0;
  int64_t input_sq_sum = 0;
  int64_t seq_sum = 0;

  void add(const RequestShape& shape) {
    ++count;
    input_sum += shape.input_len;
    input_sq_sum += shape.input_len * shape.input_len;
    seq_sum += shape.seq_len;
  }

  // f0 is not summed: it stays 1 for any union of batches.
  BatchFeatures& operator+=(const BatchFeatures& other) {
    count += other.count;
    input_sum += other.input_sum;
    input_sq_sum += other.input_sq_sum;
    seq_sum += other.seq_sum;
    return *this;
  }

  template <typename Scalar = double>
  FeatureVector<Scalar> vector() const {
    FeatureVector<Scalar> f;
    f << Scalar(1), static_cast<Scalar>(count), static_cast<Scalar>(input_sum),
        static_cast<Scalar>(input_sq_sum), static_cast<Scalar>(seq_sum);
    return f;
  }

  friend bool operator==(const BatchFeatures&, const BatchFeatures&) = default;
};

struct QoeParams {
  FeatureVector<double> d = FeatureVector<double>::Zero();

  bool finite() const { return d.allFinite(); }
};

// A profiled request: lifetime-averaged batch features and its normalized
// latency (end-to-end latency over output tokens).
struct ProfilingSample {
  FeatureVector<double> features = FeatureVector<double>::Zero();
  double normalized_latency = 0.0;
};

struct PredictionErrors {
  std::vector<double> relative;  // (predicted - actual) / actual
  double mean_abs = 0.0;
};

BatchFeatures batch_features(std::span<const RequestShape> shapes);

// Per-request QoE of a batch: sum_k D_k F_k. Every member of a batch sees the
// same value.
template <typename Scalar>
Scalar request_qoe(const FeatureVector<Scalar>& features,
                   const QoeParams& params) {
  return params.d.template cast<Scalar>().dot(features);
}

inline double request_qoe(const BatchFeatures& features,
                          const QoeParams& params) {
  return request_qoe<double>(features.vector<double>(), params);
}

// Aggregate QoE n * request_qoe; zero for the empty batch.
inline double batch_qoe(const BatchFeatures& features,
                        const QoeParams& params) {
  return static_cast<double>(features.count) *
         request_qoe(features, params);
}

double batch_qoe(std::span<const RequestShape> shapes, const QoeParams& params);

// Ordinary least squares on column-scaled data. Normal equations are used
// while their condition estimate stays below `max_condition`; otherwise a
// column-pivoting QR solves the scaled system. Throws kRankDeficient when a
// column is zero or the QR rank is short.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> least_squares(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& design,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& target,
    Scalar max_condition = Scalar(1e8)) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index cols = design.cols();
  if (design.rows() < cols) {
    throw Error(ErrorKind::kTooFewSamples,
                "least squares needs at least " + std::to_string(cols) +
                    " rows, got " + std::to_string(design.rows()));
  }
  Vector scale = design.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (!(scale(j) > Scalar(0))) {
      throw Error(ErrorKind::kRankDeficient,
                  "feature column " + std::to_string(j) + " is identically zero");
    }
  }
  const Matrix scaled = design * scale.cwiseInverse().asDiagonal();

  const Matrix gram = scaled.transpose() * scaled;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  Vector beta;
  if (lo > Scalar(0) && hi / lo < max_condition) {
    beta = gram.llt().solve(scaled.transpose() * target);
  } else {
    Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
    qr.setThreshold(Scalar(1e-10));
    if (qr.rank() < cols) {
      throw Error(ErrorKind::kRankDeficient,
                  "feature matrix has rank " + std::to_string(qr.rank()) +
                      " < " + std::to_string(cols));
    }
    beta = qr.solve(target);
  }
  return beta.cwiseQuotient(scale);
}

// Fits D_0..D_4 by least squares of normalized latency on the five features.
QoeParams fit_params(std::span<const ProfilingSample> samples);

PredictionErrors prediction_error(const QoeParams& params,
                                  std::span<const ProfilingSample> validation);

// Mean absolute relative error of always predicting `constant`.
double constant_predictor_error(double constant,
                                std::span<const ProfilingSample> validation);

// Auxiliary per-event models used to calibrate a step simulator from
// measurements: prefill time against (1, I, I^2) and one decode iteration
// against (1, n, sum L).
struct PrefillTiming {
  int64_t input_len = 1;
  double seconds = 0.0;
};

struct DecodeTiming {
  int64_t batch_size = 0;
  int64_t seq_sum = 0;
  double seconds = 0.0;
};

Eigen::Vector3d fit_prefill_model(std::span<const PrefillTiming> samples);
Eigen::Vector3d fit_decode_model(std::span<const DecodeTiming> samples);

// CSV with header `q,f1,f2,f3,f4`; f0 is implicit.
std::vector<ProfilingSample> read_samples_csv(const std::string& path);
void write_samples_csv(const std::string& path,
                       std::span<const ProfilingSample> samples);

// JSON `{"d":[d0,d1,d2,d3,d4]}`.
QoeParams read_params_json(const std::string& path);
void write_params_json(const std::string& path, const QoeParams& params);
std::string params_to_json(const QoeParams& params);
QoeParams params_from_json(const std::string& text);

}  // namespace lsched
