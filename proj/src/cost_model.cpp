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

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "lsched/csv.hpp"

namespace lsched {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTooFewSamples: return "TooFewSamples";
    case ErrorKind::kRankDeficient: return "RankDeficient";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kEmptyTrace: return "EmptyTrace";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kInfeasiblePlan: return "InfeasiblePlan";
    case ErrorKind::kEmptyList: return "EmptyList";
    case ErrorKind::kNoCoveringStage: return "NoCoveringStage";
    case ErrorKind::kIncompleteRequest: return "IncompleteRequest";
    case ErrorKind::kConfigError: return "ConfigError";
    case ErrorKind::kProtocol: return "ProtocolError";
  }
  return "Unknown";
}

BatchFeatures batch_features(std::span<const RequestShape> shapes) {
  BatchFeatures f;
  for (const auto& s : shapes) f.add(s);
  return f;
}

double batch_qoe(std::span<const RequestShape> shapes,
                 const QoeParams& params) {
  return batch_qoe(batch_features(shapes), params);
}

QoeParams fit_params(std::span<const ProfilingSample> samples) {
  if (samples.size() < static_cast<size_t>(kNumFeatures)) {
    throw Error(ErrorKind::kTooFewSamples,
                "fit needs at least 5 samples, got " +
                    std::to_string(samples.size()));
  }
  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(rows, kNumFeatures);
  Eigen::VectorXd target(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    design.row(i) = samples[i].features.transpose();
    target(i) = samples[i].normalized_latency;
  }
  QoeParams params;
  params.d = least_squares<double>(design, target);
  return params;
}

PredictionErrors prediction_error(const QoeParams& params,
                                  std::span<const ProfilingSample> validation) {
  PredictionErrors out;
  out.relative.reserve(validation.size());
  double total = 0.0;
  for (const auto& s : validation) {
    const double predicted = request_qoe<double>(s.features, params);
    const double err = (predicted - s.normalized_latency) / s.normalized_latency;
    out.relative.push_back(err);
    total += std::abs(err);
  }
  if (!validation.empty()) out.mean_abs = total / validation.size();
  return out;
}

double constant_predictor_error(double constant,
                                std::span<const ProfilingSample> validation) {
  if (validation.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : validation) {
    total += std::abs((constant - s.normalized_latency) / s.normalized_latency);
  }
  return total / validation.size();
}

Eigen::Vector3d fit_prefill_model(std::span<const PrefillTiming> samples) {
  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(rows, 3);
  Eigen::VectorXd target(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double len = static_cast<double>(samples[i].input_len);
    design.row(i) << 1.0, len, len * len;
    target(i) = samples[i].seconds;
  }
  return least_squares<double>(design, target);
}

Eigen::Vector3d fit_decode_model(std::span<const DecodeTiming> samples) {
  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(rows, 3);
  Eigen::VectorXd target(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    design.row(i) << 1.0, static_cast<double>(samples[i].batch_size),
        static_cast<double>(samples[i].seq_sum);
    target(i) = samples[i].seconds;
  }
  return least_squares<double>(design, target);
}

std::vector<ProfilingSample> read_samples_csv(const std::string& path) {
  CsvReader reader(path);
  reader.expect_header({"q", "f1", "f2", "f3", "f4"});
  std::vector<ProfilingSample> out;
  std::vector<std::string> row;
  while (reader.next(row)) {
    ProfilingSample s;
    s.normalized_latency = reader.parse_double(row[0], "q");
    s.features(0) = 1.0;
    for (int k = 1; k < kNumFeatures; ++k) {
      s.features(k) = reader.parse_double(row[k], "f" + std::to_string(k));
    }
    if (!(s.normalized_latency > 0.0)) {
      reader.fail("q must be positive");
    }
    out.push_back(s);
  }
  return out;
}

void write_samples_csv(const std::string& path,
                       std::span<const ProfilingSample> samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << "q,f1,f2,f3,f4\n" << std::setprecision(17);
  for (const auto& s : samples) {
    out << s.normalized_latency;
    for (int k = 1; k < kNumFeatures; ++k) out << ',' << s.features(k);
    out << '\n';
  }
}

std::string params_to_json(const QoeParams& params) {
  nlohmann::json j;
  j["d"] = std::vector<double>(params.d.data(), params.d.data() + kNumFeatures);
  return j.dump();
}

QoeParams params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParseError, std::string("params json: ") + e.what());
  }
  if (!j.contains("d") || !j["d"].is_array() || j["d"].size() != kNumFeatures) {
    throw Error(ErrorKind::kParseError, "params json needs \"d\" with 5 numbers");
  }
  QoeParams params;
  for (int k = 0; k < kNumFeatures; ++k) {
    if (!j["d"][k].is_number()) {
      throw Error(ErrorKind::kParseError, "params json: d entries must be numbers");
    }
    params.d(k) = j["d"][k].get<double>();
  }
  if (!params.finite()) {
    throw Error(ErrorKind::kParseError, "params json: non-finite coefficient");
  }
  return params;
}

QoeParams read_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return params_from_json(buffer.str());
}

void write_params_json(const std::string& path, const QoeParams& params) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << params_to_json(params) << '\n';
}

}  // namespace lsched
