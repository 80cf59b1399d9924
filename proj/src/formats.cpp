//  Copyright 2026 The l1refine Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#include "l1refine/formats.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "l1refine/error.hpp"

namespace l1refine {
namespace {

std::string shape_message(const std::filesystem::path& path, std::size_t line,
                          const std::string& what) {
  return path.string() + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::ordered_json report_to_json(const RefinementReport& report,
                                      bool include_wall_time) {
  nlohmann::ordered_json j;
  j["stop_reason"] = std::string(to_string(report.stop_reason));
  j["steps_taken"] = report.steps_taken;
  j["final_ortho_error"] = report.final_ortho_error;
  j["wall_time_s"] = include_wall_time ? nlohmann::ordered_json(report.wall_time_s)
                                       : nlohmann::ordered_json(nullptr);
  auto trace = nlohmann::ordered_json::array();
  for (const auto& [t, loss] : report.loss_trace) {
    trace.push_back(nlohmann::ordered_json::array({t, loss}));
  }
  j["loss_trace"] = std::move(trace);
  return j;
}

nlohmann::ordered_json bli_to_json(const BliResult& result) {
  nlohmann::ordered_json j;
  j["metric"] = std::string(to_string(result.metric));
  j["value"] = result.value;
  j["evaluated"] = result.evaluated;
  j["skipped_oov"] = result.skipped_oov;
  return j;
}

std::string distance_csv(const DistanceDeltaTable& table) {
  std::string out = "pair_id,original,refined,delta\n";
  for (const DistanceDeltaRow& r : table.rows) {
    out += std::to_string(r.pair_id);
    out += ',';
    out += format_real(r.original);
    out += ',';
    out += format_real(r.refined);
    out += ',';
    out += format_real(r.delta);
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json sidecar_json(const SyntheticProblem& problem) {
  const SyntheticParams& p = problem.params;
  nlohmann::ordered_json j;
  j["seed"] = p.seed;
  j["n"] = p.n;
  j["d"] = p.d;
  j["sigma"] = p.sigma;
  j["outlier_frac"] = p.outlier_frac;
  j["outlier_scale"] = p.outlier_scale;
  j["outlier_indices"] = problem.outlier_indices();
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const std::filesystem::path& path,
                const nlohmann::ordered_json& value) {
  write_text(path, value.dump(2) + "\n");
}

void save_map(const Matrix& m, const std::filesystem::path& path) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatchError("a map file holds a non-empty square matrix");
  }
  std::string out = std::to_string(m.rows()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ' ';
      out += format_real(m(i, j));
    }
    out += '\n';
  }
  write_text(path, out);
}

Matrix load_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open map file " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(shape_message(path, 1, "missing dimension line"));
  }
  long long d = 0;
  {
    std::istringstream head(line);
    std::string extra;
    if (!(head >> d) || d <= 0 || (head >> extra)) {
      throw FormatError(shape_message(path, 1, "expected a positive dimension"));
    }
  }
  Matrix m(d, d);
  for (long long i = 0; i < d; ++i) {
    const std::size_t line_no = static_cast<std::size_t>(i) + 2;
    if (!std::getline(in, line)) {
      throw FormatError(shape_message(path, line_no, "missing map row"));
    }
    std::istringstream row(line);
    std::string tok;
    long long j = 0;
    while (row >> tok) {
      if (j >= d) {
        throw FormatError(shape_message(path, line_no, "too many values"));
      }
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() ||
          !std::isfinite(v)) {
        throw FormatError(shape_message(path, line_no, "bad value '" + tok + "'"));
      }
      m(i, j++) = v;
    }
    if (j != d) {
      throw FormatError(shape_message(path, line_no,
                                      "expected " + std::to_string(d) +
                                          " values, got " + std::to_string(j)));
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw FormatError(path.string() + ": trailing data after " +
                        std::to_string(d) + " map rows");
    }
  }
  return m;
}

void save_token_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::filesystem::path& path) {
  std::string out;
  for (const auto& [s, t] : pairs) out += s + ' ' + t + '\n';
  write_text(path, out);
}

}  // namespace l1refine
