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

// File formats shared by the command-line tools.
//
//  * report JSON: {stop_reason, steps_taken, final_ortho_error, wall_time_s,
//    loss_trace: [[t, loss], ...]}
//  * BLI JSON: {metric, value, evaluated, skipped_oov}
//  * distance CSV: header "pair_id,original,refined,delta"
//  * map file: first line "d", then d rows of d values
//  * synthetic sidecar JSON: {seed, n, d, sigma, outlier_frac,
//    outlier_scale, outlier_indices}
//  * token pairs: one "<src> <tgt>" per line
//
// Reals are written in the shortest form that reads back to the same
// double, so output bytes depend only on the values.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "l1refine/embed_io.hpp"
#include "l1refine/eval.hpp"
#include "l1refine/opa.hpp"
#include "l1refine/synth.hpp"

namespace l1refine {

std::string format_real(double v);

// wall_time_s is written as null when include_wall_time is false.
nlohmann::ordered_json report_to_json(const RefinementReport& report,
                                      bool include_wall_time = true);

nlohmann::ordered_json bli_to_json(const BliResult& result);

std::string distance_csv(const DistanceDeltaTable& table);

nlohmann::ordered_json sidecar_json(const SyntheticProblem& problem);

void save_map(const Matrix& m, const std::filesystem::path& path);

/// Throws FormatError (naming the line) on a malformed file.
Matrix load_map(const std::filesystem::path& path);

void save_token_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::filesystem::path& path);

/// Writes `text` to `path`; throws IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

void write_json(const std::filesystem::path& path,
                const nlohmann::ordered_json& value);

}  // namespace l1refine
