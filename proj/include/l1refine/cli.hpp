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

// The l1refine command-line tool.
//
// Exit codes:
//   0  success (including --help)
//   1  unexpected internal failure
//   2  argument error: unknown or invalid flag, missing required flag,
//      missing input file, bad config file
//   3  data error: malformed, empty or mismatched input data, empty
//      mutual dictionary, all-OOV gold dictionary
//   4  numerical error: non-finite values during solving
//
// Every subcommand accepts --config <file.json>, an object whose keys are
// long flag names without the leading dashes. Flags given on the command
// line win over config values, which win over built-in defaults.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace l1refine {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitArgument = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

/// Runs the tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace l1refine
