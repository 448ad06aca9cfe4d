// Copyright 2026 The csran authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command implementations shared by the C API and (through it) the CLI.

#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "csran.h"

namespace csran {

struct CommandResult {
  csran_status status = CSRAN_OK;
  std::string report;  // printable output (may be set even on failure)
  std::string error;   // message for csran_last_error / stderr
};

CommandResult run_train(const RunConfig& cfg);
CommandResult run_eval(const RunConfig& cfg);
CommandResult run_gradcheck(const RunConfig& cfg);
CommandResult run_ablate(const RunConfig& cfg);
CommandResult run_depth_sweep(const RunConfig& cfg, const std::vector<int>& depths);

std::vector<int> parse_depth_list(const std::string& csv);
csran_status status_for_exception(const std::exception& e);

}  // namespace csran
