// Copyright 2026 The AGN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AGN_TOOLS_CLI_H_
#define AGN_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace agn::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kDivergence = 4,
};

// Runs one command line (without the program name). Normal output goes to
// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace agn::cli

#endif  // AGN_TOOLS_CLI_H_
