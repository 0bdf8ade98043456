// ngsgd-oracle/verify.h

// Copyright 2026 The ngsgd Authors
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

#ifndef NGSGD_ORACLE_VERIFY_H_
#define NGSGD_ORACLE_VERIFY_H_

// The oracle equivalence battery behind `ngsgd verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace ngsgd::oracle {

struct VerifyOptions {
  bool inject_fault = false;  // flips the sign of b_i's correction
};

struct SuiteResult {
  std::string suite;
  std::uint64_t seed = 0;
  bool passed = false;
  double max_error = 0;
  double tolerance = 0;
  std::string detail;
};

/// "simple", "branch", "online", "gradcheck".
const std::vector<std::string> &SuiteNames();

/// Throws Error for an unknown suite name.
SuiteResult RunSuite(const std::string &suite, std::uint64_t seed,
                     const VerifyOptions &opts = {});

}  // namespace ngsgd::oracle

#endif  // NGSGD_ORACLE_VERIFY_H_
