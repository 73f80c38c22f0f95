/*
 * cardioshape
 *
 * Copyright 2026 The cardioshape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace cardioshape::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  double limit_seconds = 0.0;
  std::string detail;
};

struct SuiteOptions {
  /// Criteria to run; empty runs all of them.
  std::vector<int> only;
  /// Scratch space for the end-to-end run.
  std::filesystem::path work_dir;
  /// Called after each criterion finishes.
  std::function<void(const CriterionResult&)> on_result;
};

/// Runs the acceptance criteria in id order. A criterion whose check throws
/// is reported as failed with the exception message.
std::vector<CriterionResult> run_acceptance(const SuiteOptions& options);

/// "PASS  C3  name  12.3 s / 300 s  detail"
std::string format_result(const CriterionResult& r);

}  // namespace cardioshape::acceptance
