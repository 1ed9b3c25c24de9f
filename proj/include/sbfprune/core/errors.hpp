/*
 * Copyright 2026 sbfprune Contributors
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
#ifndef SBFPRUNE_CORE_ERRORS_HPP
#define SBFPRUNE_CORE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sbf {

/// Invalid configuration: bad shapes, bad config values, unknown keys.
/// Mapped to process exit code 1 by the CLI.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A pipeline stage was invoked before its prerequisites exist.
/// Mapped to process exit code 2 by the CLI.
class PipelineError : public std::runtime_error {
public:
  explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

/// A property or equivalence check failed. Mapped to exit code 3.
class VerificationError : public std::runtime_error {
public:
  explicit VerificationError(const std::string& what) : std::runtime_error(what) {}
};

/// Degenerate numeric input (e.g. zero-norm denominator in a ratio).
class DegenerateInputError : public std::runtime_error {
public:
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sbf

#endif
