// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace ddcp {

// Invalid argument errors are reported as std::invalid_argument, range errors as std::out_of_range.

/// Malformed or inconsistent scenario / experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Factorization failures, non-finite activations, diverging training.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Phase of a zero-magnitude gain is undefined.
class UndefinedPhaseError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An upstream pipeline artifact (trace, dataset, checkpoint) does not exist.
class MissingArtifactError : public IoError {
public:
    MissingArtifactError(const std::string &artifact, const std::string &path)
        : IoError("missing artifact '" + artifact + "': " + path), artifact_(artifact), path_(path) {}
    const std::string &artifact() const { return artifact_; }
    const std::string &path() const { return path_; }

private:
    std::string artifact_;
    std::string path_;
};

} // namespace ddcp
