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

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace csran {

// Error taxonomy. Every failure surfaces as one of these so the C boundary
// can map it onto a stable status code.
struct Error : std::runtime_error {
  explicit Error(const std::string& m) : std::runtime_error(m) {}
};

struct DimensionError : Error { using Error::Error; };     // shape mismatch
struct ConfigError : Error { using Error::Error; };        // invalid configuration
struct DataError : Error { using Error::Error; };          // bad input data
struct FormatError : Error { using Error::Error; };        // malformed file
struct VocabError : Error { using Error::Error; };         // id outside vocabulary
struct ContractError : Error { using Error::Error; };      // API precondition broken
struct DegenerateSliceError : Error { using Error::Error; };  // fully masked slice
struct NumericError : Error { using Error::Error; };       // NaN/Inf during training

namespace detail {
template <class... A>
std::string cat(A&&... a) {
  std::ostringstream os;
  (os << ... << a);
  return os.str();
}
}  // namespace detail

}  // namespace csran
