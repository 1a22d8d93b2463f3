// Copyright (c) the BRM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRM_ERRORS_H_
#define BRM_ERRORS_H_

#include <stdexcept>
#include <string>

namespace brm {

// Precondition on a numeric argument violated (non-positive rate, negative
// MSE, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A probe outside a curve's admissible beta range.
class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Image or latent geometry that does not fit the operation.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file: Netpbm header, curve table, CSV, config syntax.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")"
                                    : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Structurally valid configuration that breaks an invariant, or an empty
// model family handed to a selector.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace brm

#endif  // BRM_ERRORS_H_
