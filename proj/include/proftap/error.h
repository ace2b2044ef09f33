// Copyright 2026 The ProFTAP Authors.
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

#ifndef PROFTAP_ERROR_H_
#define PROFTAP_ERROR_H_

#include <stdexcept>
#include <string>

namespace proftap {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, out-of-range values, violated preconditions.
// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage could not complete (I/O failure, transport failure...).
// The CLI maps these to exit code 3.
class StageError : public Error {
 public:
  using Error::Error;
};

}  // namespace proftap

#endif  // PROFTAP_ERROR_H_
