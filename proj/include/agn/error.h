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

#ifndef AGN_ERROR_H_
#define AGN_ERROR_H_

#include <stdexcept>
#include <string>

namespace agn {

// Bad argument values or shapes handed to a library call.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mismatched dimensions between two objects that must agree (checkpoint vs
// config, mask vs spectrogram, ...).
class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Operation called on an object in the wrong state (e.g. a stale cache).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unsupported or malformed file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Non-finite loss or gradient during training.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace agn

#endif  // AGN_ERROR_H_
