/**
 * Copyright 2026 The resq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RESQ_ERRORS_HPP_
#define RESQ_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace resq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes do not line up (conv operands, elementwise pairs, index maps).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Quantization range collapsed to zero where a scale is required.
class DegenerateRangeError : public Error {
 public:
  using Error::Error;
};

/// Residual step requested before any keyframe populated the state.
class SequencingError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace resq

#endif  // RESQ_ERRORS_HPP_
