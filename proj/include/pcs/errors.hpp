// Copyright 2026 The PCS Authors
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

#ifndef PCS_ERRORS_HPP_
#define PCS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pcs {

// Invalid arguments are reported with std::invalid_argument. Everything
// else the library raises derives from pcs::Error so callers (the CLI in
// particular) can map it to a runtime failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error(what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NumericOverflow : public Error {
 public:
  NumericOverflow(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class DuplicateWrite : public Error {
 public:
  using Error::Error;
};

class SealedStore : public Error {
 public:
  using Error::Error;
};

class MissingCheckpoint : public Error {
 public:
  MissingCheckpoint(const std::string& what, int block, int candidate)
      : Error(what), block_(block), candidate_(candidate) {}

  int block() const noexcept { return block_; }
  int candidate() const noexcept { return candidate_; }

 private:
  int block_;
  int candidate_;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

}  // namespace pcs

#endif  // PCS_ERRORS_HPP_
