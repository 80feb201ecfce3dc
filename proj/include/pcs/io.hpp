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

#ifndef PCS_IO_HPP_
#define PCS_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

namespace pcs {

// Writes to `<path>.tmp` and renames over `path`, so readers never observe
// a partially written file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

// Throws IoError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

}  // namespace pcs

#endif  // PCS_IO_HPP_
