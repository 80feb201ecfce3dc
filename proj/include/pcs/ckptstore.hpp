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

#ifndef PCS_CKPTSTORE_HPP_
#define PCS_CKPTSTORE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pcs {

// A shaped f32 tensor as persisted on disk.
struct TensorF32 {
  std::vector<std::uint32_t> shape;
  std::vector<float> data;

  std::size_t numel() const noexcept;

  friend bool operator==(const TensorF32&, const TensorF32&) = default;
};

// Blob layout, little-endian: rank u32, dims u32[rank], f32 payload.
std::string encode_tensor(const TensorF32& t);

// Decodes one tensor starting at `offset` and advances it. Throws
// FormatError on truncated or inconsistent input.
TensorF32 decode_tensor(std::string_view bytes, std::size_t& offset);
TensorF32 decode_tensor(std::string_view bytes);

bool bitwise_equal(const TensorF32& a, const TensorF32& b) noexcept;

// ---------------------------------------------------------------------------
// Epoch sampling

enum class SamplingVariant { kFull, kRandom, kUniform, kLaplace,
                             kPiecewiseLaplace };

std::string_view to_string(SamplingVariant v) noexcept;
SamplingVariant sampling_variant_from_string(std::string_view s);

struct SamplingStrategy {
  SamplingVariant variant = SamplingVariant::kRandom;
  // Laplace scale; values <= 0 mean "T_train / 10".
  double scale = 0.0;
  // LR-drop epochs used as extra centers by the piecewise variant.
  std::vector<int> schedule_points;
};

// K distinct epochs in [1, T_train], sorted ascending.
std::vector<int> sample_epochs(const SamplingStrategy& strategy, int k,
                               int t_train, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Store

// Per-run directory of per-(block, candidate) weight blobs plus a manifest.
//
// Lifecycle: create() -> put_block() for every slot -> seal(). The manifest
// is written (atomically) only by seal(), so an unsealed directory cannot be
// opened. After sealing the store is read-only and get_block() may be called
// from any number of threads.
class CheckpointStore {
 public:
  static constexpr std::uint32_t kVersion = 1;

  static CheckpointStore create(std::filesystem::path dir,
                                std::uint64_t arch_digest, int n_blocks,
                                int t_train, std::vector<int> epochs);

  // Opens a sealed store. Throws FormatError on a bad manifest or a digest
  // mismatch, IoError if the manifest is missing.
  static CheckpointStore open(std::filesystem::path dir,
                              std::uint64_t arch_digest, int n_blocks);

  void put_block(int block, int candidate, const TensorF32& weights);
  TensorF32 get_block(int block, int candidate) const;
  void seal();

  bool sealed() const noexcept { return sealed_; }
  int n_blocks() const noexcept { return n_blocks_; }
  int k() const noexcept { return static_cast<int>(epochs_.size()); }
  int t_train() const noexcept { return t_train_; }
  std::uint64_t arch_digest() const noexcept { return arch_digest_; }
  const std::vector<int>& epochs() const noexcept { return epochs_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::optional<int> candidate_of_epoch(int epoch) const;
  std::filesystem::path blob_path(int block, int candidate) const;
  static std::filesystem::path manifest_path(const std::filesystem::path& dir);

 private:
  CheckpointStore() = default;
  void check_slot(int block, int candidate) const;

  std::filesystem::path dir_;
  std::uint64_t arch_digest_ = 0;
  int n_blocks_ = 0;
  int t_train_ = 0;
  std::vector<int> epochs_;
  std::set<std::pair<int, int>> written_;
  bool sealed_ = false;
};

}  // namespace pcs

#endif  // PCS_CKPTSTORE_HPP_
