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

#include "pcs/ckptstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "pcs/errors.hpp"
#include "pcs/io.hpp"
#include "pcs/rng.hpp"

namespace pcs {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'S', '1'};

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetU32(std::string_view in, std::size_t& off) {
  if (off + 4 > in.size()) throw FormatError("truncated u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i]))
         << (8 * i);
  }
  off += 4;
  return v;
}

std::uint64_t GetU64(std::string_view in, std::size_t& off) {
  if (off + 8 > in.size()) throw FormatError("truncated u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i]))
         << (8 * i);
  }
  off += 8;
  return v;
}

}  // namespace

std::size_t TensorF32::numel() const noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string encode_tensor(const TensorF32& t) {
  if (t.numel() != t.data.size()) {
    throw std::invalid_argument("tensor shape does not match payload size");
  }
  std::string out;
  out.reserve(4 + 4 * t.shape.size() + 4 * t.data.size());
  PutU32(out, static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) PutU32(out, d);
  for (float f : t.data) PutU32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

TensorF32 decode_tensor(std::string_view bytes, std::size_t& offset) {
  TensorF32 t;
  const std::uint32_t rank = GetU32(bytes, offset);
  if (rank > 8) throw FormatError("implausible tensor rank");
  t.shape.resize(rank);
  for (auto& d : t.shape) d = GetU32(bytes, offset);
  const std::size_t n = t.numel();
  if (offset + 4 * n > bytes.size()) throw FormatError("truncated payload");
  t.data.resize(n);
  for (auto& f : t.data) f = std::bit_cast<float>(GetU32(bytes, offset));
  return t;
}

TensorF32 decode_tensor(std::string_view bytes) {
  std::size_t offset = 0;
  TensorF32 t = decode_tensor(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after tensor");
  return t;
}

bool bitwise_equal(const TensorF32& a, const TensorF32& b) noexcept {
  return a.shape == b.shape && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------

std::string_view to_string(SamplingVariant v) noexcept {
  switch (v) {
    case SamplingVariant::kFull: return "full";
    case SamplingVariant::kRandom: return "random";
    case SamplingVariant::kUniform: return "uniform";
    case SamplingVariant::kLaplace: return "laplace";
    case SamplingVariant::kPiecewiseLaplace: return "piecewise_laplace";
  }
  return "unknown";
}

SamplingVariant sampling_variant_from_string(std::string_view s) {
  for (auto v : {SamplingVariant::kFull, SamplingVariant::kRandom,
                 SamplingVariant::kUniform, SamplingVariant::kLaplace,
                 SamplingVariant::kPiecewiseLaplace}) {
    if (to_string(v) == s) return v;
  }
  throw std::invalid_argument("unknown sampling strategy: " + std::string(s));
}

namespace {

double DrawLaplace(Rng& rng, double b) {
  const double u = uniform_open01(rng) - 0.5;
  return -b * std::copysign(1.0, u) * std::log(1.0 - 2.0 * std::abs(u));
}

// Rejection-samples K distinct epochs around `centers`. A draw around center
// 0 is folded to |x|. If rejection stalls (K close to T with a narrow scale)
// the remaining slots take the unused epochs nearest to any center.
std::vector<int> SampleLaplace(const std::vector<int>& centers, double b,
                               int k, int t_train, Rng& rng) {
  std::vector<char> used(static_cast<std::size_t>(t_train) + 1, 0);
  std::vector<int> out;
  const long max_attempts = 10000L * k;
  long attempts = 0;
  std::size_t next_center = 0;
  while (static_cast<int>(out.size()) < k && attempts < max_attempts) {
    ++attempts;
    const int c = centers[next_center];
    double x = c + DrawLaplace(rng, b);
    if (c == 0) x = std::abs(x);
    const long e = std::max(1L, std::lround(x));
    if (e > t_train || used[e]) continue;
    used[e] = 1;
    out.push_back(static_cast<int>(e));
    next_center = (next_center + 1) % centers.size();
  }
  if (static_cast<int>(out.size()) < k) {
    std::vector<int> rest;
    for (int e = 1; e <= t_train; ++e) {
      if (!used[e]) rest.push_back(e);
    }
    const auto dist = [&](int e) {
      int best = t_train;
      for (int c : centers) best = std::min(best, std::abs(e - c));
      return best;
    };
    std::stable_sort(rest.begin(), rest.end(),
                     [&](int a, int b2) { return dist(a) < dist(b2); });
    for (int e : rest) {
      if (static_cast<int>(out.size()) == k) break;
      out.push_back(e);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<int> sample_epochs(const SamplingStrategy& strategy, int k,
                               int t_train, std::uint64_t seed) {
  if (t_train < 1) throw std::invalid_argument("sample_epochs: T_train < 1");
  if (k < 1) throw std::invalid_argument("sample_epochs: K < 1");
  if (k > t_train) throw std::invalid_argument("sample_epochs: K > T_train");
  Rng rng = make_rng(seed, "ckpt/sample-epochs");
  const double b = strategy.scale > 0.0 ? strategy.scale : t_train / 10.0;

  switch (strategy.variant) {
    case SamplingVariant::kFull: {
      if (k != t_train) {
        throw std::invalid_argument("sample_epochs: full sampling needs K = T");
      }
      std::vector<int> out(static_cast<std::size_t>(k));
      std::iota(out.begin(), out.end(), 1);
      return out;
    }
    case SamplingVariant::kUniform: {
      std::vector<int> out;
      int prev = 0;
      for (int j = 1; j <= k; ++j) {
        int e = static_cast<int>(
            std::lround(static_cast<double>(j) * t_train / k));
        if (e <= prev) e = prev + 1;
        out.push_back(e);
        prev = e;
      }
      return out;
    }
    case SamplingVariant::kRandom: {
      std::vector<int> pool(static_cast<std::size_t>(t_train));
      std::iota(pool.begin(), pool.end(), 1);
      for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, t_train - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      pool.resize(static_cast<std::size_t>(k));
      std::sort(pool.begin(), pool.end());
      return pool;
    }
    case SamplingVariant::kLaplace:
      if (!(b > 0.0)) throw std::invalid_argument("Laplace scale must be > 0");
      return SampleLaplace({0}, b, k, t_train, rng);
    case SamplingVariant::kPiecewiseLaplace: {
      if (!(b > 0.0)) throw std::invalid_argument("Laplace scale must be > 0");
      std::vector<int> centers = {0};
      for (int p : strategy.schedule_points) {
        if (p > 0 && p < t_train) centers.push_back(p);
      }
      std::sort(centers.begin(), centers.end());
      centers.erase(std::unique(centers.begin(), centers.end()), centers.end());
      return SampleLaplace(centers, b, k, t_train, rng);
    }
  }
  throw std::invalid_argument("sample_epochs: unknown strategy");
}

// ---------------------------------------------------------------------------

std::filesystem::path CheckpointStore::manifest_path(
    const std::filesystem::path& dir) {
  return dir / "manifest";
}

std::filesystem::path CheckpointStore::blob_path(int block,
                                                 int candidate) const {
  return dir_ / ("b" + std::to_string(block) + "_c" +
                 std::to_string(candidate) + ".w");
}

CheckpointStore CheckpointStore::create(std::filesystem::path dir,
                                        std::uint64_t arch_digest,
                                        int n_blocks, int t_train,
                                        std::vector<int> epochs) {
  if (n_blocks < 1) throw std::invalid_argument("store: n_blocks < 1");
  if (epochs.empty()) throw std::invalid_argument("store: no candidate epochs");
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i] < 1 || epochs[i] > t_train) {
      throw std::invalid_argument("store: candidate epoch out of range");
    }
    if (i > 0 && epochs[i] <= epochs[i - 1]) {
      throw std::invalid_argument("store: epochs must be sorted and distinct");
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create store directory: " + dir.string());
  if (std::filesystem::exists(manifest_path(dir))) {
    throw IoError("a sealed checkpoint store already exists in " +
                  dir.string());
  }
  CheckpointStore s;
  s.dir_ = std::move(dir);
  s.arch_digest_ = arch_digest;
  s.n_blocks_ = n_blocks;
  s.t_train_ = t_train;
  s.epochs_ = std::move(epochs);
  return s;
}

CheckpointStore CheckpointStore::open(std::filesystem::path dir,
                                      std::uint64_t arch_digest,
                                      int n_blocks) {
  const auto mpath = manifest_path(dir);
  if (!std::filesystem::exists(mpath)) {
    throw IoError("missing checkpoint manifest: " + mpath.string());
  }
  const std::string bytes = read_file(mpath);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad manifest magic in " + mpath.string());
  }
  std::size_t off = 4;
  const std::uint32_t version = GetU32(bytes, off);
  if (version != kVersion) {
    throw FormatError("unsupported manifest version " + std::to_string(version));
  }
  CheckpointStore s;
  s.dir_ = std::move(dir);
  s.arch_digest_ = GetU64(bytes, off);
  if (s.arch_digest_ != arch_digest) {
    throw FormatError("architecture digest mismatch in " + mpath.string());
  }
  s.n_blocks_ = n_blocks;
  s.t_train_ = static_cast<int>(GetU32(bytes, off));
  const std::uint32_t k = GetU32(bytes, off);
  for (std::uint32_t i = 0; i < k; ++i) {
    s.epochs_.push_back(static_cast<int>(GetU32(bytes, off)));
  }
  if (off != bytes.size()) throw FormatError("trailing bytes in manifest");
  s.sealed_ = true;
  return s;
}

void CheckpointStore::check_slot(int block, int candidate) const {
  if (block < 0 || block >= n_blocks_ || candidate < 0 || candidate >= k()) {
    throw IndexOutOfRange("checkpoint slot (" + std::to_string(block) + ", " +
                          std::to_string(candidate) + ") out of range");
  }
}

void CheckpointStore::put_block(int block, int candidate,
                                const TensorF32& weights) {
  if (sealed_) throw SealedStore("write to sealed checkpoint store");
  check_slot(block, candidate);
  const auto path = blob_path(block, candidate);
  if (written_.contains({block, candidate}) || std::filesystem::exists(path)) {
    throw DuplicateWrite("checkpoint slot (" + std::to_string(block) + ", " +
                         std::to_string(candidate) + ") already written");
  }
  write_file_atomic(path, encode_tensor(weights));
  written_.insert({block, candidate});
}

TensorF32 CheckpointStore::get_block(int block, int candidate) const {
  check_slot(block, candidate);
  const auto path = blob_path(block, candidate);
  if (!std::filesystem::exists(path)) {
    throw MissingCheckpoint("missing checkpoint for block " +
                                std::to_string(block) + ", candidate " +
                                std::to_string(candidate),
                            block, candidate);
  }
  return decode_tensor(read_file(path));
}

void CheckpointStore::seal() {
  if (sealed_) return;
  for (int b = 0; b < n_blocks_; ++b) {
    for (int c = 0; c < k(); ++c) {
      if (!written_.contains({b, c})) {
        throw MissingCheckpoint("cannot seal: slot (" + std::to_string(b) +
                                    ", " + std::to_string(c) + ") not written",
                                b, c);
      }
    }
  }
  std::string m(kMagic, 4);
  PutU32(m, kVersion);
  PutU64(m, arch_digest_);
  PutU32(m, static_cast<std::uint32_t>(t_train_));
  PutU32(m, static_cast<std::uint32_t>(epochs_.size()));
  for (int e : epochs_) PutU32(m, static_cast<std::uint32_t>(e));
  write_file_atomic(manifest_path(dir_), m);
  sealed_ = true;
}

std::optional<int> CheckpointStore::candidate_of_epoch(int epoch) const {
  auto it = std::lower_bound(epochs_.begin(), epochs_.end(), epoch);
  if (it == epochs_.end() || *it != epoch) return std::nullopt;
  return static_cast<int>(it - epochs_.begin());
}

}  // namespace pcs
