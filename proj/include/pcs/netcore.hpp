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

#ifndef PCS_NETCORE_HPP_
#define PCS_NETCORE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pcs/ckptstore.hpp"
#include "pcs/data.hpp"
#include "pcs/kernels.hpp"
#include "pcs/matrix.hpp"

namespace pcs {

// Blockwise MLP: blocks 0..M-2 are affine + ReLU, block M-1 is the affine
// output layer.
struct Architecture {
  int n_features = 0;
  int n_classes = 0;
  std::vector<int> block_widths;  // M - 1 hidden widths

  int n_blocks() const noexcept {
    return static_cast<int>(block_widths.size()) + 1;
  }
  int block_in(int block) const;
  int block_out(int block) const;

  // Throws std::invalid_argument unless M >= 2 and all widths >= 1.
  void validate() const;

  // FNV-1a over the little-endian u32 encoding of (features, classes,
  // widths...). Stored in checkpoint manifests.
  std::uint64_t digest() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Block {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out

  std::size_t n_params() const noexcept { return weight.size() + bias.size(); }
  friend bool operator==(const Block&, const Block&) = default;
};

struct BlockwiseModel {
  Architecture arch;
  std::vector<Block> blocks;

  std::size_t n_params() const noexcept;
  friend bool operator==(const BlockwiseModel&, const BlockwiseModel&) = default;
};

// Glorot-uniform weights, zero biases.
BlockwiseModel init_model(const Architecture& arch, std::uint64_t seed);

// Block <-> checkpoint blob. The blob is the f32 matrix [W | b] of shape
// out x (in + 1).
TensorF32 block_to_tensor(const Block& block);
Block tensor_to_block(const TensorF32& t, int in, int out);

// Rounds every parameter through f32, i.e. the exact values a checkpoint
// holds.
BlockwiseModel quantize_f32(const BlockwiseModel& m);

struct ForwardResult {
  Matrix logits;
  Matrix probs;
};

ForwardResult forward(const BlockwiseModel& m, const Matrix& x,
                      const kernels::KernelTable& k = kernels::active());

// ---------------------------------------------------------------------------
// Losses

enum class LossKind { kCrossEntropy, kBrier, kLabelSmoothing, kFocal, kFlsd53 };

std::string_view to_string(LossKind kind) noexcept;
LossKind loss_kind_from_string(std::string_view s);

struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  double smoothing = 0.05;   // label smoothing alpha
  double focal_gamma = 3.0;  // fixed-gamma focal loss
};

// Focal exponent used by FLSD-53 for a given true-class probability.
inline double flsd53_gamma(double p_true) noexcept {
  return p_true < 0.2 ? 5.0 : 3.0;
}

// Batch-mean loss computed from normalized probabilities.
double train_loss(const Matrix& probs, std::span<const int> labels,
                  const LossSpec& spec);

// Batch-mean loss and its gradient with respect to the logits, computed
// through log-softmax for stability.
std::pair<double, Matrix> loss_and_logit_grad(const Matrix& logits,
                                              std::span<const int> labels,
                                              const LossSpec& spec);

struct Gradients {
  std::vector<Block> blocks;
};

// Batch-mean loss and the gradient of every parameter (manual backprop).
std::pair<double, Gradients> loss_and_gradients(
    const BlockwiseModel& m, const Matrix& x, std::span<const int> labels,
    const LossSpec& spec, const kernels::KernelTable& k = kernels::active());

// ---------------------------------------------------------------------------
// Training

struct LrPiece {
  int start_epoch = 0;  // zero-based epoch index
  double lr = 0.1;
};

struct TrainConfig {
  int epochs = 60;
  std::vector<LrPiece> lr_schedule = {{0, 0.1}};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;
  LossSpec loss;
  std::uint64_t seed = 1;

  void validate() const;
  // Learning rate for the zero-based epoch index.
  double lr_at(int epoch_index) const;
};

struct EpochRecord {
  int epoch = 0;  // one-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_error = 0.0;
  double val_ece = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> records;
  std::vector<int> checkpoint_epochs;

  std::string to_csv() const;
  static TrainLog from_csv(std::string_view csv);

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

// Receives the model after each training epoch.
class CheckpointSink {
 public:
  virtual ~CheckpointSink() = default;
  virtual bool wants(int epoch) const = 0;
  virtual void put(int epoch, const BlockwiseModel& m) = 0;
};

// Writes every block of the wanted epochs into a checkpoint store.
class StoreSink : public CheckpointSink {
 public:
  explicit StoreSink(CheckpointStore& store) : store_(store) {}
  bool wants(int epoch) const override;
  void put(int epoch, const BlockwiseModel& m) override;

 private:
  CheckpointStore& store_;
};

// Keeps the f32-rounded model of every epoch in memory.
class RetainAllSink : public CheckpointSink {
 public:
  bool wants(int) const override { return true; }
  void put(int epoch, const BlockwiseModel& m) override;

  // One-based epoch.
  const BlockwiseModel& at(int epoch) const;
  int size() const noexcept { return static_cast<int>(models_.size()); }

 private:
  std::vector<BlockwiseModel> models_;
};

// One pass of momentum SGD over `data` in a seeded order. Momentum buffers
// are per-call.
struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;
  LossSpec loss;
};

// Returns the mean training loss of the epoch. Throws NumericOverflow
// (tagged with `epoch`) if a batch loss is not finite.
double sgd_epoch(BlockwiseModel& m, std::vector<Block>& velocity,
                 const Dataset& data, const SgdOptions& opts,
                 std::uint64_t order_seed, int epoch);

TrainLog train_epochs(BlockwiseModel& m, const Dataset& train,
                      const Dataset& val, const TrainConfig& cfg,
                      CheckpointSink* sink);

// Model with block i taken from candidate `candidates[i]` of the store.
BlockwiseModel assemble(const CheckpointStore& store, const Architecture& arch,
                        std::span<const int> candidates);

struct FineTuneOptions {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;
};

// Exactly one epoch of cross-entropy SGD with fresh momentum buffers.
BlockwiseModel fine_tune_one_epoch(const BlockwiseModel& m,
                                   const Dataset& train, double lr,
                                   std::uint64_t seed,
                                   const FineTuneOptions& opts = {});

}  // namespace pcs

#endif  // PCS_NETCORE_HPP_
