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

#include "pcs/netcore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "pcs/calmetrics.hpp"
#include "pcs/errors.hpp"
#include "pcs/io.hpp"
#include "pcs/rng.hpp"

namespace pcs {

// ---------------------------------------------------------------------------
// Architecture and model

int Architecture::block_in(int block) const {
  return block == 0 ? n_features : block_widths[static_cast<std::size_t>(block - 1)];
}

int Architecture::block_out(int block) const {
  return block == n_blocks() - 1 ? n_classes
                                 : block_widths[static_cast<std::size_t>(block)];
}

void Architecture::validate() const {
  if (n_features < 1) throw std::invalid_argument("arch: n_features < 1");
  if (n_classes < 2) throw std::invalid_argument("arch: n_classes < 2");
  if (block_widths.empty()) throw std::invalid_argument("arch: need M >= 2 blocks");
  for (int w : block_widths) {
    if (w < 1) throw std::invalid_argument("arch: block width < 1");
  }
}

std::uint64_t Architecture::digest() const {
  std::string bytes;
  const auto put = [&bytes](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(static_cast<std::uint32_t>(n_features));
  put(static_cast<std::uint32_t>(n_classes));
  for (int w : block_widths) put(static_cast<std::uint32_t>(w));
  return fnv1a64(bytes);
}

std::size_t BlockwiseModel::n_params() const noexcept {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.n_params();
  return n;
}

BlockwiseModel init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  BlockwiseModel m;
  m.arch = arch;
  Rng rng = make_rng(seed, "netcore/init");
  for (int b = 0; b < arch.n_blocks(); ++b) {
    const int in = arch.block_in(b), out = arch.block_out(b);
    const double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Block blk{Matrix(static_cast<std::size_t>(out), static_cast<std::size_t>(in)),
              std::vector<double>(static_cast<std::size_t>(out), 0.0)};
    for (double& w : blk.weight.flat()) w = dist(rng);
    m.blocks.push_back(std::move(blk));
  }
  return m;
}

TensorF32 block_to_tensor(const Block& block) {
  const std::size_t out = block.weight.rows(), in = block.weight.cols();
  TensorF32 t;
  t.shape = {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in + 1)};
  t.data.reserve(out * (in + 1));
  for (std::size_t o = 0; o < out; ++o) {
    for (double w : block.weight.row(o)) t.data.push_back(static_cast<float>(w));
    t.data.push_back(static_cast<float>(block.bias[o]));
  }
  return t;
}

Block tensor_to_block(const TensorF32& t, int in, int out) {
  if (t.shape.size() != 2 || t.shape[0] != static_cast<std::uint32_t>(out) ||
      t.shape[1] != static_cast<std::uint32_t>(in + 1)) {
    throw DimensionMismatch("checkpoint blob shape does not match block " +
                            std::to_string(out) + "x" + std::to_string(in + 1));
  }
  Block b{Matrix(static_cast<std::size_t>(out), static_cast<std::size_t>(in)),
          std::vector<double>(static_cast<std::size_t>(out))};
  std::size_t i = 0;
  for (int o = 0; o < out; ++o) {
    for (int c = 0; c < in; ++c) b.weight(o, c) = t.data[i++];
    b.bias[o] = t.data[i++];
  }
  return b;
}

BlockwiseModel quantize_f32(const BlockwiseModel& m) {
  BlockwiseModel q = m;
  for (auto& b : q.blocks) {
    for (double& w : b.weight.flat()) w = static_cast<float>(w);
    for (double& v : b.bias) v = static_cast<float>(v);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

// Activations kept for backprop: inputs[b] is the input of block b and
// pre[b] the pre-activation of hidden block b.
struct Trace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

Matrix Affine(const Block& blk, const Matrix& in, const kernels::KernelTable& k) {
  const std::size_t out = blk.weight.rows(), width = blk.weight.cols();
  Matrix z(in.rows(), out);
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const double* x = in.row(r).data();
    for (std::size_t o = 0; o < out; ++o) {
      z(r, o) = k.dot(x, blk.weight.row(o).data(), width) + blk.bias[o];
    }
  }
  return z;
}

Matrix Logits(const BlockwiseModel& m, const Matrix& x,
              const kernels::KernelTable& k, Trace* trace) {
  if (x.cols() != static_cast<std::size_t>(m.arch.n_features)) {
    throw DimensionMismatch("input width " + std::to_string(x.cols()) +
                            " != n_features " +
                            std::to_string(m.arch.n_features));
  }
  const int n_blocks = m.arch.n_blocks();
  Matrix act = x;
  for (int b = 0; b < n_blocks; ++b) {
    Matrix z = Affine(m.blocks[b], act, k);
    if (trace) trace->inputs.push_back(std::move(act));
    if (b == n_blocks - 1) return z;
    if (trace) trace->pre.push_back(z);
    k.relu(z.data(), z.size());
    act = std::move(z);
  }
  return act;  // unreachable: n_blocks >= 2
}

double LogSumExp(std::span<const double> z) {
  double m = -INFINITY;
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

ForwardResult forward(const BlockwiseModel& m, const Matrix& x,
                      const kernels::KernelTable& k) {
  ForwardResult r;
  r.logits = Logits(m, x, k, nullptr);
  r.probs = softmax_rows(r.logits);
  return r;
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kBrier: return "brier";
    case LossKind::kLabelSmoothing: return "label_smoothing";
    case LossKind::kFocal: return "focal";
    case LossKind::kFlsd53: return "flsd53";
  }
  return "unknown";
}

LossKind loss_kind_from_string(std::string_view s) {
  for (auto k : {LossKind::kCrossEntropy, LossKind::kBrier,
                 LossKind::kLabelSmoothing, LossKind::kFocal,
                 LossKind::kFlsd53}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown loss kind: " + std::string(s));
}

double train_loss(const Matrix& probs, std::span<const int> labels,
                  const LossSpec& spec) {
  if (probs.rows() != labels.size() || labels.empty()) {
    throw DimensionMismatch("train_loss: probs/labels mismatch");
  }
  const std::size_t k = probs.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto y = static_cast<std::size_t>(labels[r]);
    const double p = probs(r, y);
    switch (spec.kind) {
      case LossKind::kCrossEntropy:
        total -= std::log(p);
        break;
      case LossKind::kBrier:
        for (std::size_t c = 0; c < k; ++c) {
          const double d = probs(r, c) - (c == y ? 1.0 : 0.0);
          total += d * d;
        }
        break;
      case LossKind::kLabelSmoothing:
        for (std::size_t c = 0; c < k; ++c) {
          const double q = (c == y ? 1.0 - spec.smoothing : 0.0) +
                           spec.smoothing / static_cast<double>(k);
          total -= q * std::log(probs(r, c));
        }
        break;
      case LossKind::kFocal:
        total -= std::pow(1.0 - p, spec.focal_gamma) * std::log(p);
        break;
      case LossKind::kFlsd53:
        total -= std::pow(1.0 - p, flsd53_gamma(p)) * std::log(p);
        break;
      default:
        throw std::invalid_argument("train_loss: unknown loss kind");
    }
  }
  return total / static_cast<double>(probs.rows());
}

std::pair<double, Matrix> loss_and_logit_grad(const Matrix& logits,
                                              std::span<const int> labels,
                                              const LossSpec& spec) {
  if (logits.rows() != labels.size() || labels.empty()) {
    throw DimensionMismatch("loss: logits/labels mismatch");
  }
  const std::size_t n = logits.rows(), k = logits.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix grad(n, k);
  std::vector<double> logp(k), p(k);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    auto z = logits.row(r);
    const double lse = LogSumExp(z);
    for (std::size_t c = 0; c < k; ++c) {
      logp[c] = z[c] - lse;
      p[c] = std::exp(logp[c]);
    }
    const auto y = static_cast<std::size_t>(labels[r]);
    auto g = grad.row(r);
    switch (spec.kind) {
      case LossKind::kCrossEntropy:
        total -= logp[y];
        for (std::size_t c = 0; c < k; ++c) g[c] = p[c] - (c == y ? 1.0 : 0.0);
        break;
      case LossKind::kBrier: {
        // dL/dz_j = p_j (g_j - sum_c g_c p_c) with g_c = 2 (p_c - e_c).
        double dot = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          const double d = p[c] - (c == y ? 1.0 : 0.0);
          total += d * d;
          dot += 2.0 * d * p[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
          const double d = p[c] - (c == y ? 1.0 : 0.0);
          g[c] = p[c] * (2.0 * d - dot);
        }
        break;
      }
      case LossKind::kLabelSmoothing:
        for (std::size_t c = 0; c < k; ++c) {
          const double q = (c == y ? 1.0 - spec.smoothing : 0.0) +
                           spec.smoothing / static_cast<double>(k);
          total -= q * logp[c];
          g[c] = p[c] - q;
        }
        break;
      case LossKind::kFocal:
      case LossKind::kFlsd53: {
        const double py = p[y];
        const double gamma =
            spec.kind == LossKind::kFocal ? spec.focal_gamma : flsd53_gamma(py);
        const double one_minus = 1.0 - py;
        total -= std::pow(one_minus, gamma) * logp[y];
        // dL/dz_j = [gamma (1-p)^(gamma-1) p log p - (1-p)^gamma] (d_jy - p_j)
        const double coef = gamma * std::pow(one_minus, gamma - 1.0) * py * logp[y] -
                            std::pow(one_minus, gamma);
        for (std::size_t c = 0; c < k; ++c) {
          g[c] = coef * ((c == y ? 1.0 : 0.0) - p[c]);
        }
        break;
      }
      default:
        throw std::invalid_argument("loss: unknown loss kind");
    }
    for (double& v : g) v *= inv_n;
  }
  return {total * inv_n, std::move(grad)};
}

std::pair<double, Gradients> loss_and_gradients(const BlockwiseModel& m,
                                                const Matrix& x,
                                                std::span<const int> labels,
                                                const LossSpec& spec,
                                                const kernels::KernelTable& k) {
  Trace trace;
  const Matrix logits = Logits(m, x, k, &trace);
  auto [loss, dz] = loss_and_logit_grad(logits, labels, spec);

  const int n_blocks = m.arch.n_blocks();
  Gradients grads;
  grads.blocks.resize(static_cast<std::size_t>(n_blocks));
  for (int b = n_blocks - 1; b >= 0; --b) {
    const Block& blk = m.blocks[b];
    const Matrix& in = trace.inputs[b];
    const std::size_t out = blk.weight.rows(), width = blk.weight.cols();
    Block& gb = grads.blocks[b];
    gb.weight = Matrix(out, width);
    gb.bias.assign(out, 0.0);
    for (std::size_t r = 0; r < in.rows(); ++r) {
      const double* xr = in.row(r).data();
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dz(r, o);
        k.axpy(d, xr, gb.weight.row(o).data(), width);
        gb.bias[o] += d;
      }
    }
    if (b == 0) break;
    Matrix din(in.rows(), width);
    for (std::size_t r = 0; r < in.rows(); ++r) {
      double* dr = din.row(r).data();
      for (std::size_t o = 0; o < out; ++o) {
        k.axpy(dz(r, o), blk.weight.row(o).data(), dr, width);
      }
    }
    const Matrix& pre = trace.pre[b - 1];
    k.relu_backward(din.data(), pre.data(), din.size());
    dz = std::move(din);
  }
  return {loss, std::move(grads)};
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (lr_schedule.empty() || lr_schedule.front().start_epoch != 0) {
    throw std::invalid_argument("train: lr schedule must start at epoch 0");
  }
  for (std::size_t i = 1; i < lr_schedule.size(); ++i) {
    if (lr_schedule[i].start_epoch <= lr_schedule[i - 1].start_epoch) {
      throw std::invalid_argument("train: lr schedule must be increasing");
    }
  }
  for (const auto& p : lr_schedule) {
    if (!(p.lr >= 0.0)) throw std::invalid_argument("train: lr must be >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("train: weight_decay must be >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
}

double TrainConfig::lr_at(int epoch_index) const {
  double lr = lr_schedule.front().lr;
  for (const auto& p : lr_schedule) {
    if (p.start_epoch <= epoch_index) lr = p.lr;
  }
  return lr;
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_error,val_ece\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << format_double(r.train_loss) << ','
        << format_double(r.val_loss) << ',' << format_double(r.val_error) << ','
        << format_double(r.val_ece) << '\n';
  }
  return out.str();
}

TrainLog TrainLog::from_csv(std::string_view csv) {
  TrainLog log;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    ++row;
    if (row == 1 || line.empty()) continue;
    EpochRecord rec;
    double* fields[] = {&rec.train_loss, &rec.val_loss, &rec.val_error,
                        &rec.val_ece};
    const char* p = line.data();
    const char* e = line.data() + line.size();
    auto [q, ec] = std::from_chars(p, e, rec.epoch);
    if (ec != std::errc()) throw ParseError("train log: bad epoch", row);
    p = q;
    for (double* f : fields) {
      if (p == e || *p != ',') throw ParseError("train log: missing field", row);
      ++p;
      auto [q2, ec2] = std::from_chars(p, e, *f);
      if (ec2 != std::errc()) throw ParseError("train log: bad number", row);
      p = q2;
    }
    if (p != e) throw ParseError("train log: trailing data", row);
    log.records.push_back(rec);
  }
  return log;
}

bool StoreSink::wants(int epoch) const {
  return store_.candidate_of_epoch(epoch).has_value();
}

void StoreSink::put(int epoch, const BlockwiseModel& m) {
  const int cand = *store_.candidate_of_epoch(epoch);
  for (int b = 0; b < m.arch.n_blocks(); ++b) {
    store_.put_block(b, cand, block_to_tensor(m.blocks[b]));
  }
}

void RetainAllSink::put(int epoch, const BlockwiseModel& m) {
  if (epoch != size() + 1) {
    throw std::invalid_argument("RetainAllSink: epochs must arrive in order");
  }
  models_.push_back(quantize_f32(m));
}

const BlockwiseModel& RetainAllSink::at(int epoch) const {
  if (epoch < 1 || epoch > size()) {
    throw IndexOutOfRange("no retained model for epoch " + std::to_string(epoch));
  }
  return models_[static_cast<std::size_t>(epoch - 1)];
}

namespace {

std::vector<Block> ZerosLike(const BlockwiseModel& m) {
  std::vector<Block> z;
  for (const auto& b : m.blocks) {
    z.push_back({Matrix(b.weight.rows(), b.weight.cols()),
                 std::vector<double>(b.bias.size(), 0.0)});
  }
  return z;
}

}  // namespace

double sgd_epoch(BlockwiseModel& m, std::vector<Block>& velocity,
                 const Dataset& data, const SgdOptions& opts,
                 std::uint64_t order_seed, int epoch) {
  if (data.n_features() != static_cast<std::size_t>(m.arch.n_features)) {
    throw DimensionMismatch("dataset width does not match the model");
  }
  const auto& k = kernels::active();
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(order_seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto batch = static_cast<std::size_t>(opts.batch_size);
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t stop = std::min(n, start + batch);
    const std::span<const std::size_t> idx(order.data() + start, stop - start);
    const Dataset mb = subset(data, idx, {});
    auto [loss, grads] = loss_and_gradients(m, mb.features, mb.labels, opts.loss, k);
    if (!std::isfinite(loss)) {
      throw NumericOverflow("non-finite training loss at epoch " +
                                std::to_string(epoch),
                            epoch);
    }
    loss_sum += loss * static_cast<double>(idx.size());
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
      Block& w = m.blocks[b];
      Block& v = velocity[b];
      const Block& g = grads.blocks[b];
      k.sgd_momentum(w.weight.data(), v.weight.data(), g.weight.data(),
                     w.weight.size(), opts.lr, opts.momentum, opts.weight_decay);
      k.sgd_momentum(w.bias.data(), v.bias.data(), g.bias.data(), w.bias.size(),
                     opts.lr, opts.momentum, opts.weight_decay);
    }
  }
  return loss_sum / static_cast<double>(n);
}

TrainLog train_epochs(BlockwiseModel& m, const Dataset& train,
                      const Dataset& val, const TrainConfig& cfg,
                      CheckpointSink* sink) {
  cfg.validate();
  if (val.n_features() != static_cast<std::size_t>(m.arch.n_features)) {
    throw DimensionMismatch("validation width does not match the model");
  }
  std::vector<Block> velocity = ZerosLike(m);
  TrainLog log;
  for (int e = 0; e < cfg.epochs; ++e) {
    const int epoch = e + 1;
    SgdOptions opts{cfg.lr_at(e), cfg.momentum, cfg.weight_decay,
                    cfg.batch_size, cfg.loss};
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sgd_epoch(m, velocity, train, opts,
                               derive_seed(cfg.seed, "train/epoch-order", epoch),
                               epoch);
    const auto out = forward(m, val.features);
    PredictionSet ps{out.probs, val.labels};
    rec.val_loss = nll(ps);
    rec.val_error = error(ps);
    rec.val_ece = ece(ps);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericOverflow("non-finite validation loss at epoch " +
                                std::to_string(epoch),
                            epoch);
    }
    log.records.push_back(rec);
    if (sink && sink->wants(epoch)) {
      sink->put(epoch, m);
      log.checkpoint_epochs.push_back(epoch);
    }
  }
  return log;
}

BlockwiseModel assemble(const CheckpointStore& store, const Architecture& arch,
                        std::span<const int> candidates) {
  if (candidates.size() != static_cast<std::size_t>(arch.n_blocks())) {
    throw std::invalid_argument("assemble: need one candidate per block");
  }
  BlockwiseModel m;
  m.arch = arch;
  for (int b = 0; b < arch.n_blocks(); ++b) {
    const int c = candidates[static_cast<std::size_t>(b)];
    if (c < 0 || c >= store.k()) {
      throw MissingCheckpoint("no candidate " + std::to_string(c) +
                                  " for block " + std::to_string(b),
                              b, c);
    }
    m.blocks.push_back(
        tensor_to_block(store.get_block(b, c), arch.block_in(b), arch.block_out(b)));
  }
  return m;
}

BlockwiseModel fine_tune_one_epoch(const BlockwiseModel& m,
                                   const Dataset& train, double lr,
                                   std::uint64_t seed,
                                   const FineTuneOptions& opts) {
  if (!(lr >= 0.0)) throw std::invalid_argument("fine-tune: lr must be >= 0");
  BlockwiseModel out = m;
  std::vector<Block> velocity = ZerosLike(m);
  SgdOptions sgd{lr, opts.momentum, opts.weight_decay, opts.batch_size,
                 LossSpec{LossKind::kCrossEntropy}};
  sgd_epoch(out, velocity, train, sgd, derive_seed(seed, "finetune/order"), 1);
  return out;
}

}  // namespace pcs
