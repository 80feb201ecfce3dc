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

#include "pcs/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pcs/ckptstore.hpp"
#include "pcs/errors.hpp"
#include "pcs/io.hpp"
#include "pcs/rng.hpp"

namespace pcs {

namespace {

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-step activations kept for backpropagation through time.
struct StepCache {
  std::vector<double> xh;  // [x_t; h_{t-1}]
  std::vector<double> i, f, g, o;
  std::vector<double> c_prev, c, tanh_c;
};

struct Unrolled {
  std::vector<StepCache> steps;
  std::vector<double> h;  // final hidden state
  std::vector<double> out;
};

void CheckInput(const SurrogateEstimator& psi, const Matrix& input) {
  if (input.cols() != static_cast<std::size_t>(psi.k) || input.rows() == 0) {
    throw DimensionMismatch("surrogate input must be M x " + std::to_string(psi.k));
  }
}

Unrolled Run(const SurrogateEstimator& psi, const Matrix& input,
             const kernels::KernelTable& kt) {
  CheckInput(psi, input);
  const auto d = static_cast<std::size_t>(psi.hidden);
  const auto k = static_cast<std::size_t>(psi.k);
  const std::size_t width = k + d;
  Unrolled u;
  std::vector<double> h(d, 0.0), c(d, 0.0), z(4 * d);
  for (std::size_t t = 0; t < input.rows(); ++t) {
    StepCache s;
    s.xh.resize(width);
    std::copy(input.row(t).begin(), input.row(t).end(), s.xh.begin());
    std::copy(h.begin(), h.end(), s.xh.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t r = 0; r < 4 * d; ++r) {
      z[r] = kt.dot(psi.w.row(r).data(), s.xh.data(), width) + psi.b[r];
    }
    s.i.resize(d); s.f.resize(d); s.g.resize(d); s.o.resize(d);
    s.c_prev = c;
    s.c.resize(d); s.tanh_c.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      s.i[j] = Sigmoid(z[j]);
      s.f[j] = Sigmoid(z[d + j]);
      s.g[j] = std::tanh(z[2 * d + j]);
      s.o[j] = Sigmoid(z[3 * d + j]);
      s.c[j] = s.f[j] * c[j] + s.i[j] * s.g[j];
      s.tanh_c[j] = std::tanh(s.c[j]);
      h[j] = s.o[j] * s.tanh_c[j];
    }
    c = s.c;
    u.steps.push_back(std::move(s));
  }
  u.h = h;
  u.out.resize(static_cast<std::size_t>(psi.n_out));
  for (std::size_t j = 0; j < u.out.size(); ++j) {
    u.out[j] = kt.dot(psi.head_w.row(j).data(), h.data(), d) + psi.head_b[j];
  }
  return u;
}

// Accumulates into `grad` the gradient of sum_j dout[j] * out_j.
void Backward(const SurrogateEstimator& psi, const Unrolled& u,
              std::span<const double> dout, const kernels::KernelTable& kt,
              EstimatorGradient& grad) {
  const auto d = static_cast<std::size_t>(psi.hidden);
  const auto k = static_cast<std::size_t>(psi.k);
  const std::size_t width = k + d;
  const std::size_t n_w = psi.w.size(), n_b = psi.b.size();
  const std::size_t n_hw = psi.head_w.size();
  double* gw = grad.params.data();
  double* gb = gw + n_w;
  double* ghw = gb + n_b;
  double* ghb = ghw + n_hw;

  std::vector<double> dh(d, 0.0);
  for (std::size_t j = 0; j < dout.size(); ++j) {
    kt.axpy(dout[j], u.h.data(), ghw + j * d, d);
    ghb[j] += dout[j];
    kt.axpy(dout[j], psi.head_w.row(j).data(), dh.data(), d);
  }
  std::vector<double> dc(d, 0.0), da(4 * d), dxh(width);
  for (std::size_t t = u.steps.size(); t-- > 0;) {
    const StepCache& s = u.steps[t];
    for (std::size_t j = 0; j < d; ++j) {
      const double tc = s.tanh_c[j];
      const double d_o = dh[j] * tc;
      dc[j] += dh[j] * s.o[j] * (1.0 - tc * tc);
      const double d_i = dc[j] * s.g[j];
      const double d_g = dc[j] * s.i[j];
      const double d_f = dc[j] * s.c_prev[j];
      da[j] = d_i * s.i[j] * (1.0 - s.i[j]);
      da[d + j] = d_f * s.f[j] * (1.0 - s.f[j]);
      da[2 * d + j] = d_g * (1.0 - s.g[j] * s.g[j]);
      da[3 * d + j] = d_o * s.o[j] * (1.0 - s.o[j]);
      dc[j] *= s.f[j];
    }
    std::fill(dxh.begin(), dxh.end(), 0.0);
    for (std::size_t r = 0; r < 4 * d; ++r) {
      kt.axpy(da[r], s.xh.data(), gw + r * width, width);
      gb[r] += da[r];
      kt.axpy(da[r], psi.w.row(r).data(), dxh.data(), width);
    }
    auto gx = grad.input.row(t);
    for (std::size_t j = 0; j < k; ++j) gx[j] += dxh[j];
    std::copy(dxh.begin() + static_cast<std::ptrdiff_t>(k), dxh.end(), dh.begin());
  }
}

EstimatorGradient ZeroGradient(const SurrogateEstimator& psi, const Matrix& input) {
  return {std::vector<double>(psi.n_params(), 0.0),
          Matrix(input.rows(), input.cols())};
}

}  // namespace

std::size_t SurrogateEstimator::n_params() const noexcept {
  return w.size() + b.size() + head_w.size() + head_b.size();
}

std::vector<double> SurrogateEstimator::flatten() const {
  std::vector<double> p;
  p.reserve(n_params());
  p.insert(p.end(), w.flat().begin(), w.flat().end());
  p.insert(p.end(), b.begin(), b.end());
  p.insert(p.end(), head_w.flat().begin(), head_w.flat().end());
  p.insert(p.end(), head_b.begin(), head_b.end());
  return p;
}

void SurrogateEstimator::unflatten(std::span<const double> params) {
  if (params.size() != n_params()) {
    throw DimensionMismatch("surrogate parameter vector has the wrong size");
  }
  auto it = params.begin();
  const auto take = [&it](auto dst_begin, std::size_t n) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(n), dst_begin);
    it += static_cast<std::ptrdiff_t>(n);
  };
  take(w.flat().begin(), w.size());
  take(b.begin(), b.size());
  take(head_w.flat().begin(), head_w.size());
  take(head_b.begin(), head_b.size());
}

SurrogateEstimator init_estimator(int k, int hidden, std::uint64_t seed,
                                  int n_out) {
  if (k < 1 || hidden < 1 || n_out < 1) {
    throw std::invalid_argument("surrogate: k, hidden and n_out must be >= 1");
  }
  SurrogateEstimator psi;
  psi.k = k;
  psi.hidden = hidden;
  psi.n_out = n_out;
  const auto d = static_cast<std::size_t>(hidden);
  psi.w = Matrix(4 * d, static_cast<std::size_t>(k) + d);
  psi.b.assign(4 * d, 0.0);
  std::fill(psi.b.begin() + static_cast<std::ptrdiff_t>(d),
            psi.b.begin() + static_cast<std::ptrdiff_t>(2 * d), 1.0);
  psi.head_w = Matrix(static_cast<std::size_t>(n_out), d);
  psi.head_b.assign(static_cast<std::size_t>(n_out), 0.0);

  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Rng rng = make_rng(seed, "surrogate/init");
  for (double& v : psi.w.flat()) v = dist(rng);
  for (double& v : psi.head_w.flat()) v = dist(rng);
  return psi;
}

std::vector<double> predict(const SurrogateEstimator& psi, const Matrix& input,
                            const kernels::KernelTable& kt) {
  return Run(psi, input, kt).out;
}

EstimatorGradient backprop(const SurrogateEstimator& psi, const Matrix& input,
                           std::span<const double> output_weights,
                           const kernels::KernelTable& kt) {
  if (output_weights.size() != static_cast<std::size_t>(psi.n_out)) {
    throw DimensionMismatch("one weight per surrogate output required");
  }
  const Unrolled u = Run(psi, input, kt);
  EstimatorGradient g = ZeroGradient(psi, input);
  Backward(psi, u, output_weights, kt, g);
  return g;
}

Matrix input_gradient(const SurrogateEstimator& psi, const Matrix& input,
                      double lambda) {
  std::vector<double> weights(static_cast<std::size_t>(psi.n_out), 0.0);
  weights[0] = 1.0;
  if (psi.n_out > 1) weights[1] = lambda;
  Matrix g = backprop(psi, input, weights).input;
  for (double v : g.flat()) {
    if (!std::isfinite(v)) throw NonFiniteGradient("surrogate input gradient not finite");
  }
  return g;
}

double estimator_loss(const SurrogateEstimator& psi,
                      std::span<const TrainingSample> samples,
                      std::span<const double> loss_weights) {
  if (samples.empty()) throw std::invalid_argument("estimator_loss: no samples");
  const auto& kt = kernels::active();
  double total = 0.0;
  for (const auto& s : samples) {
    const auto out = Run(psi, s.input, kt).out;
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double r = out[j] - s.target[j];
      total += loss_weights[j] * r * r;
    }
  }
  return total / static_cast<double>(samples.size());
}

std::vector<double> train_estimator(SurrogateEstimator& psi,
                                    std::span<const TrainingSample> samples,
                                    std::span<const double> loss_weights,
                                    int steps, double lr, std::uint64_t seed,
                                    std::size_t batch_size) {
  if (samples.empty()) throw std::invalid_argument("train_estimator: empty batch");
  if (loss_weights.size() != static_cast<std::size_t>(psi.n_out)) {
    throw DimensionMismatch("one loss weight per surrogate output required");
  }
  for (double w : loss_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
  }
  for (const auto& s : samples) {
    if (s.target.size() != static_cast<std::size_t>(psi.n_out)) {
      throw DimensionMismatch("sample target size != surrogate outputs");
    }
  }
  const auto& kt = kernels::active();
  const std::size_t n = samples.size();
  const std::size_t batch = batch_size == 0 ? n : std::min(batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "surrogate/train");
  std::size_t cursor = n;

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(steps) + 1);
  std::vector<double> params = psi.flatten();
  std::vector<double> dout(static_cast<std::size_t>(psi.n_out));
  for (int step = 0; step < steps; ++step) {
    if (batch < n && cursor + batch > n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    } else if (batch == n) {
      cursor = 0;
    }
    double loss = 0.0;
    EstimatorGradient g{std::vector<double>(params.size(), 0.0), Matrix()};
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const TrainingSample& s = samples[order[cursor + bi]];
      const Unrolled u = Run(psi, s.input, kt);
      for (std::size_t j = 0; j < dout.size(); ++j) {
        const double r = u.out[j] - s.target[j];
        loss += loss_weights[j] * r * r;
        dout[j] = 2.0 * loss_weights[j] * r / static_cast<double>(batch);
      }
      g.input = Matrix(s.input.rows(), s.input.cols());
      Backward(psi, u, dout, kt, g);
    }
    cursor += batch;
    loss /= static_cast<double>(batch);
    if (!std::isfinite(loss)) {
      throw NumericOverflow("surrogate loss is not finite at step " +
                                std::to_string(step),
                            step);
    }
    trace.push_back(loss);
    kt.axpy(-lr, g.params.data(), params.data(), params.size());
    psi.unflatten(params);
  }
  trace.push_back(estimator_loss(psi, samples, loss_weights));
  return trace;
}

void save_estimator(const SurrogateEstimator& psi,
                    const std::filesystem::path& path) {
  const auto blob = [](std::vector<std::uint32_t> shape,
                       std::span<const double> values) {
    TensorF32 t{std::move(shape), {}};
    for (double v : values) t.data.push_back(static_cast<float>(v));
    return encode_tensor(t);
  };
  const auto u32 = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  std::string bytes;
  bytes += blob({u32(psi.w.rows()), u32(psi.w.cols())}, psi.w.flat());
  bytes += blob({u32(psi.b.size())}, psi.b);
  bytes += blob({u32(psi.head_w.rows()), u32(psi.head_w.cols())}, psi.head_w.flat());
  bytes += blob({u32(psi.head_b.size())}, psi.head_b);
  write_file_atomic(path, bytes);
}

SurrogateEstimator load_estimator(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t off = 0;
  TensorF32 w = decode_tensor(bytes, off);
  TensorF32 b = decode_tensor(bytes, off);
  TensorF32 hw = decode_tensor(bytes, off);
  TensorF32 hb = decode_tensor(bytes, off);
  if (off != bytes.size() || w.shape.size() != 2 || hw.shape.size() != 2 ||
      w.shape[0] % 4 != 0 || hw.shape[1] * 4 != w.shape[0] ||
      w.shape[1] < hw.shape[1] || b.numel() != w.shape[0] ||
      hb.numel() != hw.shape[0]) {
    throw FormatError("inconsistent estimator file: " + path.string());
  }
  SurrogateEstimator psi;
  psi.hidden = static_cast<int>(hw.shape[1]);
  psi.k = static_cast<int>(w.shape[1] - hw.shape[1]);
  psi.n_out = static_cast<int>(hw.shape[0]);
  psi.w = Matrix(w.shape[0], w.shape[1], {w.data.begin(), w.data.end()});
  psi.b.assign(b.data.begin(), b.data.end());
  psi.head_w = Matrix(hw.shape[0], hw.shape[1], {hw.data.begin(), hw.data.end()});
  psi.head_b.assign(hb.data.begin(), hb.data.end());
  return psi;
}

// ---------------------------------------------------------------------------

Memory::Memory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("memory capacity must be >= 1");
}

void Memory::push(MemoryEntry entry) {
  entries_.push_back(std::move(entry));
  while (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<TrainingSample> training_samples(const Memory& memory,
                                             SurrogateTarget target) {
  std::vector<TrainingSample> out;
  out.reserve(memory.size());
  for (const auto& e : memory) {
    if (target == SurrogateTarget::kErrEce) {
      out.push_back({e.relaxed, {e.err, e.ece}});
    } else {
      out.push_back({e.relaxed, {e.nll}});
    }
  }
  return out;
}

}  // namespace pcs
