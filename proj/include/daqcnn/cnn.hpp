#pragma once

// Classical head: Conv2D -> act -> BatchNorm -> MaxPool -> Conv2D -> act ->
// Dropout -> Flatten -> Dropout -> Dense(1) -> sigmoid, with manual backprop,
// Adam, a training loop with early stopping on validation AUC, grid search and
// the DQKM checkpoint format.
//
// DQKM layout (little-endian):
//   "DQKM" | u16 version=1 | u32 height | u32 width | u32 channels | u32 filters
//   | u32 kernel | u8 activation (0 relu, 1 gelu) | f64 dropout | u32 tensor_count=10
//   | tensor_count x (u32 length | f64 values[length])
// Tensor order: conv1_w, conv1_b, bn_gamma, bn_beta, bn_running_mean,
// bn_running_var, conv2_w, conv2_b, dense_w, dense_b.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "daqcnn/binary_io.hpp"
#include "daqcnn/error.hpp"
#include "daqcnn/layers.hpp"
#include "daqcnn/metrics.hpp"
#include "daqcnn/parallel.hpp"
#include "daqcnn/quanvolve.hpp"
#include "daqcnn/rng.hpp"

namespace daqcnn::nn {

struct InputShape {
  std::size_t h = 0, w = 0, c = 0;
  bool operator==(const InputShape&) const = default;
};

struct Architecture {
  std::size_t filters = 64;
  std::size_t kernel = 2;
  Activation activation = Activation::relu;
  double dropout = 0.55;
};

// ---------------------------------------------------------------------------
// Shapes and parameter counts

struct LayerInfo {
  std::string name;
  std::vector<std::size_t> output_shape;
  std::size_t params = 0;
};

struct Geometry {
  std::size_t conv1_h, conv1_w, pool_h, pool_w, conv2_h, conv2_w, flat;
};

inline Geometry geometry(const Architecture& arch, const InputShape& in) {
  const std::size_t k = arch.kernel;
  if (in.c == 0 || k == 0 || arch.filters == 0) throw error(errc::shape_error, "empty dimension");
  if (in.h < k || in.w < k) throw error(errc::shape_error, "input smaller than the first kernel");
  Geometry g{};
  g.conv1_h = in.h - k + 1, g.conv1_w = in.w - k + 1;
  g.pool_h = g.conv1_h / 2, g.pool_w = g.conv1_w / 2;
  if (g.pool_h < k || g.pool_w < k) throw error(errc::shape_error, "pooled map smaller than the second kernel");
  g.conv2_h = g.pool_h - k + 1, g.conv2_w = g.pool_w - k + 1;
  g.flat = g.conv2_h * g.conv2_w * arch.filters;
  return g;
}

/// One entry per listed layer; activations are folded into their Conv2D.
inline std::vector<LayerInfo> param_count(const Architecture& arch, const InputShape& in) {
  const auto g = geometry(arch, in);
  const std::size_t k = arch.kernel, f = arch.filters;
  return {
      {"Conv2D", {g.conv1_h, g.conv1_w, f}, k * k * in.c * f + f},
      {"BatchNormalization", {g.conv1_h, g.conv1_w, f}, 4 * f},
      {"MaxPooling2D", {g.pool_h, g.pool_w, f}, 0},
      {"Conv2D", {g.conv2_h, g.conv2_w, f}, k * k * f * f + f},
      {"Dropout", {g.conv2_h, g.conv2_w, f}, 0},
      {"Flatten", {g.flat}, 0},
      {"Dropout", {g.flat}, 0},
      {"Dense", {1}, g.flat + 1},
  };
}

inline std::size_t total_params(const std::vector<LayerInfo>& layers) {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.params;
  return total;
}

// ---------------------------------------------------------------------------
// Parameters

enum ParamIndex : std::size_t { conv1_w, conv1_b, bn_gamma, bn_beta, conv2_w, conv2_b, dense_w, dense_b, num_tensors };

inline constexpr std::array<const char*, num_tensors> param_names = {
    "conv1_w", "conv1_b", "bn_gamma", "bn_beta", "conv2_w", "conv2_b", "dense_w", "dense_b"};

using ParamTensors = std::array<std::vector<double>, num_tensors>;

struct ModelParams {
  Architecture arch;
  InputShape input;
  ParamTensors p;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  bool operator==(const ModelParams& o) const {
    return arch.filters == o.arch.filters && arch.kernel == o.arch.kernel && arch.activation == o.arch.activation &&
           arch.dropout == o.arch.dropout && input == o.input && p == o.p && running_mean == o.running_mean &&
           running_var == o.running_var;
  }
};

inline ParamTensors zeros_like(const ParamTensors& p) {
  ParamTensors z;
  for (std::size_t i = 0; i < num_tensors; ++i) z[i].assign(p[i].size(), 0.0);
  return z;
}

/// Zero weights and biases, unit BN scale, zero running mean, unit running variance.
inline ModelParams zero_params(const Architecture& arch, const InputShape& in) {
  const auto g = geometry(arch, in);
  const std::size_t k = arch.kernel, f = arch.filters;
  ModelParams m{arch, in, {}, std::vector<double>(f, 0.0), std::vector<double>(f, 1.0)};
  m.p[conv1_w].assign(k * k * in.c * f, 0.0);
  m.p[conv1_b].assign(f, 0.0);
  m.p[bn_gamma].assign(f, 1.0);
  m.p[bn_beta].assign(f, 0.0);
  m.p[conv2_w].assign(k * k * f * f, 0.0);
  m.p[conv2_b].assign(f, 0.0);
  m.p[dense_w].assign(g.flat, 0.0);
  m.p[dense_b].assign(1, 0.0);
  return m;
}

/// He-uniform weights, limit sqrt(6 / fan_in); biases zero.
inline ModelParams init_params(const Architecture& arch, const InputShape& in, std::uint64_t seed) {
  ModelParams m = zero_params(arch, in);
  rng gen(seed);
  const std::size_t k = arch.kernel, f = arch.filters;
  auto fill = [&](std::vector<double>& w, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / double(fan_in));
    for (auto& v : w) v = gen.uniform(-limit, limit);
  };
  fill(m.p[conv1_w], k * k * in.c);
  fill(m.p[conv2_w], k * k * f);
  fill(m.p[dense_w], m.p[dense_w].size());
  return m;
}

// ---------------------------------------------------------------------------
// Forward and backward

enum class Mode { train, infer };

struct ForwardCache {
  ConvCache conv1;
  Tensor z1;
  BatchNormCache bn;
  PoolCache pool;
  ConvCache conv2;
  Tensor z2;
  std::vector<double> mask1;
  std::vector<double> mask2;
  Tensor flat;  // dense input
  std::vector<double> probs;
};

struct ForwardResult {
  std::vector<double> probs;
  ForwardCache cache;
};

/// Train mode uses batch statistics and inverted dropout seeded by
/// `dropout_seed`; infer mode uses running statistics and no dropout.
/// Running statistics are not touched here (see update_running_stats).
inline ForwardResult forward(const ModelParams& m, const Tensor& x, Mode mode, std::uint64_t dropout_seed = 0) {
  if (x.h != m.input.h || x.w != m.input.w || x.c != m.input.c)
    throw error(errc::shape_error, "batch shape does not match the model input");
  if (x.n == 0) throw error(errc::empty_input, "empty batch");
  const std::size_t k = m.arch.kernel;
  ForwardResult r;
  ForwardCache& c = r.cache;

  c.z1 = conv2d_forward(x, m.p[conv1_w], m.p[conv1_b], k, &c.conv1);
  Tensor a = activation_forward(c.z1, m.arch.activation);
  a = mode == Mode::train ? batchnorm_forward_train(a, m.p[bn_gamma], m.p[bn_beta], &c.bn)
                          : batchnorm_forward_infer(a, m.p[bn_gamma], m.p[bn_beta], m.running_mean, m.running_var);
  a = maxpool_forward(a, &c.pool);
  c.z2 = conv2d_forward(a, m.p[conv2_w], m.p[conv2_b], k, &c.conv2);
  a = activation_forward(c.z2, m.arch.activation);
  if (mode == Mode::train) {
    c.mask1 = dropout_mask(a.size(), m.arch.dropout, derive_seed(dropout_seed, 1));
    c.mask2 = dropout_mask(a.size(), m.arch.dropout, derive_seed(dropout_seed, 2));
    a = apply_mask(apply_mask(a, c.mask1), c.mask2);
  }
  c.flat = std::move(a);
  const auto logits = dense_forward(c.flat, m.p[dense_w], m.p[dense_b][0]);
  r.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw error(errc::non_finite_activation, "non-finite logit");
    r.probs[i] = sigmoid(logits[i]);
  }
  c.probs = r.probs;
  return r;
}

inline void update_running_stats(ModelParams& m, const ForwardCache& cache) {
  batchnorm_update_running(cache.bn, m.running_mean, m.running_var);
}

/// Gradients of the mean BCE loss for a train-mode forward.
inline ParamTensors backward(const ModelParams& m, const ForwardCache& c, std::span<const std::uint8_t> labels) {
  if (labels.size() != c.probs.size()) throw error(errc::count_mismatch, "labels vs batch");
  ParamTensors g = zeros_like(m.p);
  const std::size_t k = m.arch.kernel;
  const double n = double(labels.size());

  std::vector<double> dlogit(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) dlogit[i] = (c.probs[i] - labels[i]) / n;
  Tensor d = dense_backward(dlogit, c.flat, m.p[dense_w], g[dense_w], g[dense_b][0]);
  if (!c.mask1.empty()) d = apply_mask(apply_mask(d, c.mask2), c.mask1);
  d = activation_backward(d, c.z2, m.arch.activation);
  d = conv2d_backward(d, c.conv2, m.p[conv2_w], k, g[conv2_w], g[conv2_b]);
  d = maxpool_backward(d, c.pool);
  d = batchnorm_backward(d, c.bn, m.p[bn_gamma], g[bn_gamma], g[bn_beta]);
  d = activation_backward(d, c.z1, m.arch.activation);
  conv2d_backward(d, c.conv1, m.p[conv1_w], k, g[conv1_w], g[conv1_b]);
  return g;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  ParamTensors m;
  ParamTensors v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(const ParamTensors& like) : m(zeros_like(like)), v(zeros_like(like)) {}
};

inline constexpr double adam_beta1 = 0.9;
inline constexpr double adam_beta2 = 0.999;
inline constexpr double adam_epsilon = 1e-8;

/// Bias-corrected Adam update in place.
inline void adam_step(ParamTensors& params, const ParamTensors& grads, AdamState& state, double lr) {
  ++state.t;
  const double c1 = 1.0 - std::pow(adam_beta1, double(state.t));
  const double c2 = 1.0 - std::pow(adam_beta2, double(state.t));
  for (std::size_t i = 0; i < num_tensors; ++i) {
    if (grads[i].size() != params[i].size()) throw error(errc::shape_error, "gradient size");
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      double& m = state.m[i][j];
      double& v = state.v[i][j];
      m = adam_beta1 * m + (1 - adam_beta1) * g;
      v = adam_beta2 * v + (1 - adam_beta2) * g * g;
      params[i][j] -= lr * (m / c1) / (std::sqrt(v / c2) + adam_epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Samples and splits

struct Samples {
  InputShape shape;
  std::vector<double> x;  // size() * h * w * c, NHWC
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t stride() const noexcept { return shape.h * shape.w * shape.c; }

  Tensor batch(std::span<const std::size_t> indices) const {
    Tensor t(indices.size(), shape.h, shape.w, shape.c);
    for (std::size_t b = 0; b < indices.size(); ++b)
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(indices[b] * stride()), stride(),
                  t.data.begin() + static_cast<std::ptrdiff_t>(b * stride()));
    return t;
  }
};

inline Samples samples_from_features(const FeatureFile& f, std::span<const std::size_t> indices) {
  Samples s{{f.h_out, f.w_out, f.channels}, {}, {}};
  s.x.reserve(indices.size() * s.stride());
  for (std::size_t i : indices) {
    if (i >= f.num_images) throw error(errc::index_out_of_range, "sample index");
    const auto img = f.image(i);
    s.x.insert(s.x.end(), img.begin(), img.end());
    s.labels.push_back(f.labels[i]);
  }
  return s;
}

inline Samples samples_from_features(const FeatureFile& f) {
  std::vector<std::size_t> all(f.num_images);
  std::iota(all.begin(), all.end(), 0);
  return samples_from_features(f, all);
}

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Stratified seeded split: each class is shuffled and cut at
/// floor(train_frac * count) and floor((train_frac + val_frac) * count).
inline SplitIndices split_indices(std::span<const std::uint8_t> labels, std::uint64_t seed, double train_frac = 0.7,
                                  double val_frac = 0.15) {
  if (!(train_frac > 0 && val_frac >= 0 && train_frac + val_frac <= 1))
    throw error(errc::config_error, "split fractions");
  SplitIndices out;
  rng gen(seed);
  for (std::uint8_t cls : {std::uint8_t(0), std::uint8_t(1)}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    shuffle(idx, gen);
    const auto a = static_cast<std::size_t>(std::floor(train_frac * double(idx.size())));
    const auto b = static_cast<std::size_t>(std::floor((train_frac + val_frac) * double(idx.size())));
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(a));
    out.val.insert(out.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(a), idx.begin() + static_cast<std::ptrdiff_t>(b));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(b), idx.end());
  }
  for (auto* v : {&out.train, &out.val, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

/// Infer-mode probabilities in chunks.
inline std::vector<double> predict(const ModelParams& m, const Samples& s, std::size_t chunk = 256) {
  std::vector<double> probs;
  probs.reserve(s.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < s.size(); start += chunk) {
    idx.resize(std::min(chunk, s.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto r = forward(m, s.batch(idx), Mode::infer);
    probs.insert(probs.end(), r.probs.begin(), r.probs.end());
  }
  return probs;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 5e-4;
  double dropout = 0.55;
  Activation activation = Activation::relu;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  std::size_t patience = 15;
  std::uint64_t seed = 0;
  std::size_t filters = 64;

  void validate() const {
    if (!(learning_rate >= 0)) throw error(errc::config_error, "learning_rate must be >= 0");
    if (!(dropout >= 0 && dropout < 1)) throw error(errc::config_error, "dropout must be in [0, 1)");
    if (batch_size == 0) throw error(errc::config_error, "batch_size must be >= 1");
    if (epochs == 0) throw error(errc::config_error, "epochs must be >= 1");
    if (filters == 0) throw error(errc::config_error, "filters must be >= 1");
  }

  Architecture architecture() const { return {filters, 2, activation, dropout}; }
};

// Streams derived from TrainConfig::seed.
enum SeedStream : std::uint64_t { seed_init = 1, seed_shuffle = 2, seed_dropout = 3 };

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_auc = 0;
  double val_acc = 0;
};

struct TrainResult {
  ModelParams params;  // best-validation-AUC parameters
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_auc = 0;
};

/// Minibatch Adam on BCE. After each epoch the validation AUC is measured;
/// an epoch improves on the best if its AUC is higher, or equal with lower
/// validation loss. The best parameters are restored at the end and training
/// stops after `patience` epochs without improvement (0 disables stopping).
inline TrainResult train(const Samples& tr, const Samples& val, const TrainConfig& cfg) {
  cfg.validate();
  if (tr.size() == 0) throw error(errc::empty_split, "training split is empty");
  if (val.size() == 0) throw error(errc::empty_split, "validation split is empty");
  if (!(val.shape == tr.shape)) throw error(errc::shape_error, "train and validation shapes differ");
  {
    const auto counts = detail::count_classes(val.labels);
    if (counts.pos == 0 || counts.neg == 0)
      throw error(errc::single_class, "validation split must contain both classes");
  }

  TrainResult result;
  ModelParams m = init_params(cfg.architecture(), tr.shape, derive_seed(cfg.seed, seed_init));
  AdamState adam(m.p);
  rng order_gen(derive_seed(cfg.seed, seed_shuffle));
  const std::uint64_t dropout_stream = derive_seed(cfg.seed, seed_dropout);
  std::uint64_t step = 0;

  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  result.best_val_auc = -1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, order_gen);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      std::vector<std::uint8_t> labels(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = tr.labels[idx[b]];
      const auto fr = forward(m, tr.batch(idx), Mode::train, derive_seed(dropout_stream, step++));
      loss_sum += loss_bce(fr.probs, labels) * double(idx.size());
      const auto grads = backward(m, fr.cache, labels);
      update_running_stats(m, fr.cache);
      adam_step(m.p, grads, adam, cfg.learning_rate);
    }

    const auto probs = predict(m, val);
    EpochRecord rec{epoch, loss_sum / double(tr.size()), loss_bce(probs, val.labels), auc(probs, val.labels),
                    accuracy(probs, val.labels)};
    result.history.push_back(rec);
    if (rec.val_auc > result.best_val_auc || (rec.val_auc == result.best_val_auc && rec.val_loss < best_val_loss)) {
      result.best_val_auc = rec.val_auc;
      best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = m;
    }
    if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Grid search

struct GridSpec {
  std::vector<double> learning_rates{1e-4, 5e-4};
  std::vector<double> dropouts{0.55, 0.6};
  std::vector<Activation> activations{Activation::relu, Activation::gelu};
  std::size_t repeats = 30;

  std::size_t cells() const noexcept { return learning_rates.size() * dropouts.size() * activations.size(); }
};

struct GridRow {
  std::size_t row = 0;
  std::size_t cell = 0;
  double learning_rate = 0;
  double dropout = 0;
  Activation activation = Activation::relu;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double val_auc = 0, val_acc = 0, test_auc = 0, test_acc = 0;
};

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Linear interpolation between order statistics.
inline Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw error(errc::empty_input, "quartiles of nothing");
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

struct CellSummary {
  std::size_t cell = 0;
  double learning_rate = 0;
  double dropout = 0;
  Activation activation = Activation::relu;
  Quartiles val_auc, test_auc, test_acc;
};

struct GridResult {
  std::vector<GridRow> rows;
  std::size_t best = 0;  // index of the row with maximum validation AUC (first on ties)
  std::vector<CellSummary> summaries;
};

/// Full cross product (learning rate outer, then dropout, activation, repeat).
/// Repeat r trains with seed derive_seed(base.seed, r) in every cell, so cells
/// share initializations. Rows run concurrently; each run is sequential.
inline GridResult grid_search(const Samples& tr, const Samples& val, const Samples& test, const TrainConfig& base,
                              const GridSpec& grid, std::size_t workers = 0) {
  if (grid.cells() == 0 || grid.repeats == 0) throw error(errc::config_error, "grid is empty");
  GridResult out;
  for (double lr : grid.learning_rates)
    for (double dr : grid.dropouts)
      for (Activation act : grid.activations)
        for (std::size_t r = 0; r < grid.repeats; ++r) {
          GridRow row;
          row.row = out.rows.size();
          row.cell = row.row / grid.repeats;
          row.learning_rate = lr, row.dropout = dr, row.activation = act, row.repeat = r;
          row.seed = derive_seed(base.seed, r);
          out.rows.push_back(row);
        }

  parallel_for(out.rows.size(), workers, [&](std::size_t i) {
    GridRow& row = out.rows[i];
    TrainConfig cfg = base;
    cfg.learning_rate = row.learning_rate, cfg.dropout = row.dropout, cfg.activation = row.activation;
    cfg.seed = row.seed;
    const auto res = train(tr, val, cfg);
    const auto probs = predict(res.params, test);
    row.best_epoch = res.best_epoch;
    row.epochs_run = res.history.size();
    row.val_auc = res.best_val_auc;
    row.val_acc = res.history[res.best_epoch - 1].val_acc;
    row.test_auc = auc(probs, test.labels);
    row.test_acc = accuracy(probs, test.labels);
  });

  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (out.rows[i].val_auc > out.rows[out.best].val_auc) out.best = i;

  for (std::size_t cell = 0; cell < grid.cells(); ++cell) {
    std::vector<double> va, ta, tc;
    for (std::size_t r = 0; r < grid.repeats; ++r) {
      const auto& row = out.rows[cell * grid.repeats + r];
      va.push_back(row.val_auc), ta.push_back(row.test_auc), tc.push_back(row.test_acc);
    }
    const auto& first = out.rows[cell * grid.repeats];
    out.summaries.push_back({cell, first.learning_rate, first.dropout, first.activation, quartiles(va), quartiles(ta),
                             quartiles(tc)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline constexpr char checkpoint_magic[4] = {'D', 'Q', 'K', 'M'};
inline constexpr std::uint16_t checkpoint_version = 1;
inline constexpr std::uint32_t checkpoint_tensors = 10;

inline std::vector<std::uint8_t> encode_checkpoint(const ModelParams& m) {
  io::Writer w(std::endian::little);
  for (char c : checkpoint_magic) w.put(static_cast<std::uint8_t>(c));
  w.put(checkpoint_version);
  w.put(std::uint32_t(m.input.h)).put(std::uint32_t(m.input.w)).put(std::uint32_t(m.input.c));
  w.put(std::uint32_t(m.arch.filters)).put(std::uint32_t(m.arch.kernel));
  w.put(std::uint8_t(m.arch.activation == Activation::relu ? 0 : 1));
  w.put(m.arch.dropout);
  w.put(checkpoint_tensors);
  auto tensor = [&](const std::vector<double>& t) {
    w.put(std::uint32_t(t.size()));
    for (double v : t) w.put(v);
  };
  tensor(m.p[conv1_w]), tensor(m.p[conv1_b]), tensor(m.p[bn_gamma]), tensor(m.p[bn_beta]);
  tensor(m.running_mean), tensor(m.running_var);
  tensor(m.p[conv2_w]), tensor(m.p[conv2_b]), tensor(m.p[dense_w]), tensor(m.p[dense_b]);
  return w.take();
}

inline ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what = "checkpoint") {
  io::Reader r(bytes, std::endian::little, what);
  for (char c : checkpoint_magic)
    if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c)) throw error(errc::bad_magic, what);
  if (const auto version = r.get<std::uint16_t>(); version != checkpoint_version)
    throw error(errc::bad_magic, what + ": unsupported version " + std::to_string(version));
  InputShape in;
  in.h = r.get<std::uint32_t>(), in.w = r.get<std::uint32_t>(), in.c = r.get<std::uint32_t>();
  Architecture arch;
  arch.filters = r.get<std::uint32_t>();
  arch.kernel = r.get<std::uint32_t>();
  const auto act = r.get<std::uint8_t>();
  if (act > 1) throw error(errc::config_error, what + ": unknown activation code");
  arch.activation = act == 0 ? Activation::relu : Activation::gelu;
  arch.dropout = r.get<double>();
  if (r.get<std::uint32_t>() != checkpoint_tensors) throw error(errc::count_mismatch, what + ": tensor count");
  const std::size_t values = total_params(param_count(arch, in));
  if (values > r.remaining() / sizeof(double)) throw error(errc::truncated_file, what + " ends early");

  ModelParams m = zero_params(arch, in);
  auto tensor = [&](std::vector<double>& t) {
    if (r.get<std::uint32_t>() != t.size()) throw error(errc::shape_mismatch, what + ": tensor length");
    for (auto& v : t) v = r.get<double>();
  };
  tensor(m.p[conv1_w]), tensor(m.p[conv1_b]), tensor(m.p[bn_gamma]), tensor(m.p[bn_beta]);
  tensor(m.running_mean), tensor(m.running_var);
  tensor(m.p[conv2_w]), tensor(m.p[conv2_b]), tensor(m.p[dense_w]), tensor(m.p[dense_b]);
  if (r.remaining() != 0) throw error(errc::count_mismatch, what + " has trailing bytes");
  return m;
}

inline void write_checkpoint(const std::filesystem::path& path, const ModelParams& m) {
  io::write_file(path, encode_checkpoint(m));
}

inline ModelParams read_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw error(errc::io_error, "checkpoint not found: " + path.string());
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace daqcnn::nn
