#pragma once

// Layer primitives of the classical head. Tensors are NHWC, 64-bit.
// Every layer has a forward that fills a cache and a backward that consumes it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "daqcnn/error.hpp"
#include "daqcnn/rng.hpp"

namespace daqcnn::nn {

struct Tensor {
  std::size_t n = 0, h = 0, w = 0, c = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t n_, std::size_t h_, std::size_t w_, std::size_t c_, double fill = 0.0)
      : n(n_), h(h_), w(w_), c(c_), data(n_ * h_ * w_ * c_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t per_sample() const noexcept { return h * w * c; }
  double& at(std::size_t i, std::size_t y, std::size_t x, std::size_t ch) { return data[((i * h + y) * w + x) * c + ch]; }
  double at(std::size_t i, std::size_t y, std::size_t x, std::size_t ch) const {
    return data[((i * h + y) * w + x) * c + ch];
  }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// ---------------------------------------------------------------------------
// Conv2D: k x k, stride 1, valid padding. Weights are laid out
// [kh][kw][in][out], i.e. a (k*k*in) x out row-major matrix.

struct ConvCache {
  Tensor input_shape;  // dimensions only, data left empty
  RowMatrix cols;
};

inline Tensor conv2d_forward(const Tensor& x, std::span<const double> weights, std::span<const double> bias,
                             std::size_t k, ConvCache* cache = nullptr) {
  if (k == 0 || x.h < k || x.w < k) throw error(errc::shape_error, "conv kernel larger than input");
  const std::size_t in = x.c, out = bias.size(), kk = k * k * in;
  if (weights.size() != kk * out) throw error(errc::shape_error, "conv weight size");
  const std::size_t ho = x.h - k + 1, wo = x.w - k + 1;

  RowMatrix cols(x.n * ho * wo, kk);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        double* row = cols.data() + ((i * ho + y) * wo + xx) * kk;
        for (std::size_t r = 0; r < k; ++r) {
          const double* src = &x.data[((i * x.h + y + r) * x.w + xx) * in];
          std::copy(src, src + k * in, row + r * k * in);
        }
      }

  Tensor y(x.n, ho, wo, out);
  MatrixMap ym(y.data.data(), static_cast<Eigen::Index>(cols.rows()), static_cast<Eigen::Index>(out));
  const ConstMatrixMap wm(weights.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(out));
  ym.noalias() = cols * wm;
  ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), static_cast<Eigen::Index>(out));

  if (cache) {
    cache->input_shape = Tensor();
    cache->input_shape.n = x.n, cache->input_shape.h = x.h, cache->input_shape.w = x.w, cache->input_shape.c = x.c;
    cache->cols = std::move(cols);
  }
  return y;
}

/// Returns dL/dx; accumulates nothing, writes dW and db.
inline Tensor conv2d_backward(const Tensor& dy, const ConvCache& cache, std::span<const double> weights,
                              std::size_t k, std::span<double> dweights, std::span<double> dbias) {
  const Tensor& s = cache.input_shape;
  const std::size_t in = s.c, out = dy.c, kk = k * k * in;
  const ConstMatrixMap dym(dy.data.data(), static_cast<Eigen::Index>(dy.n * dy.h * dy.w), static_cast<Eigen::Index>(out));
  const ConstMatrixMap wm(weights.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(out));
  MatrixMap(dweights.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(out)).noalias() =
      cache.cols.transpose() * dym;
  Eigen::Map<Eigen::RowVectorXd>(dbias.data(), static_cast<Eigen::Index>(out)) = dym.colwise().sum();

  const RowMatrix dcols = dym * wm.transpose();
  Tensor dx(s.n, s.h, s.w, s.c);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t y = 0; y < dy.h; ++y)
      for (std::size_t xx = 0; xx < dy.w; ++xx) {
        const double* row = dcols.data() + ((i * dy.h + y) * dy.w + xx) * kk;
        for (std::size_t r = 0; r < k; ++r) {
          double* dst = &dx.data[((i * s.h + y + r) * s.w + xx) * in];
          for (std::size_t j = 0; j < k * in; ++j) dst[j] += row[r * k * in + j];
        }
      }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

enum class Activation { relu, gelu };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu" || s == "ReLU") return Activation::relu;
  if (s == "gelu" || s == "GELU") return Activation::gelu;
  throw error(errc::config_error, "unknown activation: " + s);
}

/// Exact GELU, x * Phi(x).
inline double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2)); }

inline double gelu_grad(double x) noexcept {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi);
  return 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2)) + x * pdf;
}

inline Tensor activation_forward(const Tensor& z, Activation a) {
  Tensor out = z;
  for (auto& v : out.data) v = a == Activation::relu ? std::max(v, 0.0) : gelu(v);
  return out;
}

/// dz from da and the pre-activation z. ReLU'(0) = 0.
inline Tensor activation_backward(const Tensor& da, const Tensor& z, Activation a) {
  Tensor dz = da;
  for (std::size_t i = 0; i < dz.size(); ++i)
    dz.data[i] *= a == Activation::relu ? (z.data[i] > 0 ? 1.0 : 0.0) : gelu_grad(z.data[i]);
  return dz;
}

// ---------------------------------------------------------------------------
// BatchNorm over N, H, W per channel.

inline constexpr double bn_epsilon = 1e-3;
inline constexpr double bn_momentum = 0.9;

struct BatchNormCache {
  Tensor xhat;
  std::vector<double> inv_std;
  std::vector<double> mean;
  std::vector<double> var;
};

/// Train mode: normalizes with biased batch statistics, kept in the cache.
inline Tensor batchnorm_forward_train(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                                      BatchNormCache* cache = nullptr) {
  const std::size_t c = x.c, m = x.n * x.h * x.w;
  if (gamma.size() != c || beta.size() != c) throw error(errc::shape_error, "batchnorm parameter size");
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t ch = 0; ch < c; ++ch) mean[ch] += x.data[r * c + ch];
  for (auto& v : mean) v /= double(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = x.data[r * c + ch] - mean[ch];
      var[ch] += d * d;
    }
  for (auto& v : var) v /= double(m);

  BatchNormCache local;
  BatchNormCache& bc = cache ? *cache : local;
  bc.inv_std.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) bc.inv_std[ch] = 1.0 / std::sqrt(var[ch] + bn_epsilon);
  bc.xhat = x;
  Tensor y = x;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double xh = (x.data[r * c + ch] - mean[ch]) * bc.inv_std[ch];
      bc.xhat.data[r * c + ch] = xh;
      y.data[r * c + ch] = gamma[ch] * xh + beta[ch];
    }
  bc.mean = std::move(mean);
  bc.var = std::move(var);
  return y;
}

/// running = momentum * running + (1 - momentum) * batch.
inline void batchnorm_update_running(const BatchNormCache& cache, std::span<double> running_mean,
                                     std::span<double> running_var) {
  for (std::size_t ch = 0; ch < running_mean.size(); ++ch) {
    running_mean[ch] = bn_momentum * running_mean[ch] + (1 - bn_momentum) * cache.mean[ch];
    running_var[ch] = bn_momentum * running_var[ch] + (1 - bn_momentum) * cache.var[ch];
  }
}

inline Tensor batchnorm_forward_infer(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                                      std::span<const double> running_mean, std::span<const double> running_var) {
  const std::size_t c = x.c;
  std::vector<double> scale(c), shift(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    scale[ch] = gamma[ch] / std::sqrt(running_var[ch] + bn_epsilon);
    shift[ch] = beta[ch] - scale[ch] * running_mean[ch];
  }
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = scale[i % c] * x.data[i] + shift[i % c];
  return y;
}

inline Tensor batchnorm_backward(const Tensor& dy, const BatchNormCache& cache, std::span<const double> gamma,
                                 std::span<double> dgamma, std::span<double> dbeta) {
  const std::size_t c = dy.c, m = dy.n * dy.h * dy.w;
  std::vector<double> sum_dxhat(c, 0.0), sum_dxhat_xhat(c, 0.0);
  std::fill(dgamma.begin(), dgamma.end(), 0.0);
  std::fill(dbeta.begin(), dbeta.end(), 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double g = dy.data[r * c + ch], xh = cache.xhat.data[r * c + ch];
      dgamma[ch] += g * xh;
      dbeta[ch] += g;
      sum_dxhat[ch] += g * gamma[ch];
      sum_dxhat_xhat[ch] += g * gamma[ch] * xh;
    }
  Tensor dx = dy;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double dxh = dy.data[r * c + ch] * gamma[ch], xh = cache.xhat.data[r * c + ch];
      dx.data[r * c + ch] =
          cache.inv_std[ch] / double(m) * (double(m) * dxh - sum_dxhat[ch] - xh * sum_dxhat_xhat[ch]);
    }
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool 2x2, stride 2, floor. Ties go to the first element in row-major order.

struct PoolCache {
  Tensor input_shape;
  std::vector<std::size_t> argmax;
};

inline Tensor maxpool_forward(const Tensor& x, PoolCache* cache = nullptr) {
  if (x.h < 2 || x.w < 2) throw error(errc::shape_error, "maxpool input smaller than 2x2");
  Tensor y(x.n, x.h / 2, x.w / 2, x.c);
  std::vector<std::size_t> arg(y.size());
  for (std::size_t i = 0; i < y.n; ++i)
    for (std::size_t py = 0; py < y.h; ++py)
      for (std::size_t px = 0; px < y.w; ++px)
        for (std::size_t ch = 0; ch < y.c; ++ch) {
          std::size_t best = ((i * x.h + 2 * py) * x.w + 2 * px) * x.c + ch;
          for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t s = 0; s < 2; ++s) {
              const std::size_t idx = ((i * x.h + 2 * py + r) * x.w + 2 * px + s) * x.c + ch;
              if (x.data[idx] > x.data[best]) best = idx;
            }
          const std::size_t o = ((i * y.h + py) * y.w + px) * y.c + ch;
          y.data[o] = x.data[best];
          arg[o] = best;
        }
  if (cache) {
    cache->input_shape = Tensor();
    cache->input_shape.n = x.n, cache->input_shape.h = x.h, cache->input_shape.w = x.w, cache->input_shape.c = x.c;
    cache->argmax = std::move(arg);
  }
  return y;
}

inline Tensor maxpool_backward(const Tensor& dy, const PoolCache& cache) {
  const Tensor& s = cache.input_shape;
  Tensor dx(s.n, s.h, s.w, s.c);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data[cache.argmax[o]] += dy.data[o];
  return dx;
}

// ---------------------------------------------------------------------------
// Inverted dropout: kept units are scaled by 1 / (1 - rate).

inline std::vector<double> dropout_mask(std::size_t size, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw error(errc::config_error, "dropout rate must be in [0, 1)");
  std::vector<double> mask(size, 1.0);
  if (rate == 0.0) return mask;
  rng gen(seed);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = gen.uniform() >= rate ? keep : 0.0;
  return mask;
}

inline Tensor apply_mask(const Tensor& x, std::span<const double> mask) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= mask[i];
  return y;
}

// ---------------------------------------------------------------------------
// Dense with a single output unit on flattened samples.

inline std::vector<double> dense_forward(const Tensor& x, std::span<const double> weights, double bias) {
  const std::size_t f = x.per_sample();
  if (weights.size() != f) throw error(errc::shape_error, "dense weight size");
  const ConstMatrixMap xm(x.data.data(), static_cast<Eigen::Index>(x.n), static_cast<Eigen::Index>(f));
  Eigen::VectorXd z = xm * Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(f));
  z.array() += bias;
  return {z.data(), z.data() + z.size()};
}

/// dL/dx given dL/dz per sample; writes dW and db.
inline Tensor dense_backward(std::span<const double> dz, const Tensor& x, std::span<const double> weights,
                             std::span<double> dweights, double& dbias) {
  const std::size_t f = x.per_sample();
  const ConstMatrixMap xm(x.data.data(), static_cast<Eigen::Index>(x.n), static_cast<Eigen::Index>(f));
  const Eigen::Map<const Eigen::VectorXd> dzv(dz.data(), static_cast<Eigen::Index>(dz.size()));
  Eigen::Map<Eigen::VectorXd>(dweights.data(), static_cast<Eigen::Index>(f)).noalias() = xm.transpose() * dzv;
  dbias = dzv.sum();
  Tensor dx(x.n, x.h, x.w, x.c);
  MatrixMap(dx.data.data(), static_cast<Eigen::Index>(x.n), static_cast<Eigen::Index>(f)).noalias() =
      dzv * Eigen::Map<const Eigen::RowVectorXd>(weights.data(), static_cast<Eigen::Index>(f));
  return dx;
}

// ---------------------------------------------------------------------------
// Output and loss

inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double bce_clamp = 1e-12;

/// Mean binary cross-entropy, probabilities clamped to [1e-12, 1 - 1e-12].
inline double loss_bce(std::span<const double> probs, std::span<const std::uint8_t> labels) {
  if (probs.size() != labels.size()) throw error(errc::count_mismatch, "probabilities vs labels");
  if (probs.empty()) throw error(errc::empty_input, "empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], bce_clamp, 1.0 - bce_clamp);
    total -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  return total / double(probs.size());
}

}  // namespace daqcnn::nn
