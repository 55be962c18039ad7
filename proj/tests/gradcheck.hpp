// Per-layer finite-difference gradient checks shared by the unit tests and the
// acceptance run. Each returns the worst relative error over `trials` random
// instances; layer checks use L = <layer(x), r> for a random probe r.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "daqcnn/cnn.hpp"

namespace daqcnn::gradcheck {

using namespace daqcnn::nn;

inline constexpr double fd_step = 1e-5;
inline constexpr double tolerance = 1e-6;
// Central differences at h = 1e-5 resolve about 1e-11 absolute, so relative
// error is measured against max(|a|, |n|, 1e-5).
inline constexpr double floor = 1e-5;

inline double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}); }

/// Max relative error between `analytic` and central differences of `loss`
/// with respect to every entry of `theta`.
inline double check(std::vector<double>& theta, std::span<const double> analytic, const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double orig = theta[j];
    theta[j] = orig + fd_step;
    const double lp = loss();
    theta[j] = orig - fd_step;
    const double lm = loss();
    theta[j] = orig;
    worst = std::max(worst, rel_error(analytic[j], (lp - lm) / (2 * fd_step)));
  }
  return worst;
}

inline Tensor random_tensor(rng& gen, std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
  Tensor t(n, h, w, c);
  for (auto& v : t.data) v = gen.normal();
  return t;
}

inline std::vector<double> random_vector(rng& gen, std::size_t n, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = gen.uniform(lo, hi);
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double conv2d(int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(100 + trial);
    const std::size_t k = 1 + trial % 3, in = 1 + gen.below(3), out = 1 + gen.below(4);
    Tensor x = random_tensor(gen, 2, k + 2, k + 3, in);
    auto w = random_vector(gen, k * k * in * out), b = random_vector(gen, out);
    const auto probe = random_vector(gen, 2 * 3 * 4 * out);
    auto loss = [&] { return dot(conv2d_forward(x, w, b, k).data, probe); };
    ConvCache cache;
    Tensor dy = conv2d_forward(x, w, b, k, &cache);
    dy.data = probe;
    std::vector<double> dw(w.size()), db(b.size());
    const Tensor dx = conv2d_backward(dy, cache, w, k, dw, db);
    worst = std::max({worst, check(w, dw, loss), check(b, db, loss), check(x.data, dx.data, loss)});
  }
  return worst;
}

inline double activation(Activation act, int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(200 + trial);
    Tensor z = random_tensor(gen, 3, 4, 4, 2);
    for (auto& v : z.data)
      if (std::abs(v) < 1e-3) v = 0.5;  // keep away from the ReLU kink
    const auto probe = random_vector(gen, z.size());
    auto loss = [&] { return dot(activation_forward(z, act).data, probe); };
    Tensor da = z;
    da.data = probe;
    const Tensor dz = activation_backward(da, z, act);
    worst = std::max(worst, check(z.data, dz.data, loss));
  }
  return worst;
}

inline double batchnorm(int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(300 + trial);
    const std::size_t c = 1 + gen.below(4);
    Tensor x = random_tensor(gen, 2 + gen.below(3), 3, 2, c);
    auto gamma = random_vector(gen, c, 0.5, 1.5), beta = random_vector(gen, c);
    const auto probe = random_vector(gen, x.size());
    auto loss = [&] { return dot(batchnorm_forward_train(x, gamma, beta).data, probe); };
    BatchNormCache cache;
    Tensor dy = batchnorm_forward_train(x, gamma, beta, &cache);
    dy.data = probe;
    std::vector<double> dg(c), dbeta(c);
    const Tensor dx = batchnorm_backward(dy, cache, gamma, dg, dbeta);
    worst = std::max({worst, check(x.data, dx.data, loss), check(gamma, dg, loss), check(beta, dbeta, loss)});
  }
  return worst;
}

inline double maxpool(int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(400 + trial);
    Tensor x = random_tensor(gen, 2, 4 + trial % 2, 5, 3);  // odd sizes exercise the floor
    const auto probe = random_vector(gen, 2 * 2 * 2 * 3);
    auto loss = [&] { return dot(maxpool_forward(x).data, probe); };
    PoolCache cache;
    Tensor dy = maxpool_forward(x, &cache);
    dy.data = probe;
    const Tensor dx = maxpool_backward(dy, cache);
    worst = std::max(worst, check(x.data, dx.data, loss));
  }
  return worst;
}

inline double dropout(int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(500 + trial);
    Tensor x = random_tensor(gen, 2, 3, 3, 2);
    const auto mask = dropout_mask(x.size(), 0.55, gen());
    const auto probe = random_vector(gen, x.size());
    auto loss = [&] { return dot(apply_mask(x, mask).data, probe); };
    Tensor dy = x;
    dy.data = probe;
    const Tensor dx = apply_mask(dy, mask);
    worst = std::max(worst, check(x.data, dx.data, loss));
  }
  return worst;
}

inline double dense(int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(600 + trial);
    Tensor x = random_tensor(gen, 4, 2, 3, 2);
    auto w = random_vector(gen, x.per_sample());
    std::vector<double> b = {gen.uniform(-1, 1)};
    const auto probe = random_vector(gen, 4);
    auto loss = [&] { return dot(dense_forward(x, w, b[0]), probe); };
    std::vector<double> dw(w.size()), db(1);
    const Tensor dx = dense_backward(probe, x, w, dw, db[0]);
    worst = std::max({worst, check(w, dw, loss), check(b, db, loss), check(x.data, dx.data, loss)});
  }
  return worst;
}

inline double sigmoid_bce(int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(700 + trial);
    auto z = random_vector(gen, 5, -4, 4);
    std::vector<std::uint8_t> y(5);
    for (auto& v : y) v = std::uint8_t(gen.below(2));
    auto loss = [&] {
      std::vector<double> p(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) p[i] = sigmoid(z[i]);
      return loss_bce(p, y);
    };
    std::vector<double> dz(5);
    for (std::size_t i = 0; i < 5; ++i) dz[i] = (sigmoid(z[i]) - y[i]) / 5.0;
    worst = std::max(worst, check(z, dz, loss));
  }
  return worst;
}

/// Full network in train mode with fixed dropout masks, every parameter tensor.
inline double network(Activation act, int trials) {
  double worst = 0;
  for (int trial = 0; trial < trials; ++trial) {
    rng gen(800 + trial);
    ModelParams m = init_params({3, 2, act, 0.3}, {6, 6, 2}, gen());
    m.p[conv1_b] = random_vector(gen, 3, -0.5, 0.5);
    m.p[bn_gamma] = random_vector(gen, 3, 0.5, 1.5);
    m.p[bn_beta] = random_vector(gen, 3, -0.5, 0.5);
    m.p[conv2_b] = random_vector(gen, 3, -0.5, 0.5);
    const Tensor x = random_tensor(gen, 4, 6, 6, 2);
    const std::vector<std::uint8_t> y = {0, 1, 1, 0};
    const std::uint64_t seed = gen();
    const auto grads = backward(m, forward(m, x, Mode::train, seed).cache, y);
    auto loss = [&] { return loss_bce(forward(m, x, Mode::train, seed).probs, y); };
    for (std::size_t t = 0; t < num_tensors; ++t) worst = std::max(worst, check(m.p[t], grads[t], loss));
  }
  return worst;
}

/// Every check, in layer order.
inline std::vector<std::pair<std::string, double>> all(int trials) {
  return {{"conv2d", conv2d(trials)},
          {"relu", activation(Activation::relu, trials)},
          {"gelu", activation(Activation::gelu, trials)},
          {"batchnorm", batchnorm(trials)},
          {"maxpool", maxpool(trials)},
          {"dropout", dropout(trials)},
          {"dense", dense(trials)},
          {"sigmoid_bce", sigmoid_bce(trials)},
          {"network_relu", network(Activation::relu, trials)},
          {"network_gelu", network(Activation::gelu, trials)}};
}

}  // namespace daqcnn::gradcheck
