#pragma once

// Dense state-vector simulation of the digital-analog kernel circuit.
//
// Conventions: hbar = 1, dimensionless time. Basis index b has bit i equal to
// the state of qubit i; qubit i is the row-major cell (i / n, i % n) of the patch.
// The analog Hamiltonian is
//   H(t) = Omega(t)/2 * sum_j X_j - delta(t) * sum_j eta_j + sum_<ij> J_ij eta_i eta_j
// with eta = (1 - Z) / 2, i.e. eta|1> = |1>.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "daqcnn/error.hpp"
#include "daqcnn/graph.hpp"

namespace daqcnn::sim {

using complex = std::complex<double>;

inline constexpr std::size_t max_qubits = 12;
inline constexpr std::size_t max_dense_qubits = 10;

class Statevector {
 public:
  Statevector() = default;

  /// |0...0> on n qubits.
  explicit Statevector(std::size_t n_qubits) : n_qubits_(check_size(n_qubits)), amps_(dim_of(n_qubits)) {
    amps_[0] = 1.0;
  }

  Statevector(std::size_t n_qubits, std::vector<complex> amps)
      : n_qubits_(check_size(n_qubits)), amps_(std::move(amps)) {
    if (amps_.size() != dim_of(n_qubits_)) throw error(errc::size_error, "amplitude count must be 2^n");
  }

  std::size_t n_qubits() const noexcept { return n_qubits_; }
  std::size_t dim() const noexcept { return amps_.size(); }

  std::span<const complex> amps() const noexcept { return amps_; }
  std::span<complex> amps() noexcept { return amps_; }
  const complex& operator[](std::size_t b) const { return amps_[b]; }
  complex& operator[](std::size_t b) { return amps_[b]; }

  double norm_squared() const noexcept {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return s;
  }

 private:
  static std::size_t dim_of(std::size_t n) { return std::size_t{1} << n; }
  static std::size_t check_size(std::size_t n) {
    if (n < 1 || n > max_qubits) throw error(errc::size_error, "qubit count must be in 1..12");
    return n;
  }

  std::size_t n_qubits_ = 0;
  std::vector<complex> amps_;
};

/// |<a|b>|^2.
inline double fidelity(const Statevector& a, const Statevector& b) {
  if (a.dim() != b.dim()) throw error(errc::shape_mismatch, "states differ in size");
  complex overlap = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) overlap += std::conj(a[i]) * b[i];
  return std::norm(overlap);
}

/// Euclidean distance between amplitude vectors (phase-sensitive).
inline double distance(const Statevector& a, const Statevector& b) {
  if (a.dim() != b.dim()) throw error(errc::shape_mismatch, "states differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::norm(a[i] - b[i]);
  return std::sqrt(s);
}

/// Rabi amplitude Omega(t) and detuning delta(t).
class Schedule {
 public:
  enum class Kind { linear, piecewise };
  using Breakpoints = std::vector<std::pair<double, double>>;  // (t, value), sorted by t

  /// Omega(t) = delta(t) = t.
  static Schedule linear() { return Schedule(); }

  /// Piecewise-linear through the breakpoints, held constant outside them.
  static Schedule piecewise(Breakpoints omega, Breakpoints delta) {
    Schedule s;
    s.kind_ = Kind::piecewise;
    s.omega_ = validated(std::move(omega));
    s.delta_ = validated(std::move(delta));
    return s;
  }

  static Schedule constant(double omega, double delta) { return piecewise({{0.0, omega}}, {{0.0, delta}}); }

  Kind kind() const noexcept { return kind_; }
  const Breakpoints& omega_points() const noexcept { return omega_; }
  const Breakpoints& delta_points() const noexcept { return delta_; }

  double omega(double t) const { return kind_ == Kind::linear ? t : interpolate(omega_, t); }
  double delta(double t) const { return kind_ == Kind::linear ? t : interpolate(delta_, t); }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  static Breakpoints validated(Breakpoints pts) {
    if (pts.empty()) throw error(errc::config_error, "schedule needs at least one breakpoint");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!std::isfinite(pts[i].first) || !std::isfinite(pts[i].second))
        throw error(errc::non_finite, "schedule breakpoint is not finite");
      if (i > 0 && !(pts[i].first > pts[i - 1].first))
        throw error(errc::config_error, "schedule breakpoints must have increasing times");
    }
    return pts;
  }

  static double interpolate(const Breakpoints& pts, double t) {
    if (t <= pts.front().first) return pts.front().second;
    if (t >= pts.back().first) return pts.back().second;
    const auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                                     [](double v, const auto& p) { return v < p.first; });
    const auto lo = hi - 1;
    const double w = (t - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
  }

  Kind kind_ = Kind::linear;
  Breakpoints omega_;
  Breakpoints delta_;
};

/// Graph plus coupling strengths: everything needed for the diagonal part of H.
struct Interaction {
  Graph graph;
  CouplingMatrix couplings;
};

/// Per-basis-state energy of the diagonal Hamiltonian part.
struct DiagonalEnergies {
  std::vector<double> values;
};

/// Product state of per-qubit H * Ry(phi) |0>.
inline Statevector init_encoded_state(std::span<const double> phis) {
  if (phis.empty() || phis.size() > max_qubits) throw error(errc::size_error, "need 1..12 angles");
  for (double phi : phis)
    if (!(phi >= 0.0 && phi <= std::numbers::pi))
      throw error(errc::angle_out_of_range, "angle " + std::to_string(phi) + " outside [0, pi]");

  const std::size_t n = phis.size();
  std::vector<complex> amps(std::size_t{1} << n, complex{1.0, 0.0});
  for (std::size_t q = 0; q < n; ++q) {
    const double c = std::cos(phis[q] / 2), s = std::sin(phis[q] / 2);
    const double a0 = (c + s) / std::numbers::sqrt2;
    const double a1 = (s - c) / std::numbers::sqrt2;
    for (std::size_t b = 0; b < amps.size(); ++b) amps[b] *= ((b >> q) & 1U) ? a1 : a0;
  }
  return Statevector(n, std::move(amps));
}

enum class Axis { x, y };

/// Applies a 2x2 unitary [[u00, u01], [u10, u11]] to qubit q.
inline void apply_single_qubit(Statevector& state, std::size_t q, complex u00, complex u01, complex u10,
                               complex u11) {
  const std::size_t stride = std::size_t{1} << q;
  auto amps = state.amps();
  for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
    for (std::size_t off = base; off < base + stride; ++off) {
      const complex a0 = amps[off];
      const complex a1 = amps[off + stride];
      amps[off] = u00 * a0 + u01 * a1;
      amps[off + stride] = u10 * a0 + u11 * a1;
    }
  }
}

/// exp(-i theta/2 sigma^axis) on every qubit.
inline Statevector apply_global_rotation(Statevector state, Axis axis, double theta) {
  if (!std::isfinite(theta)) throw error(errc::non_finite, "rotation angle is not finite");
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  for (std::size_t q = 0; q < state.n_qubits(); ++q) {
    if (axis == Axis::x)
      apply_single_qubit(state, q, c, complex{0, -s}, complex{0, -s}, c);
    else
      apply_single_qubit(state, q, c, -s, s, c);
  }
  return state;
}

inline void check_couplings(const Graph& graph, const CouplingMatrix& J) {
  const std::size_t n = graph.num_qubits();
  if (J.size() != n) throw error(errc::shape_mismatch, "coupling matrix dimension differs from qubit count");
  for (std::size_t i = 0; i < n; ++i) {
    if (J(i, i) != 0.0) throw error(errc::invalid_edge, "nonzero self-coupling");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (J(i, j) != J(j, i)) throw error(errc::shape_mismatch, "coupling matrix is not symmetric");
      if (J(i, j) != 0.0 && !graph.has_edge(i, j)) throw error(errc::invalid_edge, "coupling on a non-edge");
    }
  }
}

/// E(b) = sum_edges J_ij b_i b_j - delta * sum_i b_i.
inline DiagonalEnergies build_diagonal(const Graph& graph, const CouplingMatrix& J, double delta) {
  check_couplings(graph, J);
  const std::size_t dim = std::size_t{1} << graph.num_qubits();
  DiagonalEnergies e{std::vector<double>(dim, 0.0)};
  for (std::size_t b = 0; b < dim; ++b) {
    double energy = 0.0;
    for (const auto& edge : graph.edges())
      if (((b >> edge.first) & 1U) && ((b >> edge.second) & 1U)) energy += J(edge.first, edge.second);
    energy -= delta * static_cast<double>(std::popcount(b));
    e.values[b] = energy;
  }
  return e;
}

/// Multiplies amplitude b by exp(-i dt E(b)).
inline void apply_diagonal_phase(Statevector& state, const DiagonalEnergies& energies, double dt) {
  if (energies.values.size() != state.dim()) throw error(errc::shape_mismatch, "energy table size");
  auto amps = state.amps();
  for (std::size_t b = 0; b < amps.size(); ++b) amps[b] *= std::polar(1.0, -dt * energies.values[b]);
}

/// First-order trotterization of the time-ordered analog propagator. Each step
/// samples Omega and delta at its midpoint, applies the global X rotation, then
/// the diagonal phase.
inline Statevector trotter_evolve(Statevector state, const Schedule& schedule, double tau, int steps,
                                  const Interaction& interaction) {
  if (steps < 1) throw error(errc::invalid_steps, "steps must be >= 1");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw error(errc::config_error, "tau must be finite and >= 0");
  if (interaction.graph.num_qubits() != state.n_qubits())
    throw error(errc::shape_mismatch, "graph and state qubit counts differ");
  if (tau == 0.0) return state;

  // delta-independent part, reused every step: E(b) = zz(b) - delta * popcount(b).
  const DiagonalEnergies zz = build_diagonal(interaction.graph, interaction.couplings, 0.0);
  DiagonalEnergies energies{std::vector<double>(zz.values.size())};

  const double dt = tau / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) * dt;
    state = apply_global_rotation(std::move(state), Axis::x, dt * schedule.omega(t));
    const double delta = schedule.delta(t);
    for (std::size_t b = 0; b < zz.values.size(); ++b)
      energies.values[b] = zz.values[b] - delta * static_cast<double>(std::popcount(b));
    apply_diagonal_phase(state, energies, dt);
  }
  return state;
}

namespace detail {

// Operator acting as `site_ops[q]` on qubit q (identity where absent), assembled
// by Kronecker products with qubit n-1 as the most significant factor.
inline Eigen::MatrixXd embed(std::size_t n, const std::vector<std::pair<std::size_t, Eigen::Matrix2d>>& site_ops) {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(1, 1);
  for (std::size_t q = n; q-- > 0;) {
    Eigen::Matrix2d factor = Eigen::Matrix2d::Identity();
    for (const auto& [site, op] : site_ops)
      if (site == q) factor = op;
    Eigen::MatrixXd next = Eigen::kroneckerProduct(result, factor);
    result = std::move(next);
  }
  return result;
}

}  // namespace detail

/// Validation oracle: the dense Hamiltonian is assembled from Kronecker products
/// at each substep midpoint and exponentiated through its eigendecomposition.
/// Converges to the time-ordered propagator as substeps grow.
inline Statevector exact_evolve_oracle(const Statevector& state, const Schedule& schedule, double tau,
                                       int substeps, const Interaction& interaction) {
  const std::size_t n = state.n_qubits();
  if (n > max_dense_qubits) throw error(errc::too_many_qubits, "dense oracle supports at most 10 qubits");
  if (substeps < 1) throw error(errc::invalid_steps, "substeps must be >= 1");
  if (interaction.graph.num_qubits() != n) throw error(errc::shape_mismatch, "graph and state qubit counts differ");
  check_couplings(interaction.graph, interaction.couplings);
  if (tau == 0.0) return state;

  Eigen::Matrix2d sx, eta;
  sx << 0, 1, 1, 0;
  eta << 0, 0, 0, 1;

  const auto dim = static_cast<Eigen::Index>(state.dim());
  Eigen::MatrixXd x_sum = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd eta_sum = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd interaction_part = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t q = 0; q < n; ++q) {
    x_sum += detail::embed(n, {{q, sx}});
    eta_sum += detail::embed(n, {{q, eta}});
  }
  for (const auto& e : interaction.graph.edges())
    interaction_part += interaction.couplings(e.first, e.second) * detail::embed(n, {{e.first, eta}, {e.second, eta}});

  Eigen::VectorXcd psi(dim);
  for (Eigen::Index b = 0; b < dim; ++b) psi[b] = state[static_cast<std::size_t>(b)];

  const double dt = tau / substeps;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  for (int k = 0; k < substeps; ++k) {
    const double t = (k + 0.5) * dt;
    const Eigen::MatrixXd h = 0.5 * schedule.omega(t) * x_sum - schedule.delta(t) * eta_sum + interaction_part;
    solver.compute(h);
    const Eigen::MatrixXcd v = solver.eigenvectors().cast<complex>();
    Eigen::VectorXcd phases(dim);
    for (Eigen::Index i = 0; i < dim; ++i) phases[i] = std::polar(1.0, -dt * solver.eigenvalues()[i]);
    const Eigen::VectorXcd coeffs = v.adjoint() * psi;
    psi = v * phases.cwiseProduct(coeffs);
  }

  std::vector<complex> amps(psi.data(), psi.data() + dim);
  return Statevector(n, std::move(amps));
}

/// <Z_q> = sum_b |amp_b|^2 (1 - 2 b_q).
inline double expectation_z(const Statevector& state, std::size_t qubit) {
  if (qubit >= state.n_qubits()) throw error(errc::index_out_of_range, "qubit index out of range");
  double value = 0.0;
  for (std::size_t b = 0; b < state.dim(); ++b) {
    const double p = std::norm(state[b]);
    value += ((b >> qubit) & 1U) ? -p : p;
  }
  return std::clamp(value, -1.0, 1.0);
}

}  // namespace daqcnn::sim
