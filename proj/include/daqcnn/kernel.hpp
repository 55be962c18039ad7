#pragma once

// Digital-analog quantum kernel: angle encoding, analog block over one
// connectivity graph, global Ry(theta0), then <Z_i> on every qubit.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "daqcnn/digest.hpp"
#include "daqcnn/error.hpp"
#include "daqcnn/graph.hpp"
#include "daqcnn/simulator.hpp"
#include "json.hpp"

namespace daqcnn {

struct KernelSpec {
  std::size_t n = 2;
  std::vector<Graph> graphs;  // M = graphs.size(); M == 1 is the single-graph kernel
  sim::Schedule schedule = sim::Schedule::linear();
  double tau = 0.2;
  int steps = 4;
  double theta0 = 0.0;
  CouplingModel coupling = GeometricCoupling{1.0};

  std::size_t num_graphs() const noexcept { return graphs.size(); }
  std::size_t num_qubits() const noexcept { return n * n; }
  std::size_t num_outputs() const noexcept { return graphs.size() * n * n; }

  void validate() const {
    if (graphs.empty()) throw error(errc::config_error, "kernel needs at least one graph");
    for (const auto& g : graphs)
      if (g.side() != n) throw error(errc::shape_mismatch, "graph side differs from kernel size");
    if (steps < 1) throw error(errc::invalid_steps, "steps must be >= 1");
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw error(errc::config_error, "tau must be finite and >= 0");
    if (!std::isfinite(theta0)) throw error(errc::non_finite, "theta0 is not finite");
    const bool positive = std::visit([](const auto& m) {
      if constexpr (requires { m.c6; }) return m.c6 > 0.0;
      else return m.j > 0.0;
    }, coupling);
    if (!positive) throw error(errc::config_error, "coupling parameter must be positive");
  }

  /// Kernel using graph `m` only.
  KernelSpec single(std::size_t m) const {
    KernelSpec s = *this;
    s.graphs = {graphs.at(m)};
    return s;
  }
};

/// Spec with built-in graphs given by name and default schedule, timing and coupling.
inline KernelSpec make_kernel_spec(std::size_t n, const std::vector<std::string>& graph_names) {
  KernelSpec spec;
  spec.n = n;
  for (const auto& name : graph_names) spec.graphs.push_back(make_graph(name, n));
  spec.validate();
  return spec;
}

/// Final state of the kernel circuit on graph `m`, before readout.
inline sim::Statevector kernel_state(std::span<const double> phis, const KernelSpec& spec, std::size_t m = 0) {
  if (phis.size() != spec.num_qubits()) throw error(errc::size_error, "expected n*n angles");
  const Graph& graph = spec.graphs.at(m);
  const sim::Interaction interaction{graph, coupling_matrix(graph, spec.coupling)};
  sim::Statevector state = sim::init_encoded_state(phis);
  state = sim::trotter_evolve(std::move(state), spec.schedule, spec.tau, spec.steps, interaction);
  if (spec.theta0 != 0.0) state = sim::apply_global_rotation(std::move(state), sim::Axis::y, spec.theta0);
  return state;
}

inline std::vector<double> readout_z(const sim::Statevector& state) {
  std::vector<double> out(state.n_qubits());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sim::expectation_z(state, i);
  return out;
}

/// <Z_i> for i = 0..n*n-1 on a single-graph kernel.
inline std::vector<double> daqk_eval(std::span<const double> phis, const KernelSpec& spec) {
  spec.validate();
  if (spec.num_graphs() != 1) throw error(errc::config_error, "daqk_eval needs exactly one graph");
  return readout_z(kernel_state(phis, spec, 0));
}

/// Concatenation over graphs in spec order; output index m*n*n + i.
inline std::vector<double> multi_daqk_eval(std::span<const double> phis, const KernelSpec& spec) {
  spec.validate();
  std::vector<double> out;
  out.reserve(spec.num_outputs());
  for (std::size_t m = 0; m < spec.num_graphs(); ++m) {
    const auto part = readout_z(kernel_state(phis, spec, m));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

/// entry(i, j) ~ d<Z_i>/d phi_j.
struct SensitivityMatrix {
  std::size_t size = 0;
  std::vector<double> entries;

  double operator()(std::size_t i, std::size_t j) const { return entries.at(i * size + j); }
};

/// Central finite differences of daqk_eval at `base`.
inline SensitivityMatrix sensitivity_matrix(const KernelSpec& spec, std::span<const double> base, double h = 1e-5) {
  if (!(h > 0.0) || h >= std::numbers::pi / 4) throw error(errc::step_too_large, "h must be in (0, pi/4)");
  const std::size_t q = spec.num_qubits();
  if (base.size() != q) throw error(errc::size_error, "expected n*n base angles");
  for (double phi : base)
    if (!(phi > h && phi < std::numbers::pi - h))
      throw error(errc::angle_out_of_range, "base angles must lie in (h, pi - h)");

  SensitivityMatrix s{q, std::vector<double>(q * q)};
  std::vector<double> probe(base.begin(), base.end());
  for (std::size_t j = 0; j < q; ++j) {
    probe[j] = base[j] + h;
    const auto plus = daqk_eval(probe, spec);
    probe[j] = base[j] - h;
    const auto minus = daqk_eval(probe, spec);
    probe[j] = base[j];
    for (std::size_t i = 0; i < q; ++i) s.entries[i * q + j] = (plus[i] - minus[i]) / (2 * h);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Human-readable config form. nlohmann::json objects keep keys sorted, so
// dump() of these documents is the canonical form used for digests.

inline bool is_builtin_graph(const Graph& g) {
  if (g.name() == "custom") return false;
  try {
    const Graph ref = make_graph(g.name(), g.side());
    return ref.edges() == g.edges() && ref.positions() == g.positions();
  } catch (const error&) {
    return false;
  }
}

inline nlohmann::json graph_to_json(const Graph& g) {
  if (is_builtin_graph(g)) return g.name();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({e.first, e.second});
  nlohmann::json doc{{"name", "custom"}, {"edges", edges}};
  if (g.positions() != grid_positions(g.side())) {
    nlohmann::json pos = nlohmann::json::array();
    for (const auto& p : g.positions()) pos.push_back({p.row, p.col});
    doc["positions"] = pos;
  }
  return doc;
}

inline Graph graph_from_json(const nlohmann::json& doc, std::size_t n) {
  if (doc.is_string()) return make_graph(doc.get<std::string>(), n);
  std::vector<Edge> edges;
  for (const auto& e : doc.at("edges")) edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  if (!doc.contains("positions")) return make_custom_graph(n, std::move(edges));
  std::vector<Position> pos;
  for (const auto& p : doc.at("positions")) pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return Graph(std::move(pos), std::move(edges), "custom");
}

inline nlohmann::json schedule_to_json(const sim::Schedule& s) {
  if (s.kind() == sim::Schedule::Kind::linear) return "linear";
  return {{"omega", s.omega_points()}, {"delta", s.delta_points()}};
}

inline sim::Schedule schedule_from_json(const nlohmann::json& doc) {
  if (doc.is_string()) {
    if (doc.get<std::string>() != "linear") throw error(errc::config_error, "unknown schedule " + doc.dump());
    return sim::Schedule::linear();
  }
  using Points = sim::Schedule::Breakpoints;
  return sim::Schedule::piecewise(doc.at("omega").get<Points>(), doc.at("delta").get<Points>());
}

inline nlohmann::json kernel_to_json(const KernelSpec& spec) {
  nlohmann::json graphs = nlohmann::json::array();
  for (const auto& g : spec.graphs) graphs.push_back(graph_to_json(g));
  nlohmann::json coupling;
  if (const auto* geo = std::get_if<GeometricCoupling>(&spec.coupling))
    coupling = {{"model", "geometric"}, {"c6", geo->c6}};
  else
    coupling = {{"model", "uniform"}, {"j", std::get<UniformCoupling>(spec.coupling).j}};
  return {{"n", spec.n},           {"graphs", graphs}, {"schedule", schedule_to_json(spec.schedule)},
          {"tau", spec.tau},       {"steps", spec.steps}, {"theta0", spec.theta0},
          {"coupling", coupling}};
}

/// Missing keys take their defaults (n=2, kings, linear, tau=0.2, 4 steps, theta0=0, C6=1).
inline KernelSpec kernel_from_json(const nlohmann::json& doc) {
  try {
    KernelSpec spec;
    spec.n = doc.value("n", std::size_t{2});
    const nlohmann::json graphs = doc.value("graphs", nlohmann::json::array({"kings"}));
    for (const auto& g : graphs) spec.graphs.push_back(graph_from_json(g, spec.n));
    if (doc.contains("schedule")) spec.schedule = schedule_from_json(doc.at("schedule"));
    spec.tau = doc.value("tau", 0.2);
    spec.steps = doc.value("steps", 4);
    spec.theta0 = doc.value("theta0", 0.0);
    if (doc.contains("coupling")) {
      const auto& c = doc.at("coupling");
      const std::string model = c.value("model", std::string("geometric"));
      if (model == "geometric")
        spec.coupling = GeometricCoupling{c.value("c6", 1.0)};
      else if (model == "uniform")
        spec.coupling = UniformCoupling{c.value("j", 1.0)};
      else
        throw error(errc::config_error, "unknown coupling model " + model);
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::config_error, e.what());
  }
}

inline std::string kernel_digest(const KernelSpec& spec) { return sha256_hex(kernel_to_json(spec).dump()); }

}  // namespace daqcnn
