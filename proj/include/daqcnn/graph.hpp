#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "daqcnn/error.hpp"

namespace daqcnn {

/// Location of a qubit on the patch lattice, in units of the lattice spacing.
struct Position {
  double row = 0.0;
  double col = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

/// Unordered qubit pair stored with first < second.
struct Edge {
  std::size_t first = 0;
  std::size_t second = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Qubit connectivity over an n x n patch. Qubit i sits at row-major
/// position (i / n, i % n) for the built-in graphs.
class Graph {
 public:
  Graph() = default;

  /// Validates and canonicalises the edge list (pairs ordered, list sorted).
  /// The qubit count is positions.size(); side() is its square root for square
  /// patches and 0 otherwise.
  Graph(std::vector<Position> positions, std::vector<Edge> edges, std::string name = "custom")
      : positions_(std::move(positions)), edges_(std::move(edges)), name_(std::move(name)) {
    const std::size_t q = positions_.size();
    if (q == 0 || q > 12) throw error(errc::size_error, "graph must have 1..12 qubits");
    while ((side_ + 1) * (side_ + 1) <= q) ++side_;
    if (side_ * side_ != q) side_ = 0;
    for (auto& e : edges_) {
      if (e.first == e.second) throw error(errc::invalid_edge, "self-loop on qubit " + std::to_string(e.first));
      if (e.first >= q || e.second >= q)
        throw error(errc::invalid_edge, "edge references qubit outside the patch");
      if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
      throw error(errc::invalid_edge, "duplicate edge");
  }

  std::size_t side() const noexcept { return side_; }
  std::size_t num_qubits() const noexcept { return positions_.size(); }
  const std::vector<Position>& positions() const noexcept { return positions_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::string& name() const noexcept { return name_; }

  bool has_edge(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{a, b});
  }

  double squared_distance(std::size_t a, std::size_t b) const {
    const double dr = positions_[a].row - positions_[b].row;
    const double dc = positions_[a].col - positions_[b].col;
    return dr * dr + dc * dc;
  }

 private:
  std::size_t side_ = 0;
  std::vector<Position> positions_;
  std::vector<Edge> edges_;
  std::string name_;
};

inline std::vector<Position> grid_positions(std::size_t side) {
  std::vector<Position> pos;
  pos.reserve(side * side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c) pos.push_back({double(r), double(c)});
  return pos;
}

inline Graph make_custom_graph(std::size_t side, std::vector<Edge> edges) {
  if (side == 0 || side * side > 12) throw error(errc::size_error, "patch side must satisfy 1 <= n*n <= 12");
  return Graph(grid_positions(side), std::move(edges), "custom");
}

/// Built-in topologies:
///   kings - all cell pairs at Chebyshev distance 1
///   grid4 - horizontal and vertical neighbours
///   diag  - diagonal neighbours only
///   ring  - cycle around the patch boundary
///   empty - no edges (unentangled reference)
inline Graph make_graph(std::string_view name, std::size_t side) {
  if (name != "kings" && name != "grid4" && name != "diag" && name != "ring" && name != "empty")
    throw error(errc::unknown_graph_name, std::string(name));
  if (side != 2 && side != 3) throw error(errc::size_error, "built-in graphs need n in {2, 3}");

  const auto idx = [side](std::size_t r, std::size_t c) { return r * side + c; };
  std::vector<Edge> edges;
  if (name == "ring") {
    std::vector<std::size_t> cycle;
    for (std::size_t c = 0; c < side; ++c) cycle.push_back(idx(0, c));
    for (std::size_t r = 1; r < side; ++r) cycle.push_back(idx(r, side - 1));
    for (std::size_t c = side - 1; c-- > 0;) cycle.push_back(idx(side - 1, c));
    for (std::size_t r = side - 1; r-- > 1;) cycle.push_back(idx(r, 0));
    for (std::size_t k = 0; k < cycle.size(); ++k) edges.push_back({cycle[k], cycle[(k + 1) % cycle.size()]});
  } else if (name != "empty") {
    const bool straight = name == "kings" || name == "grid4";
    const bool diagonal = name == "kings" || name == "diag";
    const std::size_t q = side * side;
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = a + 1; b < q; ++b) {
        const auto dr = std::abs(long(a / side) - long(b / side));
        const auto dc = std::abs(long(a % side) - long(b % side));
        if (std::max(dr, dc) != 1) continue;
        const bool is_diag = dr == 1 && dc == 1;
        if ((is_diag && diagonal) || (!is_diag && straight)) edges.push_back({a, b});
      }
    }
  }
  return Graph(grid_positions(side), std::move(edges), std::string(name));
}

/// Dense symmetric n_qubits x n_qubits coupling matrix.
class CouplingMatrix {
 public:
  CouplingMatrix() = default;
  explicit CouplingMatrix(std::size_t n) : n_(n), values_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }

  void set(std::size_t i, std::size_t j, double v) {
    values_[i * n_ + j] = v;
    values_[j * n_ + i] = v;
  }

  friend bool operator==(const CouplingMatrix&, const CouplingMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// J_ij = C6 / r_ij^6 on edges.
struct GeometricCoupling {
  double c6 = 1.0;
};

/// J_ij = j on edges.
struct UniformCoupling {
  double j = 1.0;
};

using CouplingModel = std::variant<GeometricCoupling, UniformCoupling>;

inline CouplingMatrix coupling_matrix(const Graph& graph, const CouplingModel& model) {
  CouplingMatrix J(graph.num_qubits());
  for (const auto& e : graph.edges()) {
    double value = 0.0;
    if (const auto* geo = std::get_if<GeometricCoupling>(&model)) {
      // r^6 as (r^2)^3 keeps lattice distances exact.
      const double r2 = graph.squared_distance(e.first, e.second);
      if (!(r2 > 0.0)) throw error(errc::invalid_edge, "coincident qubit positions on an edge");
      value = geo->c6 / (r2 * r2 * r2);
    } else {
      value = std::get<UniformCoupling>(model).j;
    }
    J.set(e.first, e.second, value);
  }
  return J;
}

}  // namespace daqcnn
