#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "daqcnn/kernel.hpp"
#include "daqcnn/rng.hpp"

namespace {

using namespace daqcnn;
constexpr double pi = std::numbers::pi;

template <typename Fn>
void expect_error(errc code, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

// Brute-force reference: pairs of cells at Chebyshev distance 1.
std::size_t chebyshev_pairs(std::size_t side, bool straight, bool diagonal) {
  std::size_t count = 0;
  for (std::size_t a = 0; a < side * side; ++a)
    for (std::size_t b = a + 1; b < side * side; ++b) {
      const long dr = std::abs(long(a / side) - long(b / side)), dc = std::abs(long(a % side) - long(b % side));
      if (std::max(dr, dc) != 1) continue;
      if ((dr == 1 && dc == 1) ? diagonal : straight) ++count;
    }
  return count;
}

TEST(MakeGraph, EdgeCounts) {
  EXPECT_EQ(make_graph("kings", 2).edges().size(), 6u);
  EXPECT_EQ(make_graph("kings", 3).edges().size(), chebyshev_pairs(3, true, true));
  EXPECT_EQ(make_graph("kings", 3).edges().size(), 20u);
  EXPECT_EQ(make_graph("grid4", 3).edges().size(), chebyshev_pairs(3, true, false));
  EXPECT_EQ(make_graph("grid4", 3).edges().size(), 12u);
  EXPECT_EQ(make_graph("diag", 3).edges().size(), chebyshev_pairs(3, false, true));
  EXPECT_EQ(make_graph("ring", 3).edges().size(), 8u);
  EXPECT_EQ(make_graph("ring", 2).edges().size(), 4u);
  EXPECT_EQ(make_graph("empty", 3).edges().size(), 0u);
}

TEST(MakeGraph, RingIsBoundaryCycle) {
  const auto ring = make_graph("ring", 3);
  EXPECT_FALSE(ring.has_edge(4, 1));  // centre is not on the boundary
  std::vector<int> degree(9, 0);
  for (const auto& e : ring.edges()) {
    ++degree[e.first];
    ++degree[e.second];
  }
  for (std::size_t q = 0; q < 9; ++q) EXPECT_EQ(degree[q], q == 4 ? 0 : 2);
}

TEST(MakeGraph, BuiltinsAreSubgraphsOfKings) {
  for (std::size_t side : {2u, 3u}) {
    const auto kings = make_graph("kings", side);
    for (const char* name : {"grid4", "diag", "ring"}) {
      const auto sub = make_graph(name, side);
      for (const auto& e : sub.edges()) EXPECT_TRUE(kings.has_edge(e.first, e.second)) << name;
    }
  }
}

TEST(MakeGraph, PositionsAreIntegerGrid) {
  const auto g = make_graph("kings", 3);
  for (std::size_t q = 0; q < 9; ++q) {
    EXPECT_EQ(g.positions()[q].row, double(q / 3));
    EXPECT_EQ(g.positions()[q].col, double(q % 3));
  }
}

TEST(MakeGraph, Errors) {
  expect_error(errc::unknown_graph_name, [] { make_graph("hexagonal", 2); });
  expect_error(errc::size_error, [] { make_graph("kings", 4); });
  expect_error(errc::invalid_edge, [] { make_custom_graph(2, {{0, 0}}); });
  expect_error(errc::invalid_edge, [] { make_custom_graph(2, {{0, 4}}); });
  expect_error(errc::invalid_edge, [] { make_custom_graph(2, {{0, 1}, {1, 0}}); });
}

TEST(MakeGraph, CustomEdgesAreCanonicalised) {
  const auto g = make_custom_graph(2, {{3, 1}, {2, 0}});
  ASSERT_EQ(g.edges().size(), 2u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 2}));
  EXPECT_EQ(g.edges()[1], (Edge{1, 3}));
}

TEST(CouplingMatrix, GeometricKings2) {
  const auto g = make_graph("kings", 2);
  const auto J = coupling_matrix(g, GeometricCoupling{1.0});
  EXPECT_EQ(J(0, 1), 1.0);
  EXPECT_EQ(J(0, 2), 1.0);
  EXPECT_EQ(J(0, 3), 0.125);
  EXPECT_EQ(J(1, 2), 0.125);
  EXPECT_EQ(J(3, 3), 0.0);
}

TEST(CouplingMatrix, UniformIsAdjacency) {
  const auto g = make_graph("ring", 3);
  const auto J = coupling_matrix(g, UniformCoupling{1.0});
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(J(i, j), g.has_edge(i, j) ? 1.0 : 0.0);
}

TEST(CouplingMatrix, GeometricScalesWithC6) {
  const auto g = make_graph("kings", 3);
  const auto J = coupling_matrix(g, GeometricCoupling{2.0});
  EXPECT_EQ(J(0, 1), 2.0);
  EXPECT_EQ(J(0, 4), 0.25);
  EXPECT_EQ(J(0, 2), 0.0);  // distance 2, not an edge
}

TEST(DaqkEval, ZeroTimeIsSine) {
  auto spec = make_kernel_spec(2, {"kings"});
  spec.tau = 0.0;
  const std::vector<double> half(4, pi / 2);
  for (double v : daqk_eval(half, spec)) EXPECT_NEAR(v, 1.0, 1e-12);
  const std::vector<double> grid = {0.0, pi / 6, pi / 2, pi};
  const auto out = daqk_eval(grid, spec);
  const double expected[] = {0.0, 0.5, 1.0, 0.0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], expected[i], 1e-12);
}

TEST(DaqkEval, MatchesDenseOracleAtDefaultParameters) {
  const auto spec = make_kernel_spec(2, {"kings"});
  const std::vector<double> half(4, pi / 2);
  const auto& g = spec.graphs[0];
  const sim::Interaction interaction{g, coupling_matrix(g, spec.coupling)};
  const auto oracle_state =
      sim::exact_evolve_oracle(sim::init_encoded_state(half), spec.schedule, spec.tau, 64, interaction);
  const auto reference = readout_z(oracle_state);
  // Patch symmetry makes all four oracle outputs equal.
  for (double v : reference) EXPECT_NEAR(v, reference[0], 1e-13);
  // Independent SciPy run of the same oracle: 0.9998000133437.
  EXPECT_NEAR(reference[0], 0.9998000133437, 1e-12);
  const auto out = daqk_eval(half, spec);
  for (double v : out) EXPECT_NEAR(v, reference[0], 1e-3);
}

TEST(DaqkEval, RequiresSingleGraph) {
  const auto spec = make_kernel_spec(2, {"kings", "grid4"});
  const std::vector<double> half(4, pi / 2);
  expect_error(errc::config_error, [&] { daqk_eval(half, spec); });
  expect_error(errc::size_error, [&] { daqk_eval(std::vector<double>(9, 0.1), spec.single(0)); });
  expect_error(errc::angle_out_of_range, [&] { daqk_eval(std::vector<double>(4, 4.0), spec.single(0)); });
}

TEST(DaqkEval, OutputsInRangeAndDeterministic) {
  const auto spec = make_kernel_spec(3, {"kings"});
  rng gen(99);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> phis(9);
    for (auto& p : phis) p = gen.uniform(0, pi);
    const auto a = daqk_eval(phis, spec);
    const auto b = daqk_eval(phis, spec);
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_GE(a[i], -1.0);
      EXPECT_LE(a[i], 1.0);
      EXPECT_EQ(a[i], b[i]);
    }
  }
}

TEST(DaqkEval, Theta0RotatesReadout) {
  // With no evolution, Ry(theta0) on the encoded qubit gives <Z> = cos(theta0) sin(phi) - sin(theta0) * <X>.
  auto spec = make_kernel_spec(2, {"kings"});
  spec.tau = 0.0;
  spec.theta0 = 0.3;
  const std::vector<double> phis = {0.2, 1.0, 2.0, 3.0};
  const auto out = daqk_eval(phis, spec);
  for (std::size_t i = 0; i < 4; ++i) {
    const double c = std::cos(phis[i] / 2), s = std::sin(phis[i] / 2);
    const double a0 = (c + s) / std::sqrt(2.0), a1 = (s - c) / std::sqrt(2.0);
    const double z = a0 * a0 - a1 * a1, x = 2 * a0 * a1;
    EXPECT_NEAR(out[i], std::cos(0.3) * z - std::sin(0.3) * x, 1e-12);
  }
}

TEST(DaqkEval, RelabelingEquivariance) {
  rng gen(2024);
  for (int trial = 0; trial < 10; ++trial) {
    std::array<std::size_t, 9> perm{};
    for (std::size_t i = 0; i < 9; ++i) perm[i] = i;
    daqcnn::shuffle(perm, gen);

    // New label perm[i] carries old qubit i.
    const auto base = make_graph(trial % 2 ? "kings" : "ring", 3);
    std::vector<Position> pos(9);
    for (std::size_t i = 0; i < 9; ++i) pos[perm[i]] = base.positions()[i];
    std::vector<Edge> edges;
    for (const auto& e : base.edges()) edges.push_back({perm[e.first], perm[e.second]});
    KernelSpec relabeled = make_kernel_spec(3, {"kings"});
    relabeled.graphs = {Graph(pos, edges)};
    KernelSpec original = relabeled;
    original.graphs = {base};

    std::vector<double> phis(9), permuted(9);
    for (auto& p : phis) p = gen.uniform(0, pi);
    for (std::size_t i = 0; i < 9; ++i) permuted[perm[i]] = phis[i];

    const auto a = daqk_eval(phis, original);
    const auto b = daqk_eval(permuted, relabeled);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(b[perm[i]], a[i], 1e-12);
  }
}

TEST(MultiDaqkEval, ShapeAndConcatenation) {
  const auto spec = make_kernel_spec(3, {"kings", "grid4", "diag", "ring"});
  std::vector<double> phis(9, 1.0);
  const auto out = multi_daqk_eval(phis, spec);
  ASSERT_EQ(out.size(), 36u);
  for (std::size_t m = 0; m < 4; ++m) {
    const auto part = daqk_eval(phis, spec.single(m));
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(out[m * 9 + i], part[i]);
  }
}

TEST(MultiDaqkEval, SingleGraphDegenerate) {
  const auto spec = make_kernel_spec(2, {"kings"});
  const std::vector<double> phis = {0.3, 0.9, 1.7, 2.9};
  EXPECT_EQ(multi_daqk_eval(phis, spec), daqk_eval(phis, spec));
}

TEST(MultiDaqkEval, IdenticalGraphsGiveIdenticalBlocks) {
  auto spec = make_kernel_spec(2, {"grid4"});
  spec.graphs.push_back(make_custom_graph(2, spec.graphs[0].edges()));
  const std::vector<double> phis = {0.3, 0.9, 1.7, 2.9};
  const auto out = multi_daqk_eval(phis, spec);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out[i], out[4 + i]);
}

TEST(SensitivityMatrix, UnentangledIsDiagonal) {
  auto spec = make_kernel_spec(2, {"empty"});
  spec.schedule = sim::Schedule::piecewise({{0.0, 0.0}}, {{0.0, 0.0}, {0.2, 0.2}});
  rng gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> base(4);
    for (auto& p : base) p = gen.uniform(0.1, pi - 0.1);
    const auto s = sensitivity_matrix(spec, base);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        if (i == j)
          EXPECT_NEAR(s(i, j), std::cos(base[i]), 1e-6);
        else
          EXPECT_LT(std::abs(s(i, j)), 1e-8);
      }
  }
}

// Finite differences of the dense-oracle readout; independent of the trotter path.
SensitivityMatrix oracle_sensitivity(const KernelSpec& spec, const std::vector<double>& base, double h) {
  const auto& g = spec.graphs[0];
  const sim::Interaction interaction{g, coupling_matrix(g, spec.coupling)};
  const auto z = [&](const std::vector<double>& phis) {
    return readout_z(sim::exact_evolve_oracle(sim::init_encoded_state(phis), spec.schedule, spec.tau, 64, interaction));
  };
  const std::size_t q = base.size();
  SensitivityMatrix s{q, std::vector<double>(q * q)};
  for (std::size_t j = 0; j < q; ++j) {
    auto p = base;
    p[j] += h;
    const auto plus = z(p);
    p[j] -= 2 * h;
    const auto minus = z(p);
    for (std::size_t i = 0; i < q; ++i) s.entries[i * q + j] = (plus[i] - minus[i]) / (2 * h);
  }
  return s;
}

TEST(SensitivityMatrix, KingsCouplesAdjacentPixels) {
  const auto spec = make_kernel_spec(2, {"kings"});
  rng gen(31);
  std::vector<std::vector<double>> bases = {std::vector<double>(4, pi / 3)};
  for (int t = 0; t < 3; ++t) {
    std::vector<double> b(4);
    for (auto& p : b) p = gen.uniform(0.1, pi - 0.1);
    bases.push_back(b);
  }
  for (const auto& base : bases) {
    const auto s = sensitivity_matrix(spec, base);
    const auto reference = oracle_sensitivity(spec, base, 1e-4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        // Trotter and oracle routes agree to the splitting error.
        EXPECT_NEAR(s(i, j), reference(i, j), 5e-4);
        if (i != j && spec.graphs[0].has_edge(i, j)) {
          EXPECT_GT(std::abs(s(i, j)), 1e-7) << i << "," << j;
          EXPECT_GT(std::abs(reference(i, j)), 1e-7) << i << "," << j;
        }
      }
  }
}

TEST(SensitivityMatrix, AllZerosBaseHasNoFirstOrderCoupling) {
  // The all-pi/2 base encodes |0...0>; first-order cross sensitivities vanish
  // there in both routes, so only the diagonal carries signal.
  const auto spec = make_kernel_spec(2, {"kings"});
  const std::vector<double> base(4, pi / 2);
  const auto s = sensitivity_matrix(spec, base);
  const auto reference = oracle_sensitivity(spec, base, 1e-4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) {
        EXPECT_GT(std::abs(s(i, j)), 1e-5);
      } else {
        EXPECT_LT(std::abs(s(i, j)), 1e-8);
        EXPECT_LT(std::abs(reference(i, j)), 1e-8);
      }
    }
}

TEST(SensitivityMatrix, NineQubitKingsCouplesAdjacentPixels) {
  const auto spec = make_kernel_spec(3, {"kings"});
  const std::vector<double> base(9, pi / 3);
  const auto s = sensitivity_matrix(spec, base);
  for (const auto& e : spec.graphs[0].edges()) {
    EXPECT_GT(std::abs(s(e.first, e.second)), 1e-7);
    EXPECT_GT(std::abs(s(e.second, e.first)), 1e-7);
  }
}

TEST(SensitivityMatrix, Errors) {
  const auto spec = make_kernel_spec(2, {"kings"});
  const std::vector<double> base(4, pi / 2);
  expect_error(errc::step_too_large, [&] { sensitivity_matrix(spec, base, pi / 4); });
  expect_error(errc::angle_out_of_range, [&] { sensitivity_matrix(spec, std::vector<double>{0.0, 1, 1, 1}); });
}

TEST(SensitivityMatrix, SymmetricUnderPatchSymmetries) {
  const auto spec = make_kernel_spec(2, {"kings"});
  const std::vector<double> base(4, pi / 2);
  const auto s = sensitivity_matrix(spec, base);
  // Dihedral group of the 2x2 patch (cells 0 1 / 2 3).
  const std::vector<std::array<std::size_t, 4>> group = {
      {0, 1, 2, 3}, {1, 3, 0, 2}, {3, 2, 1, 0}, {2, 0, 3, 1},
      {1, 0, 3, 2}, {2, 3, 0, 1}, {0, 2, 1, 3}, {3, 1, 2, 0}};
  for (const auto& g : group)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(s(g[i], g[j]), s(i, j), 1e-9);
}

TEST(KernelSpecJson, RoundTripAndDigest) {
  auto spec = make_kernel_spec(3, {"kings", "grid4", "diag", "ring"});
  spec.theta0 = 0.25;
  spec.coupling = UniformCoupling{0.5};
  spec.schedule = sim::Schedule::piecewise({{0.0, 0.0}, {0.2, 1.0}}, {{0.0, 0.3}});
  const auto doc = kernel_to_json(spec);
  const auto back = kernel_from_json(nlohmann::json::parse(doc.dump()));
  EXPECT_EQ(kernel_to_json(back).dump(), doc.dump());
  EXPECT_EQ(kernel_digest(back), kernel_digest(spec));

  auto other = spec;
  other.steps = 8;
  EXPECT_NE(kernel_digest(other), kernel_digest(spec));

  auto custom = make_kernel_spec(2, {"kings"});
  custom.graphs = {make_custom_graph(2, {{0, 3}})};
  const auto custom_back = kernel_from_json(kernel_to_json(custom));
  EXPECT_EQ(custom_back.graphs[0].edges(), custom.graphs[0].edges());
}

TEST(KernelSpecJson, DefaultsAndErrors) {
  const auto spec = kernel_from_json(nlohmann::json::object());
  EXPECT_EQ(spec.n, 2u);
  EXPECT_EQ(spec.tau, 0.2);
  EXPECT_EQ(spec.steps, 4);
  EXPECT_EQ(spec.theta0, 0.0);
  ASSERT_EQ(spec.graphs.size(), 1u);
  EXPECT_EQ(spec.graphs[0].name(), "kings");
  EXPECT_EQ(std::get<GeometricCoupling>(spec.coupling).c6, 1.0);
  expect_error(errc::invalid_steps, [] { kernel_from_json(nlohmann::json{{"steps", 0}}); });
  expect_error(errc::unknown_graph_name, [] { kernel_from_json(nlohmann::json{{"graphs", {"star"}}}); });
  expect_error(errc::config_error, [] { kernel_from_json(nlohmann::json{{"tau", "long"}}); });
}

}  // namespace
