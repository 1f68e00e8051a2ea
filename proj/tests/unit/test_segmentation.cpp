#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles/oracles.hpp"
#include "plateid/error.hpp"
#include "plateid/forward.hpp"
#include "plateid/rng.hpp"
#include "plateid/segmentation.hpp"

using namespace plateid;

namespace {

// Element adjacency (at least one shared node) by brute force.
std::vector<std::vector<std::size_t>> element_graph(const WedgeMesh& mesh) {
  const std::size_t ne = mesh.num_elements();
  std::vector<std::vector<std::size_t>> adj(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t f = e + 1; f < ne; ++f) {
      bool shared = false;
      for (std::size_t a : mesh.element(e))
        for (std::size_t b : mesh.element(f)) shared = shared || a == b;
      if (shared) {
        adj[e].push_back(f);
        adj[f].push_back(e);
      }
    }
  }
  return adj;
}

ResidualField field_from_magnitudes(const std::vector<double>& mags) {
  std::vector<std::size_t> nodes;
  std::vector<Vec3> f;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    nodes.push_back(k);
    f.emplace_back(mags[k], 0.0, 0.3);
  }
  return make_residual_field(nodes, f);
}

struct CrossData {
  WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 16);
  SegmentMap truth;
  ForwardResult fwd;
  CrossData() {
    truth = generate_pattern(mesh, pattern::Cross{});
    fwd = forward_solve(mesh, truth, {materials::nh2_a(), materials::nh2_b()}, {1.6, 2.2, 6});
  }
};

const CrossData& cross() {
  static const CrossData d;
  return d;
}

}  // namespace

TEST_SUITE("segmentation") {

TEST_CASE("flagging: [1, 1, 1, 10] with lambda 1.5 flags only the last node") {
  const ResidualField r = field_from_magnitudes({1, 1, 1, 10});
  // Population sigma: mean 3.25, deviations^2 = 3 * 5.0625 + 45.5625.
  CHECK(r.sigma == doctest::Approx(std::sqrt((3 * 5.0625 + 45.5625) / 4.0)));
  CHECK(r.sigma == doctest::Approx(3.897).epsilon(1e-3));
  CHECK(flag_nodes(r, 1.5) == std::vector<std::size_t>{3});
  CHECK(flag_nodes(r, 1e9).empty());
  CHECK_THROWS_AS(flag_nodes(r, 0.0), ConfigError);
}

TEST_CASE("flagging is monotone in lambda") {
  Rng rng(4);
  std::exponential_distribution<double> ex(1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> m(200);
    for (double& v : m) v = ex(rng);
    const ResidualField r = field_from_magnitudes(m);
    std::vector<std::size_t> prev = flag_nodes(r, 0.25);
    for (double lam = 0.5; lam < 4.0; lam += 0.25) {
      const auto cur = flag_nodes(r, lam);
      CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
    }
  }
}

TEST_CASE("no flags gives one segment") {
  const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 5);
  const SegmentationResult g = grow_segments(mesh, {}, 3);
  REQUIRE(g.segments.size() == 1);
  CHECK(g.segments[0].size() == mesh.num_elements());
  CHECK(g.unassigned.empty());
}

TEST_CASE("a straight flagged line splits the plate in two") {
  const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 8);
  std::vector<std::size_t> line;
  for (std::size_t a = 0; a < mesh.num_nodes(); ++a)
    if (std::abs(mesh.node(a).x() - 25.0) < 1e-9) line.push_back(a);
  const SegmentationResult g = grow_segments(mesh, line, 1);
  CHECK(g.segments.size() == 2);
  const SegmentMap s = resolve_segments(mesh, g);
  CHECK(s.num_segments == 2);
  std::size_t n1 = 0, n2 = 0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) (s[e] == 1 ? n1 : n2)++;
  CHECK(n1 + n2 == mesh.num_elements());
  CHECK(n1 == n2);
}

TEST_CASE("growth equals connected components of unflagged elements") {
  Rng rng(12);
  for (int n : {4, 6, 10}) {
    const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, n);
    const auto adj = element_graph(mesh);
    const std::size_t ne = mesh.num_elements();
    for (int trial = 0; trial < 15; ++trial) {
      std::bernoulli_distribution flip(0.04 + 0.02 * (trial % 5));
      std::vector<char> node_flag(mesh.num_nodes(), 0);
      std::vector<std::size_t> flagged;
      // Flag in vertical pairs, like residual flags on both faces.
      for (std::size_t a = 0; a < mesh.num_nodes(); ++a) {
        if (mesh.node(a).z() > 0.5 || !flip(rng)) continue;
        for (std::size_t b = 0; b < mesh.num_nodes(); ++b) {
          if ((mesh.node(b).head<2>() - mesh.node(a).head<2>()).norm() < 1e-9) {
            node_flag[b] = 1;
            flagged.push_back(b);
          }
        }
      }
      std::vector<char> clean(ne, 1), full(ne, 1);
      for (std::size_t e = 0; e < ne; ++e) {
        for (std::size_t a : mesh.element(e)) {
          if (node_flag[a]) clean[e] = 0;
          else full[e] = 0;
        }
      }
      if (std::none_of(clean.begin(), clean.end(), [](char c) { return c; })) {
        CHECK_THROWS_AS(grow_segments(mesh, flagged, 1), SegmentationFailure);
        continue;
      }
      const std::vector<int> comp = oracle::components(adj, clean);
      const int ncomp = *std::max_element(comp.begin(), comp.end()) + 1;

      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SegmentationResult g = grow_segments(mesh, flagged, seed);
        CHECK(static_cast<int>(g.segments.size()) == ncomp);
        std::vector<int> owner(ne, -1);
        for (std::size_t k = 0; k < g.segments.size(); ++k) {
          for (std::size_t e : g.segments[k]) {
            CHECK(owner[e] == -1);
            owner[e] = static_cast<int>(k);
          }
        }
        for (std::size_t k = 0; k < g.segments.size(); ++k) {
          // The clean elements of a segment are exactly one component.
          std::set<int> comps;
          std::size_t clean_count = 0;
          for (std::size_t e : g.segments[k]) {
            if (clean[e]) {
              comps.insert(comp[e]);
              ++clean_count;
            }
          }
          REQUIRE(comps.size() == 1);
          CHECK(clean_count == static_cast<std::size_t>(std::count(comp.begin(), comp.end(), *comps.begin())));
        }
        for (std::size_t e = 0; e < ne; ++e) {
          if (clean[e]) continue;
          // A touched element is absorbed iff it neighbours a clean one, and
          // only by the segment of one of those clean neighbours.
          std::set<int> nearby;
          for (std::size_t f : adj[e])
            if (clean[f]) nearby.insert(owner[f]);
          if (full[e] || nearby.empty()) {
            CHECK(owner[e] == -1);
          } else {
            CHECK(nearby.count(owner[e]) == 1);
          }
        }
        CHECK(g.unassigned.size() == static_cast<std::size_t>(std::count(owner.begin(), owner.end(), -1)));
        if (g.unassigned.size() < ne) {
          const SegmentMap s = resolve_segments(mesh, g);
          CHECK(s.num_segments == ncomp);
        }
      }
    }
  }
}

TEST_CASE("every element flagged is a segmentation failure") {
  const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 3);
  std::vector<std::size_t> all(mesh.num_nodes());
  for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
  CHECK_THROWS_AS(grow_segments(mesh, all, 1), SegmentationFailure);
}

TEST_CASE("resolution attaches orphans and numbers segments by first element") {
  const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 6);
  SegmentationResult g;
  const std::size_t ne = mesh.num_elements();
  g.segments.resize(2);
  for (std::size_t e = 0; e < ne; ++e) {
    if (e == 10) continue;
    g.segments[e < ne / 2 ? 1 : 0].push_back(e);
  }
  g.unassigned = {10};
  const SegmentMap s = resolve_segments(mesh, g);
  CHECK(s.num_segments == 2);
  CHECK(s[0] == 1);
  CHECK(s[ne - 1] == 2);
  CHECK(s[10] == 1);
}

TEST_CASE("zero deformation and zero force give zero residuals") {
  const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 4);
  BoundaryForces forces;
  forces.names = {"x0", "xL", "y0", "yL"};
  forces.R = Eigen::MatrixX3d::Zero(4, 3);
  const ResidualField r = residual_forces(mesh, DisplacementField::zero(mesh), forces);
  CHECK(r.size() > 0);
  for (double v : r.f_res) CHECK(v == 0.0);
  const NoiseDiagnostics d = noise_diagnostics(r, forces);
  CHECK(d.mu_over_sigma == 0.0);
  CHECK(d.sigma_over_rmax == 0.0);
}

TEST_CASE("homogeneous plate: tiny residuals, nominally homogeneous") {
  const WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 10);
  const SegmentMap one(std::vector<int>(mesh.num_elements(), 1));
  const ForwardResult fwd = forward_solve(mesh, one, {materials::nh2_a()}, {1.6, 2.2, 6});
  const ResidualField r = residual_forces(mesh, fwd.field, fwd.forces);
  CHECK(*std::max_element(r.f_res.begin(), r.f_res.end()) <= 10 * fwd.tolerance);
  const NoiseDiagnostics d = noise_diagnostics(r, fwd.forces);
  CHECK(d.mu_over_sigma >= 1.0);
  CHECK(d.sigma_over_rmax <= 1e-5);
  CHECK(d.nominally_homogeneous);
  CHECK_THROWS_AS(noise_diagnostics(r, BoundaryForces{fwd.forces.names, Eigen::MatrixX3d::Zero(4, 3)}),
                  NumericalError);
}

TEST_CASE("cross plate: largest residuals sit at the interface") {
  const auto& d = cross();
  const ResidualField r = residual_forces(d.mesh, d.fwd.field, d.fwd.forces);
  CHECK(noise_diagnostics(r, d.fwd.forces).mu_over_sigma < 0.6);

  // Interface nodes are shared by elements of both segments; one ring adds
  // every node of an element touching the interface.
  std::vector<char> iface(d.mesh.num_nodes(), 0), ring(d.mesh.num_nodes(), 0);
  for (std::size_t a = 0; a < d.mesh.num_nodes(); ++a) {
    std::set<int> s;
    for (std::size_t e : d.mesh.elements_of_node(a)) s.insert(d.truth[e]);
    iface[a] = s.size() > 1;
  }
  for (std::size_t e = 0; e < d.mesh.num_elements(); ++e) {
    bool touches = false;
    for (std::size_t a : d.mesh.element(e)) touches = touches || iface[a];
    if (touches)
      for (std::size_t a : d.mesh.element(e)) ring[a] = 1;
  }
  std::vector<std::size_t> order(r.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return r.f_res[a] > r.f_res[b]; });
  const std::size_t top = order.size() / 10;
  std::size_t near = 0;
  for (std::size_t k = 0; k < top; ++k) near += ring[r.nodes[order[k]]];
  CHECK(static_cast<double>(near) >= 0.9 * static_cast<double>(top));
}

TEST_CASE("segment count is seed independent for a closed flag curve") {
  const auto& d = cross();
  const ResidualField r = residual_forces(d.mesh, d.fwd.field, d.fwd.forces);
  const auto flags = flag_nodes(r, 1.5);
  std::set<std::size_t> counts;
  for (std::uint64_t seed = 1; seed <= 20; ++seed)
    counts.insert(grow_segments(d.mesh, flags, seed).segments.size());
  CHECK(counts.size() == 1);
}

TEST_CASE("misassignment is label-invariant") {
  const auto& d = cross();
  CHECK(misassignment(d.truth, d.truth) == 0.0);
  std::vector<int> swapped;
  for (std::size_t e = 0; e < d.truth.size(); ++e) swapped.push_back(3 - d.truth[e]);
  CHECK(misassignment(SegmentMap(swapped), d.truth) == 0.0);
  CHECK(match_segments(SegmentMap(swapped), d.truth) == std::vector<int>{2, 1});
  const SegmentMap one(std::vector<int>(d.truth.size(), 1));
  std::size_t inside = 0;
  for (std::size_t e = 0; e < d.truth.size(); ++e) inside += d.truth[e] == 2;
  CHECK(misassignment(one, d.truth) ==
        doctest::Approx(static_cast<double>(inside) / static_cast<double>(d.truth.size())));
}

TEST_CASE("interface nodes are grouped by adjacent segments") {
  const auto& d = cross();
  const EquilibriumSystem sys = assemble_system(d.mesh, d.fwd.field, d.truth, FeatureLibrary::standard(),
                                                d.fwd.forces);
  const Eigen::VectorXd theta = ols_solve(sys);
  std::vector<std::size_t> flagged;
  for (std::size_t a = 0; a < d.mesh.num_nodes(); ++a) {
    std::set<int> s;
    for (std::size_t e : d.mesh.elements_of_node(a)) s.insert(d.truth[e]);
    if (s.size() > 1 || a % 7 == 0) flagged.push_back(a);
  }
  const InterfaceNodes in = interface_nodes(d.mesh, d.truth, flagged, sys, theta);
  REQUIRE(!in.nodes.empty());
  std::set<std::uint64_t> groups(in.group.begin(), in.group.end());
  CHECK(groups.size() == 3);  // {1}, {2}, {1, 2}
  // Exact model: heterogeneous residuals vanish up to solver tolerance.
  for (double v : in.residual) CHECK(v < 10 * d.fwd.tolerance);
}

}
