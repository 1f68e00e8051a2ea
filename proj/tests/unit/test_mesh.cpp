#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "plateid/error.hpp"
#include "plateid/mesh.hpp"

using namespace plateid;

TEST_SUITE("mesh") {

TEST_CASE("plate mesh counts and geometry") {
  const WedgeMesh m = generate_plate_mesh(50.0, 1.0, 4);
  CHECK(m.num_nodes() == 2 * 25);
  CHECK(m.num_elements() == 2 * 16);
  CHECK(m.num_boundaries() == 4);
  CHECK(m.thickness() == doctest::Approx(1.0));
  double area = 0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) area += m.element_area(e);
  CHECK(area == doctest::Approx(2500.0));
  for (const auto& b : m.boundaries()) CHECK(b.nodes.size() == 2 * 5);
}

TEST_CASE("boundary sets contain exactly the edge nodes") {
  const WedgeMesh m = generate_plate_mesh(50.0, 1.0, 5);
  for (std::size_t a = 0; a < m.num_nodes(); ++a) {
    const Vec3& x = m.node(a);
    const bool edge = x.x() == 0.0 || x.x() == 50.0 || x.y() == 0.0 || x.y() == 50.0;
    CHECK(m.on_boundary(a) == edge);
  }
  const auto& x0 = m.boundary(0);
  CHECK(x0.name == "x0");
  for (std::size_t a : x0.nodes) CHECK(m.node(a).x() == 0.0);
}

TEST_CASE("element neighbours share a node and are symmetric") {
  const WedgeMesh m = generate_plate_mesh(10.0, 1.0, 3);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (std::size_t f : m.neighbors(e)) {
      const auto& ne = m.neighbors(f);
      CHECK(std::binary_search(ne.begin(), ne.end(), e));
      std::set<std::size_t> a(m.element(e).begin(), m.element(e).end());
      bool share = false;
      for (std::size_t n : m.element(f)) share = share || a.count(n);
      CHECK(share);
    }
  }
}

TEST_CASE("invalid meshes are rejected") {
  std::vector<Vec3> nodes{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
  CHECK_NOTHROW(WedgeMesh(nodes, {{0, 1, 2, 3, 4, 5}}, {}));
  CHECK_THROWS_AS(WedgeMesh(nodes, {{0, 2, 1, 3, 5, 4}}, {}), InvalidArgument);  // clockwise
  CHECK_THROWS_AS(WedgeMesh(nodes, {{0, 1, 2, 3, 4, 4}}, {}), InvalidArgument);
  CHECK_THROWS_AS(WedgeMesh(nodes, {{0, 1, 2, 3, 4, 9}}, {}), InvalidArgument);
  auto skew = nodes;
  skew[3].x() = 0.5;
  CHECK_THROWS_AS(WedgeMesh(skew, {{0, 1, 2, 3, 4, 5}}, {}), InvalidArgument);
}

TEST_CASE("segment maps must use contiguous ids from 1") {
  CHECK_NOTHROW(SegmentMap({1, 2, 2, 1}));
  CHECK_THROWS_AS(SegmentMap({1, 3}), InvalidArgument);
  CHECK_THROWS_AS(SegmentMap({0, 1}), InvalidArgument);
  CHECK(SegmentMap({2, 1, 2}).num_segments == 2);
}

TEST_CASE("cross pattern area fraction") {
  const WedgeMesh m = generate_plate_mesh(50.0, 1.0, 40);
  const SegmentMap s = generate_pattern(m, pattern::Cross{});
  CHECK(s.num_segments == 2);
  double area2 = 0;
  for (std::size_t e = 0; e < m.num_elements(); ++e)
    if (s[e] == 2) area2 += m.element_area(e);
  // Two 12.5 x 37.5 arms overlapping in a 12.5 x 12.5 square; edges align
  // with the 40-division grid so the rasterisation is exact.
  CHECK(area2 == doctest::Approx(2 * 12.5 * 37.5 - 12.5 * 12.5));
}

TEST_CASE("split3 and multi-inclusion patterns produce all segments") {
  const WedgeMesh m = generate_plate_mesh(50.0, 1.0, 40);
  CHECK(generate_pattern(m, pattern::Split3{}).num_segments == 3);
  CHECK(generate_pattern(m, pattern::MultiInclusion{}).num_segments == 4);
  CHECK(generate_pattern(m, pattern::Homogeneous{}).num_segments == 1);
  CHECK(pattern_name(parse_pattern("split3")) == "split3");
  CHECK_THROWS_AS(parse_pattern("triangle"), ConfigError);
}

TEST_CASE("interpolation reproduces affine fields exactly") {
  const WedgeMesh src = generate_plate_mesh(50.0, 1.0, 10);
  const WedgeMesh dst = generate_plate_mesh(50.0, 1.0, 7);
  Eigen::Matrix3d M;
  M << 0.3, 0.1, 0.0, -0.05, 1.2, 0.02, 0.01, 0.03, -0.4;
  auto affine = [&](const WedgeMesh& m) {
    std::vector<Vec3> v;
    for (const auto& x : m.nodes()) v.push_back(M * x + Vec3(0.1, -0.2, 0.3));
    return DisplacementField(v, m.id());
  };
  const DisplacementField out = interpolate_to_mesh(src, affine(src), dst);
  const DisplacementField ref = affine(dst);
  CHECK(out.mesh_id == dst.id());
  double err = 0;
  for (std::size_t a = 0; a < dst.num_nodes(); ++a) err = std::max(err, (out[a] - ref[a]).norm());
  CHECK(err < 1e-12);
}

TEST_CASE("interpolation onto the same mesh is the identity") {
  const WedgeMesh m = generate_plate_mesh(50.0, 1.0, 6);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<Vec3> v(m.num_nodes());
  for (auto& u : v) u = Vec3(n(rng), n(rng), n(rng));
  const DisplacementField f(v, m.id());
  const DisplacementField out = interpolate_to_mesh(m, f, generate_plate_mesh(50.0, 1.0, 6));
  for (std::size_t a = 0; a < m.num_nodes(); ++a) CHECK((out[a] - f[a]).norm() == 0.0);
}

TEST_CASE("interpolation rejects mismatched thickness") {
  const WedgeMesh a = generate_plate_mesh(50.0, 1.0, 4);
  const WedgeMesh b = generate_plate_mesh(50.0, 2.0, 4);
  CHECK_THROWS(interpolate_to_mesh(a, DisplacementField::zero(a), b));
}

TEST_CASE("segment transfer between meshes") {
  const WedgeMesh a = generate_plate_mesh(50.0, 1.0, 40);
  const WedgeMesh b = generate_plate_mesh(50.0, 1.0, 37);
  const SegmentMap sa = generate_pattern(a, pattern::Cross{});
  const SegmentMap sb = transfer_segments(a, sa, b);
  const SegmentMap direct = generate_pattern(b, pattern::Cross{});
  std::size_t diff = 0;
  for (std::size_t e = 0; e < b.num_elements(); ++e) diff += sb[e] != direct[e];
  CHECK(sb.num_segments == 2);
  CHECK(static_cast<double>(diff) / b.num_elements() < 0.05);
}

TEST_CASE("field checks") {
  const WedgeMesh m = generate_plate_mesh(50.0, 1.0, 2);
  DisplacementField f = DisplacementField::zero(m);
  CHECK_NOTHROW(check_field(m, f));
  f.values[0].x() = NAN;
  CHECK_THROWS_AS(check_field(m, f), InvalidArgument);
  f = DisplacementField::zero(m);
  f.mesh_id ^= 1;
  CHECK_THROWS_AS(check_field(m, f), InvalidArgument);
}

}
