#include <doctest.h>

#include <cmath>

#include "plateid/denoise.hpp"
#include "plateid/error.hpp"
#include "plateid/forward.hpp"

using namespace plateid;

namespace {

double rms(const DisplacementField& a, const DisplacementField& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s / (3.0 * a.size()));
}

struct Fixture {
  WedgeMesh mesh = generate_plate_mesh(50.0, 1.0, 16);
  DisplacementField clean;
  Fixture() {
    const SegmentMap s = generate_pattern(mesh, pattern::Cross{});
    clean = forward_solve(mesh, s, {materials::nh2_a(), materials::nh2_b()}, {1.6, 2.2, 6}).field;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("denoise") {

TEST_CASE("noise-free field is not over-smoothed") {
  const auto& f = fixture();
  KrrReport rep;
  const DisplacementField out = denoise_krr(f.mesh, f.clean, {.seed = 1}, &rep);
  const DisplacementField zero = DisplacementField::zero(f.mesh);
  CHECK(rms(out, f.clean) < 1e-3 * rms(f.clean, zero));
  CHECK(rep.sigma_estimate < 1e-12);
}

TEST_CASE("paired noise estimate") {
  const auto& f = fixture();
  CHECK(paired_noise_estimate(f.mesh, add_noise(f.clean, 5e-3, 3)) ==
        doctest::Approx(5e-3).epsilon(0.1));
  CHECK(vertical_pairs(f.mesh).size() == f.mesh.num_nodes() / 2);
}

TEST_CASE("smooth field: noise reduced at least twofold") {
  const auto& f = fixture();
  std::vector<Vec3> v;
  for (std::size_t a = 0; a < f.mesh.num_nodes(); ++a) {
    const Vec3 X = f.mesh.node(a);
    v.emplace_back(0.6 * X.x() + 0.4 * std::sin(X.y() / 9.0), 1.2 * X.y() + 0.5 * std::sin(X.x() / 10.0),
                   -0.3 * X.z() + 0.05 * std::cos(X.y() / 8.0));
  }
  const DisplacementField smooth(v, f.mesh.id());
  const DisplacementField noisy = add_noise(smooth, 5e-3, 11);
  const DisplacementField out = denoise_krr(f.mesh, noisy, {.seed = 1});
  CHECK(rms(out, smooth) < 0.5 * rms(noisy, smooth));
}

TEST_CASE("never increases the error on the forward presets") {
  const auto& f = fixture();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const DisplacementField noisy = add_noise(f.clean, 5e-3, seed);
    KrrReport rep;
    const DisplacementField out = denoise_krr(f.mesh, noisy, {.seed = seed}, &rep);
    CHECK(rms(out, f.clean) < rms(noisy, f.clean));
    CHECK(rep.fits.size() == 4);
  }
}

TEST_CASE("constant field plus noise recovers the constant") {
  const auto& f = fixture();
  std::vector<Vec3> v(f.mesh.num_nodes(), Vec3(0.5, -0.25, 0.1));
  const DisplacementField c(v, f.mesh.id());
  const DisplacementField out = denoise_krr(f.mesh, add_noise(c, 5e-3, 9), {.seed = 2});
  // Three affine trend coefficients per face estimated from ~289 nodes.
  const double se = 5e-3 * std::sqrt(3.0 / 289.0);
  CHECK(rms(out, c) < 3 * se);
}

TEST_CASE("deterministic given the seed") {
  const auto& f = fixture();
  const DisplacementField noisy = add_noise(f.clean, 2e-3, 4);
  const auto a = denoise_krr(f.mesh, noisy, {.seed = 3});
  const auto b = denoise_krr(f.mesh, noisy, {.seed = 3});
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("bad options") {
  const auto& f = fixture();
  CHECK_THROWS_AS(denoise_krr(f.mesh, f.clean, {.trials = 0}), ConfigError);
  CHECK_THROWS_AS(denoise_krr(f.mesh, f.clean, {.bandwidths = {-1.0}}), ConfigError);
  CHECK_THROWS_AS(denoise_krr(f.mesh, f.clean, {.noise_level = -1.0}), ConfigError);
}

}
