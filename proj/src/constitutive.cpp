#include "plateid/constitutive.hpp"

#include <cmath>
#include <cstdint>

#include <Eigen/LU>
#include <boost/math/tools/toms748_solve.hpp>

#include "plateid/error.hpp"

namespace plateid {

namespace {

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

Eigen::Matrix<double, 1, 9> flatten(const Mat3& M) {
  Eigen::Matrix<double, 1, 9> row;
  for (int i = 0; i < 3; ++i)
    for (int J = 0; J < 3; ++J) row(3 * i + J) = M(i, J);
  return row;
}

struct Kinematics {
  Invariants inv;
  Mat3 dI1t, dI2t, dJ;
};

Kinematics kinematics(const Mat3& F) {
  Kinematics k;
  k.inv = invariants(F);
  const Mat3 FinvT = F.inverse().transpose();
  const Mat3 C = F.transpose() * F;
  const double J = k.inv.J;
  const double j23 = std::pow(J, -2.0 / 3.0);
  const double j43 = j23 * j23;
  const Mat3 dI1 = 2.0 * F;
  const Mat3 dI2 = 2.0 * (k.inv.I1 * F - F * C);
  k.dI1t = j23 * (dI1 - (2.0 / 3.0) * k.inv.I1 * FinvT);
  k.dI2t = j43 * (dI2 - (4.0 / 3.0) * k.inv.I2 * FinvT);
  k.dJ = J * FinvT;
  return k;
}

}  // namespace

Invariants invariants(const Mat3& F) {
  const double J = F.determinant();
  if (!(J > 0.0)) {
    throw NonPhysicalDeformation("deformation gradient has det(F) = " + std::to_string(J) +
                                 " <= 0");
  }
  const Mat3 C = F.transpose() * F;
  Invariants r;
  r.I1 = C.trace();
  r.I2 = 0.5 * (r.I1 * r.I1 - (C * C).trace());
  r.I3 = J * J;
  r.J = J;
  const double j23 = std::pow(J, -2.0 / 3.0);
  r.I1t = j23 * r.I1;
  r.I2t = j23 * j23 * r.I2;
  return r;
}

std::string FeatureTerm::name() const {
  std::string s;
  auto factor = [&](const char* base, int n) {
    if (n == 0) return;
    if (!s.empty()) s += "*";
    s += base;
    if (n > 1) s += "^" + std::to_string(n);
  };
  factor("(I1t-3)", p);
  factor("(I2t-3)", q);
  factor("(J-1)", r);
  return s.empty() ? "1" : s;
}

FeatureLibrary::FeatureLibrary(std::vector<FeatureTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw InvalidArgument("feature library is empty");
  for (const auto& t : terms_) {
    if (t.p < 0 || t.q < 0 || t.r < 0 || t.p + t.q + t.r == 0) {
      throw InvalidArgument("feature term " + t.name() + " is not a valid monomial");
    }
    // Q(I) = 0 and dQ/dF(I) = 0 need (J-1) to appear squared or not at all
    // when it stands alone.
    if (t.p == 0 && t.q == 0 && t.r < 2) {
      throw InvalidArgument("volumetric feature " + t.name() + " must be at least quadratic");
    }
  }
}

FeatureLibrary FeatureLibrary::standard() {
  return FeatureLibrary({{1, 0, 0}, {0, 1, 0}, {2, 0, 0}, {1, 1, 0}, {3, 0, 0}, {0, 0, 2}});
}

FeatureLibrary FeatureLibrary::neo_hookean() { return FeatureLibrary({{1, 0, 0}, {0, 0, 2}}); }

FeatureLibrary FeatureLibrary::mooney_rivlin(int N, int M) {
  if (N < 1 || M < 1) throw InvalidArgument("Mooney-Rivlin orders must be positive");
  std::vector<FeatureTerm> terms;
  for (int j = 1; j <= N; ++j)
    for (int i = 0; i <= j; ++i) terms.push_back({i, j - i, 0});
  for (int k = 1; k <= M; ++k) terms.push_back({0, 0, 2 * k});
  return FeatureLibrary(std::move(terms));
}

std::vector<std::string> FeatureLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& t : terms_) out.push_back(t.name());
  return out;
}

Eigen::VectorXd FeatureLibrary::values(const Mat3& F) const {
  const Invariants inv = invariants(F);
  const double a = inv.I1t - 3.0, c = inv.I2t - 3.0, v = inv.J - 1.0;
  Eigen::VectorXd q(size());
  for (int k = 0; k < size(); ++k) {
    const auto& t = terms_[k];
    q[k] = ipow(a, t.p) * ipow(c, t.q) * ipow(v, t.r);
  }
  return q;
}

FeatureDerivatives FeatureLibrary::piola_derivatives(const Mat3& F) const {
  const Kinematics kin = kinematics(F);
  const double a = kin.inv.I1t - 3.0, c = kin.inv.I2t - 3.0, v = kin.inv.J - 1.0;
  FeatureDerivatives D(size(), 9);
  for (int k = 0; k < size(); ++k) {
    const auto& t = terms_[k];
    Mat3 d = Mat3::Zero();
    if (t.p > 0) d += t.p * ipow(a, t.p - 1) * ipow(c, t.q) * ipow(v, t.r) * kin.dI1t;
    if (t.q > 0) d += t.q * ipow(a, t.p) * ipow(c, t.q - 1) * ipow(v, t.r) * kin.dI2t;
    if (t.r > 0) d += t.r * ipow(a, t.p) * ipow(c, t.q) * ipow(v, t.r - 1) * kin.dJ;
    D.row(k) = flatten(d);
  }
  return D;
}

double FeatureLibrary::strain_energy(const Mat3& F, const Eigen::VectorXd& theta) const {
  if (theta.size() != size()) throw InvalidArgument("parameter vector width does not match library");
  return values(F).dot(theta);
}

Mat3 FeatureLibrary::piola(const Mat3& F, const Eigen::VectorXd& theta) const {
  if (theta.size() != size()) throw InvalidArgument("parameter vector width does not match library");
  const Eigen::Matrix<double, 1, 9> row = theta.transpose() * piola_derivatives(F);
  return unflatten(row);
}

Mat3 unflatten(const Eigen::Matrix<double, 1, 9>& row) {
  Mat3 M;
  for (int i = 0; i < 3; ++i)
    for (int J = 0; J < 3; ++J) M(i, J) = row(3 * i + J);
  return M;
}

MaterialParams::MaterialParams(Eigen::VectorXd t) : theta(std::move(t)) {
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    if (!std::isfinite(theta[k]) || theta[k] < 0.0) {
      throw InvalidArgument("material parameter theta_" + std::to_string(k + 1) +
                            " must be finite and non-negative");
    }
  }
}

MaterialParams MaterialParams::of(std::initializer_list<double> values) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) t[i++] = v;
  return MaterialParams(std::move(t));
}

namespace materials {
MaterialParams nh2_a() { return MaterialParams::of({1.80, 0, 0, 0, 0, 6.00}); }
MaterialParams nh2_b() { return MaterialParams::of({5.40, 0, 0, 0, 0, 15.00}); }
MaterialParams nh2_stiff() { return MaterialParams::of({6.00, 0, 0, 0, 0, 32.00}); }
MaterialParams isihara() { return MaterialParams::of({4.00, 0.50, 0.30, 0, 0, 21.00}); }
MaterialParams haines_wilson() { return MaterialParams::of({1.00, 0.15, 0, 0.02, 0.00, 10.00}); }
}  // namespace materials

double plane_stress_thickness_stretch(double lambda_x, double lambda_y,
                                      const Eigen::VectorXd& theta,
                                      const FeatureLibrary& library) {
  if (!(lambda_x > 0.0) || !(lambda_y > 0.0)) throw InvalidArgument("stretches must be positive");
  auto p33 = [&](double lz) {
    const Mat3 F = Eigen::Vector3d(lambda_x, lambda_y, lz).asDiagonal();
    return library.piola(F, theta)(2, 2);
  };
  constexpr double lo = 0.05, hi = 20.0;
  const double flo = p33(lo), fhi = p33(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) {
    throw NumericalError("no sign change of P33 in the thickness-stretch bracket [0.05, 20]");
  }
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      p33, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), max_iter);
  return std::abs(p33(a)) <= std::abs(p33(b)) ? a : b;
}

}  // namespace plateid
