#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace plateid {

using Mat3 = Eigen::Matrix3d;
/// Row k holds dQ_k/dF_{iJ} at column 3*i + J.
using FeatureDerivatives = Eigen::Matrix<double, Eigen::Dynamic, 9>;

/// Isotropic invariants of C = F^T F and their volume-normalised forms.
struct Invariants {
  double I1, I2, I3;
  double I1t, I2t, J;
};

/// Throws NonPhysicalDeformation when det(F) <= 0.
Invariants invariants(const Mat3& F);

/// One library term (I1t - 3)^p (I2t - 3)^q (J - 1)^r.
struct FeatureTerm {
  int p = 0;
  int q = 0;
  int r = 0;
  std::string name() const;
  bool operator==(const FeatureTerm&) const = default;
};

/// Ordered set of isotropic energy features Q(F); W = Q(F)^T theta.
class FeatureLibrary {
 public:
  explicit FeatureLibrary(std::vector<FeatureTerm> terms);

  /// The six default features, in this order: (I1t-3), (I2t-3), (I1t-3)^2,
  /// (I1t-3)(I2t-3), (I1t-3)^3, (J-1)^2.
  static FeatureLibrary standard();
  /// (I1t-3) and (J-1)^2 only; used for the homogenised residual model.
  static FeatureLibrary neo_hookean();
  /// Generalised Mooney-Rivlin terms (I1t-3)^i (I2t-3)^(j-i) for j = 1..N,
  /// i = 0..j, followed by volumetric terms (J-1)^(2k) for k = 1..M.
  static FeatureLibrary mooney_rivlin(int N, int M);

  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<FeatureTerm>& terms() const { return terms_; }
  std::vector<std::string> names() const;
  bool operator==(const FeatureLibrary&) const = default;

  Eigen::VectorXd values(const Mat3& F) const;
  /// Analytic dQ/dF through the chain rule on (I1t, I2t, J).
  FeatureDerivatives piola_derivatives(const Mat3& F) const;

  double strain_energy(const Mat3& F, const Eigen::VectorXd& theta) const;
  /// First Piola-Kirchhoff stress P = sum_k theta_k dQ_k/dF.
  Mat3 piola(const Mat3& F, const Eigen::VectorXd& theta) const;

 private:
  std::vector<FeatureTerm> terms_;
};

/// Unpacks one row of FeatureDerivatives into a 3x3 matrix.
Mat3 unflatten(const Eigen::Matrix<double, 1, 9>& row);

/// Material parameters of one segment, MPa. Non-negative by construction.
struct MaterialParams {
  Eigen::VectorXd theta;

  MaterialParams() = default;
  explicit MaterialParams(Eigen::VectorXd t);
  static MaterialParams of(std::initializer_list<double> values);
};

namespace materials {
MaterialParams nh2_a();      // 1.80, -, -, -, -, 6.00
MaterialParams nh2_b();      // 5.40, -, -, -, -, 15.00
MaterialParams nh2_stiff();  // 6.00, -, -, -, -, 32.00
MaterialParams isihara();    // 4.00, 0.50, 0.30, -, -, 21.00
MaterialParams haines_wilson();  // 1.00, 0.15, -, 0.02, 0.00, 10.00
}  // namespace materials

/// Through-thickness stretch lambda_z making P_33(diag(lx, ly, lz)) vanish,
/// bracketed in [0.05, 20]. Throws NumericalError when the bracket has no
/// sign change.
double plane_stress_thickness_stretch(double lambda_x, double lambda_y,
                                      const Eigen::VectorXd& theta,
                                      const FeatureLibrary& library = FeatureLibrary::standard());

}  // namespace plateid
