#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "plateid/assembly.hpp"
#include "plateid/constitutive.hpp"
#include "plateid/sampler.hpp"

namespace plateid {

/// Canonical in-plane deformation modes: uniaxial tension/compression,
/// simple shear, biaxial tension/compression and pure shear.
enum class PathKind { UT, UC, SS, BT, BC, PS };

const std::vector<PathKind>& all_path_kinds();
std::string path_name(PathKind kind);
/// Throws ConfigError for unknown names.
PathKind parse_path_kind(const std::string& name);

/// In-plane path matrix embedded in 3D with F33 = 1.
Mat3 path_gradient(PathKind kind, double gamma);

struct DeformationPath {
  PathKind kind = PathKind::UT;
  std::vector<double> gamma;

  /// `points` uniform values on [0, 1].
  static DeformationPath uniform(PathKind kind, int points = 101);
  /// Throws InvalidArgument unless gamma is non-empty, inside [0, 1] and
  /// strictly increasing.
  void validate() const;
};

/// W(F(gamma)) for one parameter vector (any sign).
std::vector<double> energy_along_path(const DeformationPath& path, const Eigen::VectorXd& theta,
                                      const FeatureLibrary& library = FeatureLibrary::standard());

/// Per-gamma median and 2.5 / 97.5 percentiles of W over parameter draws.
struct EnergyBand {
  std::vector<double> median, lo, hi;
};

/// `draws` holds one non-negative parameter vector per row.
EnergyBand energy_along_path(const DeformationPath& path, const Eigen::MatrixXd& draws,
                             const FeatureLibrary& library = FeatureLibrary::standard());

/// Linear-interpolation percentile (q in [0, 100]) of a non-empty sample.
double percentile(std::vector<double> values, double q);

/// 1 - SS_res / SS_tot. Throws InvalidArgument on length mismatch or fewer
/// than two points, NumericalError when the truth is constant.
double r_squared(const std::vector<double>& truth, const std::vector<double>& prediction);

/// One path for one segment: true energy, posterior band and R^2 of the
/// posterior median against the truth.
struct PathComparison {
  DeformationPath path;
  std::vector<double> truth;
  EnergyBand band;
  double r2 = 0.0;
  /// Smallest W over every draw and grid point.
  double min_energy = 0.0;
};

std::vector<PathComparison> compare_energy_paths(const Eigen::VectorXd& theta_true,
                                                 const Eigen::MatrixXd& draws,
                                                 const FeatureLibrary& library,
                                                 int points = 101);

/// Rows "path,gamma,W_true,W_med,W_lo,W_hi" under a header line.
std::string energy_csv(const std::vector<PathComparison>& paths);

/// OLS against the posterior on one system.
struct OlsBayesReport {
  int n_features = 0;
  int n_segments = 0;
  Eigen::VectorXd ols;
  Eigen::VectorXd bayes_mean;
  Eigen::VectorXd bayes_std;
  Eigen::VectorXd inclusion;
  /// Coefficients where OLS is negative.
  std::vector<int> ols_negative;
  /// Number of retained draws with any negative coefficient.
  int bayes_negative_draws = 0;

  /// Whitespace-separated table, one row per coefficient:
  /// "segment feature ols bayes_mean bayes_std inclusion ols_negative".
  std::string table() const;
};

/// Throws InvalidArgument when the ensemble width differs from the system.
OlsBayesReport compare_ols_bayes(const EquilibriumSystem& system,
                                 const PosteriorEnsemble& ensemble);

}  // namespace plateid
