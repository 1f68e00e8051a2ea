#include "plateid/validation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plateid/error.hpp"
#include "plateid/io.hpp"

namespace plateid {

const std::vector<PathKind>& all_path_kinds() {
  static const std::vector<PathKind> kinds{PathKind::UT, PathKind::UC, PathKind::SS,
                                           PathKind::BT, PathKind::BC, PathKind::PS};
  return kinds;
}

std::string path_name(PathKind kind) {
  switch (kind) {
    case PathKind::UT: return "UT";
    case PathKind::UC: return "UC";
    case PathKind::SS: return "SS";
    case PathKind::BT: return "BT";
    case PathKind::BC: return "BC";
    case PathKind::PS: return "PS";
  }
  return "?";
}

PathKind parse_path_kind(const std::string& name) {
  for (PathKind k : all_path_kinds())
    if (path_name(k) == name) return k;
  throw ConfigError("unknown deformation path '" + name + "' (expected UT, UC, SS, BT, BC or PS)");
}

Mat3 path_gradient(PathKind kind, double gamma) {
  const double s = 1.0 + gamma;
  Mat3 F = Mat3::Identity();
  switch (kind) {
    case PathKind::UT: F(0, 0) = s; break;
    case PathKind::UC: F(0, 0) = 1.0 / s; break;
    case PathKind::SS: F(0, 1) = gamma; break;
    case PathKind::BT: F(0, 0) = F(1, 1) = s; break;
    case PathKind::BC: F(0, 0) = F(1, 1) = 1.0 / s; break;
    case PathKind::PS:
      F(0, 0) = s;
      F(1, 1) = 1.0 / s;
      break;
  }
  return F;
}

DeformationPath DeformationPath::uniform(PathKind kind, int points) {
  if (points < 2) throw InvalidArgument("a deformation path needs at least two points");
  DeformationPath p;
  p.kind = kind;
  p.gamma.resize(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    p.gamma[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
  return p;
}

void DeformationPath::validate() const {
  if (gamma.empty()) throw InvalidArgument("deformation path has no points");
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!(gamma[i] >= 0.0 && gamma[i] <= 1.0))
      throw InvalidArgument("path parameter outside [0, 1]");
    if (i > 0 && !(gamma[i] > gamma[i - 1]))
      throw InvalidArgument("path parameter must be strictly increasing");
  }
}

namespace {

std::vector<Mat3> path_gradients(const DeformationPath& path) {
  path.validate();
  std::vector<Mat3> out;
  out.reserve(path.gamma.size());
  for (double g : path.gamma) {
    const Mat3 F = path_gradient(path.kind, g);
    if (!(F.determinant() > 0.0))
      throw NonPhysicalDeformation(path_name(path.kind) + " path has det F <= 0");
    out.push_back(F);
  }
  return out;
}

}  // namespace

std::vector<double> energy_along_path(const DeformationPath& path, const Eigen::VectorXd& theta,
                                      const FeatureLibrary& library) {
  if (theta.size() != library.size())
    throw InvalidArgument("parameter vector does not match the feature library");
  std::vector<double> W;
  for (const Mat3& F : path_gradients(path)) W.push_back(library.strain_energy(F, theta));
  return W;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= values.size()) return values.back();
  const double t = pos - static_cast<double>(i);
  return values[i] + t * (values[i + 1] - values[i]);
}

EnergyBand energy_along_path(const DeformationPath& path, const Eigen::MatrixXd& draws,
                             const FeatureLibrary& library) {
  if (draws.rows() == 0) throw InvalidArgument("no parameter draws");
  if (draws.cols() != library.size())
    throw InvalidArgument("parameter draws do not match the feature library");
  if ((draws.array() < 0.0).any()) throw InvalidArgument("parameter draws must be non-negative");
  const std::vector<Mat3> Fs = path_gradients(path);

  // Features once per grid point; W for all draws is then one product.
  Eigen::MatrixXd Q(library.size(), static_cast<Eigen::Index>(Fs.size()));
  for (std::size_t g = 0; g < Fs.size(); ++g) Q.col(static_cast<Eigen::Index>(g)) = library.values(Fs[g]);
  const Eigen::MatrixXd W = draws * Q;

  EnergyBand band;
  std::vector<double> column(static_cast<std::size_t>(W.rows()));
  for (Eigen::Index g = 0; g < W.cols(); ++g) {
    for (Eigen::Index d = 0; d < W.rows(); ++d) column[static_cast<std::size_t>(d)] = W(d, g);
    band.median.push_back(percentile(column, 50.0));
    band.lo.push_back(percentile(column, 2.5));
    band.hi.push_back(percentile(column, 97.5));
  }
  return band;
}

double r_squared(const std::vector<double>& truth, const std::vector<double>& prediction) {
  if (truth.size() != prediction.size()) throw InvalidArgument("R^2 series differ in length");
  if (truth.size() < 2) throw InvalidArgument("R^2 needs at least two points");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - prediction[i]) * (truth[i] - prediction[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw NumericalError("R^2 is undefined for a constant reference series");
  return 1.0 - ss_res / ss_tot;
}

std::vector<PathComparison> compare_energy_paths(const Eigen::VectorXd& theta_true,
                                                 const Eigen::MatrixXd& draws,
                                                 const FeatureLibrary& library, int points) {
  std::vector<PathComparison> out;
  for (PathKind k : all_path_kinds()) {
    PathComparison c;
    c.path = DeformationPath::uniform(k, points);
    c.truth = energy_along_path(c.path, theta_true, library);
    c.band = energy_along_path(c.path, draws, library);
    c.r2 = r_squared(c.truth, c.band.median);

    Eigen::MatrixXd Q(library.size(), points);
    for (int g = 0; g < points; ++g)
      Q.col(g) = library.values(path_gradient(k, c.path.gamma[static_cast<std::size_t>(g)]));
    c.min_energy = (draws * Q).minCoeff();
    out.push_back(std::move(c));
  }
  return out;
}

std::string energy_csv(const std::vector<PathComparison>& paths) {
  std::ostringstream os;
  os << "path,gamma,W_true,W_med,W_lo,W_hi\n";
  for (const auto& c : paths) {
    for (std::size_t g = 0; g < c.path.gamma.size(); ++g) {
      os << path_name(c.path.kind) << ',' << format_double(c.path.gamma[g]) << ','
         << format_double(c.truth[g]) << ',' << format_double(c.band.median[g]) << ','
         << format_double(c.band.lo[g]) << ',' << format_double(c.band.hi[g]) << '\n';
    }
  }
  return os.str();
}

OlsBayesReport compare_ols_bayes(const EquilibriumSystem& system,
                                 const PosteriorEnsemble& ensemble) {
  if (ensemble.width != system.num_cols())
    throw InvalidArgument("posterior width does not match the system");
  OlsBayesReport r;
  r.n_features = system.n_features;
  r.n_segments = system.n_segments;
  r.ols = ols_solve(system);
  r.bayes_mean = ensemble.theta_mean;
  r.bayes_std = ensemble.theta_std;
  r.inclusion = ensemble.inclusion;
  for (Eigen::Index i = 0; i < r.ols.size(); ++i)
    if (r.ols[i] < 0.0) r.ols_negative.push_back(static_cast<int>(i));
  for (const auto& d : ensemble.draws) r.bayes_negative_draws += (d.theta.array() < 0.0).any();
  return r;
}

std::string OlsBayesReport::table() const {
  std::ostringstream os;
  os << "segment feature ols bayes_mean bayes_std inclusion ols_negative\n";
  const int nf = std::max(n_features, 1);
  for (Eigen::Index i = 0; i < ols.size(); ++i) {
    os << i / nf + 1 << ' ' << i % nf + 1 << ' ' << format_double(ols[i]) << ' '
       << format_double(bayes_mean[i]) << ' ' << format_double(bayes_std[i]) << ' '
       << format_double(inclusion[i]) << ' ' << (ols[i] < 0.0 ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace plateid
