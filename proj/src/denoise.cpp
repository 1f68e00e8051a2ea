#include "plateid/denoise.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "plateid/error.hpp"
#include "plateid/rng.hpp"

namespace plateid {

namespace {

constexpr std::size_t kMaxFaceNodes = 6000;

struct Spectrum {
  Eigen::MatrixXd U;
  Eigen::VectorXd d;
};

Spectrum rbf_spectrum(const Eigen::MatrixX2d& X, double bandwidth) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  const double c = -0.5 / (bandwidth * bandwidth);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = std::exp(c * (X.row(i) - X.row(j)).squaredNorm());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.info() != Eigen::Success) throw NumericalError("kernel eigendecomposition failed");
  // Round-off can leave tiny negative eigenvalues on a PSD kernel.
  return {es.eigenvectors(), es.eigenvalues().cwiseMax(0.0)};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> vertical_pairs(const WedgeMesh& mesh) {
  std::vector<std::size_t> top(mesh.num_nodes(), mesh.num_nodes());
  std::vector<char> is_bottom(mesh.num_nodes(), 0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& el = mesh.element(e);
    for (std::size_t i = 0; i < 3; ++i) {
      top[el[i]] = el[i + 3];
      is_bottom[el[i]] = 1;
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < mesh.num_nodes(); ++a)
    if (is_bottom[a]) out.emplace_back(a, top[a]);
  return out;
}

double paired_noise_estimate(const WedgeMesh& mesh, const DisplacementField& field) {
  check_field(mesh, field);
  std::vector<double> r;
  for (const auto& [a, b] : vertical_pairs(mesh)) {
    const Vec3 d = field[a] - field[b];
    r.push_back(std::abs(d.x()));
    r.push_back(std::abs(d.y()));
  }
  return 1.4826 * median(std::move(r)) / std::sqrt(2.0);
}

DisplacementField denoise_krr(const WedgeMesh& mesh, const DisplacementField& noisy,
                              const KrrOptions& options, KrrReport* report) {
  check_field(mesh, noisy);
  if (mesh.num_nodes() < 10) throw InvalidArgument("denoising needs at least 10 nodes");
  if (options.trials < 1) throw ConfigError("denoise.trials must be at least 1");
  if (options.noise_level && !(*options.noise_level >= 0.0))
    throw ConfigError("denoise.noise_level must be non-negative");

  const auto pairs = vertical_pairs(mesh);
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  if (pairs.size() > kMaxFaceNodes) {
    throw InvalidArgument("face has " + std::to_string(pairs.size()) +
                          " nodes; dense kernel denoising supports at most " +
                          std::to_string(kMaxFaceNodes));
  }

  double area = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) area += mesh.element_area(e);
  const double spacing = std::sqrt(area / static_cast<double>(n));

  std::vector<double> bandwidths = options.bandwidths;
  if (bandwidths.empty()) {
    for (double m : {1.0, 1.5, 2.5, 4.0}) bandwidths.push_back(m * spacing);
  }
  std::vector<double> ridges = options.ridges;
  if (ridges.empty()) {
    for (int p = -6; p <= 1; ++p) ridges.push_back(std::pow(10.0, p));
  }
  for (double b : bandwidths)
    if (!(b > 0.0)) throw ConfigError("denoise bandwidths must be positive");
  for (double r : ridges)
    if (!(r > 0.0)) throw ConfigError("denoise ridges must be positive");

  KrrReport rep;
  rep.sigma_estimate = options.noise_level ? *options.noise_level : paired_noise_estimate(mesh, noisy);
  const double s2 = rep.sigma_estimate * rep.sigma_estimate;

  // Channels: in-plane x and y averaged over each vertical pair (noise
  // variance sigma^2 / 2), then z on the bottom and on the top face.
  Eigen::MatrixX2d X(n, 2);
  Eigen::MatrixXd Y(n, 4);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto [a, b] = pairs[static_cast<std::size_t>(k)];
    X.row(k) = mesh.node(a).head<2>().transpose();
    Y(k, 0) = 0.5 * (noisy[a].x() + noisy[b].x());
    Y(k, 1) = 0.5 * (noisy[a].y() + noisy[b].y());
    Y(k, 2) = noisy[a].z();
    Y(k, 3) = noisy[b].z();
  }
  const std::array<double, 4> var{0.5 * s2, 0.5 * s2, s2, s2};

  Eigen::MatrixXd T(n, 3);
  T.col(0).setOnes();
  T.rightCols(2) = X;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> trend_qr(T);
  Eigen::MatrixXd trend(n, 4);
  for (int c = 0; c < 4; ++c) trend.col(c) = T * trend_qr.solve(Y.col(c));
  const Eigen::MatrixXd R = Y - trend;

  // Candidates start from "keep the channel as is" (risk n * var); kernel
  // fits are compared by Stein's unbiased risk estimate, which for a
  // linear smoother S is |y - S y|^2 - n var + 2 var tr(S). The affine
  // trend's three degrees of freedom are common to every candidate.
  struct Best {
    double risk = 0.0;
    double bandwidth = 0.0, ridge = 0.0;
    Eigen::VectorXd fitted;
  };
  std::array<Best, 4> best;
  for (int c = 0; c < 4; ++c) best[c].risk = static_cast<double>(n) * var[c];

  if (s2 > 0.0) {
    std::vector<std::pair<std::size_t, std::size_t>> grid;
    for (std::size_t i = 0; i < bandwidths.size(); ++i)
      for (std::size_t j = 0; j < ridges.size(); ++j) grid.emplace_back(i, j);
    Rng rng(options.seed);
    std::shuffle(grid.begin(), grid.end(), rng);
    grid.resize(std::min(grid.size(), static_cast<std::size_t>(options.trials)));
    std::map<std::size_t, std::vector<std::size_t>> by_bandwidth;
    for (const auto& [i, j] : grid) by_bandwidth[i].push_back(j);

    for (const auto& [bi, ridge_idx] : by_bandwidth) {
      const Spectrum sp = rbf_spectrum(X, bandwidths[bi]);
      const Eigen::MatrixXd Ry = sp.U.transpose() * R;
      for (std::size_t rj : ridge_idx) {
        const double lam = ridges[rj];
        const Eigen::ArrayXd shrink = lam / (sp.d.array() + lam);
        const double trace = static_cast<double>(n) - shrink.sum();
        for (int c = 0; c < 4; ++c) {
          const double rss = (shrink * Ry.col(c).array()).square().sum();
          const double risk = rss - static_cast<double>(n) * var[c] + 2.0 * var[c] * trace;
          if (risk < best[c].risk) {
            best[c].risk = risk;
            best[c].bandwidth = bandwidths[bi];
            best[c].ridge = lam;
            best[c].fitted = sp.U * ((1.0 - shrink) * Ry.col(c).array()).matrix();
          }
        }
      }
    }
  }

  Eigen::MatrixXd out_y = Y;
  for (int c = 0; c < 4; ++c) {
    double removed_std = 0.0;
    if (best[c].fitted.size() > 0) {
      out_y.col(c) = trend.col(c) + best[c].fitted;
      const Eigen::ArrayXd removed = (Y.col(c) - out_y.col(c)).array();
      removed_std = std::sqrt((removed - removed.mean()).square().mean());
    }
    rep.fits.push_back({static_cast<KrrChannel>(c), best[c].bandwidth, best[c].ridge,
                        best[c].risk / static_cast<double>(n), removed_std});
  }

  DisplacementField out = noisy;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto [a, b] = pairs[static_cast<std::size_t>(k)];
    out[a] = Vec3(out_y(k, 0), out_y(k, 1), out_y(k, 2));
    out[b] = Vec3(out_y(k, 0), out_y(k, 1), out_y(k, 3));
  }
  if (report) *report = std::move(rep);
  return out;
}

}  // namespace plateid
