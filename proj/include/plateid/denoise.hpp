#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "plateid/mesh.hpp"

namespace plateid {

struct KrrOptions {
  /// RBF length scales, mm. Empty selects {1, 1.5, 2.5, 4} times the mean
  /// in-plane node spacing.
  std::vector<double> bandwidths;
  /// Ridge values relative to the unit kernel diagonal. Empty selects
  /// 1e-6 .. 10 in decades.
  std::vector<double> ridges;
  /// Number of (bandwidth, ridge) pairs drawn without replacement from the
  /// grid product.
  int trials = 16;
  std::uint64_t seed = 0;
  /// Per-dof noise standard deviation, mm. Estimated from the data when unset.
  std::optional<double> noise_level;
};

enum class KrrChannel { InPlaneX, InPlaneY, BottomZ, TopZ };

struct KrrFit {
  KrrChannel channel = KrrChannel::InPlaneX;
  double bandwidth = 0.0;  // 0 when the channel was kept as measured
  double ridge = 0.0;
  double risk = 0.0;       // estimated mean squared error per node, mm^2
  double removed_std = 0.0;
};

struct KrrReport {
  std::vector<KrrFit> fits;
  /// Noise standard deviation used for the risk estimates.
  double sigma_estimate = 0.0;
};

/// Bottom/top node pairs sharing in-plane coordinates, ordered by bottom node.
std::vector<std::pair<std::size_t, std::size_t>> vertical_pairs(const WedgeMesh& mesh);

/// Noise level from the in-plane displacement difference across vertical
/// node pairs. A membrane deformation moves both faces identically in-plane,
/// so each difference is pure noise with variance 2 sigma^2; the median
/// absolute deviation keeps the estimate robust.
double paired_noise_estimate(const WedgeMesh& mesh, const DisplacementField& field);

/// Kernel ridge regression on the in-plane reference coordinates with an
/// RBF kernel. In-plane components are first averaged over each vertical
/// pair; z is fitted on each face separately. Every channel has an affine
/// trend removed, then (bandwidth, ridge) is chosen from a random subset of
/// the grid by Stein's unbiased risk estimate, with the unsmoothed channel as
/// one of the candidates, so a channel keeps its pair average (in-plane) or
/// measured value (z) whenever no fit is expected to lower its error. Faces
/// larger than 6000 nodes are rejected.
DisplacementField denoise_krr(const WedgeMesh& mesh, const DisplacementField& noisy,
                              const KrrOptions& options = {}, KrrReport* report = nullptr);

}  // namespace plateid
