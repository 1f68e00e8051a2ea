#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "plateid/assembly.hpp"
#include "plateid/mesh.hpp"

namespace plateid {

/// Out-of-balance nodal forces of a homogenised model, on the nodes whose
/// three dofs are all free.
struct ResidualField {
  std::vector<std::size_t> nodes;
  std::vector<Vec3> force;     // N
  std::vector<double> f_res;   // in-plane magnitude sqrt(fx^2 + fy^2)
  double mean = 0.0;           // over all entries of f_res
  double sigma = 0.0;          // population standard deviation
  Eigen::VectorXd theta;       // homogenised least-squares parameters

  std::size_t size() const { return nodes.size(); }
};

/// Fits a single-segment model with `library` (the two-term neo-Hookean
/// library by default) to the full stacked system and reports A_free theta
/// per free node.
ResidualField residual_forces(const WedgeMesh& mesh, const DisplacementField& field,
                              const BoundaryForces& forces,
                              std::optional<double> lambda_r = std::nullopt,
                              const FeatureLibrary& library = FeatureLibrary::neo_hookean());

/// Builds the summary statistics from per-node forces.
ResidualField make_residual_field(std::vector<std::size_t> nodes, std::vector<Vec3> force);

/// Nodes whose residual exceeds lambda * sigma, ascending.
std::vector<std::size_t> flag_nodes(const ResidualField& res, double lambda);

struct SegmentationResult {
  std::vector<std::size_t> flagged;
  /// Element lists in creation order; each starts with its seed element.
  std::vector<std::vector<std::size_t>> segments;
  std::vector<std::size_t> unassigned;
  double lambda = 0.0;
};

/// Seeded island growth. A random element without flagged nodes starts a
/// segment, which grows over node-sharing neighbours; elements touching a
/// flagged node are absorbed (when they keep at least one unflagged node)
/// but never expanded. Repeats until no seed is left. Throws
/// SegmentationFailure when every element touches a flagged node.
SegmentationResult grow_segments(const WedgeMesh& mesh, const std::vector<std::size_t>& flagged,
                                 std::uint64_t seed);

/// Attaches unassigned elements to the adjacent segment sharing the most
/// unflagged nodes (ties to the lower segment index), repeatedly, and
/// numbers segments by their smallest element.
SegmentMap resolve_segments(const WedgeMesh& mesh, const SegmentationResult& result);

struct NoiseDiagnostics {
  double mu_over_sigma = 0.0;
  double sigma_over_rmax = 0.0;
  bool nominally_homogeneous = false;
};

/// Dimensionless residual statistics; "nominally homogeneous" when
/// sigma / R_max <= 1e-5 and mu / sigma >= 1. All-zero residuals give (0, 0).
NoiseDiagnostics noise_diagnostics(const ResidualField& res, const BoundaryForces& forces);

/// Flagged nodes grouped by the set of segments adjacent to each node, with
/// the in-plane residual of the heterogeneous model `theta` on `system`.
InterfaceNodes interface_nodes(const WedgeMesh& mesh, const SegmentMap& segments,
                               const std::vector<std::size_t>& flagged,
                               const EquilibriumSystem& system, const Eigen::VectorXd& theta);

/// Fraction of elements whose segment differs from the reference after
/// mapping each segment to the reference segment it overlaps most.
double misassignment(const SegmentMap& found, const SegmentMap& truth);

/// For every segment of `found`, the reference segment it overlaps most.
std::vector<int> match_segments(const SegmentMap& found, const SegmentMap& truth);

}  // namespace plateid
