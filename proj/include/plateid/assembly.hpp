#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plateid/constitutive.hpp"
#include "plateid/mesh.hpp"

namespace plateid {

/// Free/fixed split of the 3 n_n nodal dofs. Fixed dofs are the in-plane
/// (x, y) components of every node on a boundary set; z is free everywhere.
struct DofPartition {
  std::vector<char> fixed;  // indexed 3*a + i

  static DofPartition plate(const WedgeMesh& mesh);

  bool is_fixed(std::size_t a, int i) const { return fixed[3 * a + i] != 0; }
  /// Nodes whose three dofs are all free.
  std::vector<std::size_t> free_nodes() const;
  std::size_t num_free() const;
};

/// Aggregate reaction force per boundary set, N. Row k <-> boundary k.
struct BoundaryForces {
  std::vector<std::string> names;
  Eigen::MatrixX3d R;

  std::size_t size() const { return names.size(); }
  double max_abs() const { return R.size() ? R.cwiseAbs().maxCoeff() : 0.0; }
};

struct RowTag {
  enum class Kind { Free, Fixed };
  Kind kind = Kind::Free;
  std::size_t index = 0;  // node for free rows, boundary for fixed rows
  int dir = 0;            // 0, 1, 2 = x, y, z
  bool operator==(const RowTag&) const = default;
};

/// Linear system A theta = b; column block k (width n_features) holds the
/// parameters of segment k+1.
struct EquilibriumSystem {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<RowTag> rows;
  double lambda_r = 1.0;
  int n_features = 0;
  int n_segments = 0;

  Eigen::Index num_rows() const { return A.rows(); }
  Eigen::Index num_cols() const { return A.cols(); }
  Eigen::Index num_free_rows() const;
  Eigen::Index num_fixed_rows() const { return num_rows() - num_free_rows(); }
};

/// Shape-function gradients (row a = grad N^a, reference frame) of one wedge
/// at its centroid, and its volume.
struct ElementGeometry {
  Eigen::Matrix<double, 6, 3> grad;
  double volume = 0.0;
};

ElementGeometry element_geometry(const WedgeMesh& mesh, std::size_t element);

struct ElementKinematics {
  Mat3 F;
  Eigen::Matrix<double, 6, 3> grad;
  double volume = 0.0;
};

/// F = I + sum_a u^a (x) grad N^a at the single centroid quadrature point.
/// Throws ElementInversion when det(F) <= 0.
ElementKinematics element_kinematics(const WedgeMesh& mesh, const DisplacementField& field,
                                     std::size_t element);

/// Rows for every free dof, ordered by (node, direction); b = 0.
EquilibriumSystem assemble_free_rows(const WedgeMesh& mesh, const DisplacementField& field,
                                     const SegmentMap& segments, const FeatureLibrary& library,
                                     const DofPartition& dofs);

/// 3 n_b rows (boundary-major, then x, y, z); b = R.
EquilibriumSystem assemble_fixed_rows(const WedgeMesh& mesh, const DisplacementField& field,
                                      const SegmentMap& segments, const FeatureLibrary& library,
                                      const BoundaryForces& forces);

/// Default lambda_r: ||A_free||_F / ||A_fix||_F (1 when A_fix vanishes).
double balanced_lambda_r(const EquilibriumSystem& free_part, const EquilibriumSystem& fixed_part);

/// Stacks [A_free; lambda_r A_fix], [0; lambda_r b_fix].
EquilibriumSystem combine(const EquilibriumSystem& free_part, const EquilibriumSystem& fixed_part,
                          std::optional<double> lambda_r = std::nullopt);

/// Convenience: free rows + fixed rows + combine with the plate partition.
EquilibriumSystem assemble_system(const WedgeMesh& mesh, const DisplacementField& field,
                                  const SegmentMap& segments, const FeatureLibrary& library,
                                  const BoundaryForces& forces,
                                  std::optional<double> lambda_r = std::nullopt);

/// Flagged interface nodes grouped by the inter-segment boundary they lie on.
struct InterfaceNodes {
  std::vector<std::size_t> nodes;
  std::vector<double> residual;      // heterogeneous-model residual norm per node
  std::vector<std::uint64_t> group;  // one id per inter-segment boundary
};

/// Row sub-sampling: a uniform random fraction of the non-flagged nodes
/// carrying free rows (all their free rows kept), the `frac_flag` fraction
/// of each interface group with the smallest residual, and every fixed row.
/// Counts are floor(fraction * count), at least one per category.
EquilibriumSystem subsample(const EquilibriumSystem& system, const InterfaceNodes& interface,
                            double frac_free, double frac_flag, std::uint64_t seed);

/// Least-squares solution through column-equilibrated, column-pivoted QR.
/// Throws SingularSystem on rank deficiency or a vanishing right-hand side.
Eigen::VectorXd ols_solve(const EquilibriumSystem& system);
Eigen::VectorXd ols_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

/// Per-node force vectors A_free theta read back from the free rows. Nodes
/// without free rows get zero; `complete[a]` is set when all three rows of
/// node a are present.
struct NodalForces {
  std::vector<Vec3> force;
  std::vector<char> complete;
};
NodalForces free_row_forces(const EquilibriumSystem& system, const Eigen::VectorXd& theta,
                            std::size_t num_nodes);

/// Internal nodal forces sum_e V P(F_e) grad N^a for per-segment parameters.
std::vector<Vec3> internal_forces(const WedgeMesh& mesh, const DisplacementField& field,
                                  const SegmentMap& segments, const FeatureLibrary& library,
                                  const std::vector<MaterialParams>& params);

/// Stacks per-segment parameters into one column vector.
Eigen::VectorXd stack_params(const std::vector<MaterialParams>& params);

}  // namespace plateid
