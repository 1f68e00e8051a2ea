#pragma once

#include <cstdint>
#include <vector>

#include "plateid/assembly.hpp"
#include "plateid/constitutive.hpp"
#include "plateid/mesh.hpp"

namespace plateid {

/// Displacement-controlled biaxial stretch of the plate edges, applied
/// linearly over `steps` increments.
struct LoadProgram {
  double lambda_x = 1.6;
  double lambda_y = 2.2;
  int steps = 6;

  void validate() const;
};

struct NewtonOptions {
  int max_iterations = 40;
  int max_bisections = 6;
  /// Relative residual tolerance; the absolute tolerance is this times the
  /// mean volumetric coefficient times the mean element volume.
  double relative_tolerance = 1e-9;
};

struct ForwardResult {
  DisplacementField field;           // final load step
  BoundaryForces forces;             // reactions summed over each boundary set
  std::vector<double> step_energy;   // total stored energy after each step
  std::vector<std::size_t> pinned;   // nodes whose z displacement is held at 0
  double tolerance = 0.0;            // absolute residual tolerance used
  double residual = 0.0;             // final max-norm of the free residual
  int iterations = 0;                // total Newton iterations
};

/// Bottom-face nodes whose z dof is fixed to remove the rigid z translation
/// and the two zero-energy z modes of single-point wedges.
std::vector<std::size_t> pinned_nodes(const WedgeMesh& mesh);

/// Quasi-static Newton solve of the discrete balance with the same
/// single-point quadrature as the inverse assembly. Edge nodes follow
/// X -> (lambda_x X, lambda_y Y) in-plane; every other dof is free apart from
/// the pinned z dofs. Throws NonConvergence when a step cannot be completed
/// after the allowed bisections.
ForwardResult forward_solve(const WedgeMesh& mesh, const SegmentMap& segments,
                            const std::vector<MaterialParams>& params, const LoadProgram& load,
                            const FeatureLibrary& library = FeatureLibrary::standard(),
                            const NewtonOptions& options = {});

/// Adds iid N(0, sigma_u^2) noise to every dof.
DisplacementField add_noise(const DisplacementField& field, double sigma_u, std::uint64_t seed);

/// Smooth through-thickness part of a solved field, for transfer to another
/// mesh. Single-point wedges see the top-minus-bottom nodal difference only
/// through its triangle average, so the solved nodal thickness can oscillate
/// cell to cell while every element's F is smooth. This keeps the mid-surface
/// displacement and resets each node's top-minus-bottom difference to
/// thickness * (area-weighted mean of F e_3 over its elements - e_3).
DisplacementField recover_through_thickness(const WedgeMesh& mesh, const DisplacementField& field);

/// Total stored energy sum_e V_e W(F_e).
double stored_energy(const WedgeMesh& mesh, const DisplacementField& field,
                     const SegmentMap& segments, const FeatureLibrary& library,
                     const std::vector<MaterialParams>& params);

}  // namespace plateid
