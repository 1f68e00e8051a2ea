#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plateid/assembly.hpp"
#include "plateid/constitutive.hpp"
#include "plateid/denoise.hpp"
#include "plateid/forward.hpp"
#include "plateid/io.hpp"
#include "plateid/mesh.hpp"
#include "plateid/sampler.hpp"
#include "plateid/segmentation.hpp"
#include "plateid/validation.hpp"

namespace plateid {

/// One scenario, read from flat "section.key = value" text. Every key has a
/// default; unknown keys are rejected.
struct PipelineConfig {
  std::string scenario = "scenario";
  std::uint64_t seed = 1;
  fs::path output = "out";

  double side_length = 50.0;
  double thickness = 1.0;
  int n_divisions = 40;
  /// Mesh used for the inversion when it differs from the forward mesh.
  std::optional<int> inverse_n_divisions;

  std::string pattern = "cross";
  /// Per-segment parameters; empty selects the pattern's default materials.
  std::vector<MaterialParams> materials;

  LoadProgram load;
  double sigma_u = 0.0;

  /// KRR denoising before segmentation, applied only when sigma_u > 0.
  bool denoise = true;
  int denoise_trials = 16;

  double lambda_flag = 2.0;
  std::optional<double> lambda_r;
  double frac_free = 0.02;
  double frac_flag = 0.2;

  SpikeSlabConfig sampler;
  int energy_points = 101;

  /// Throws ConfigError naming the offending key and its valid range.
  void validate() const;
  KeyValues to_key_values() const;
  /// Starts from the defaults and applies `kv`.
  static PipelineConfig from_key_values(const KeyValues& kv);
};

PipelineConfig load_config(const fs::path& path);

/// Default materials of the built-in patterns.
std::vector<MaterialParams> default_materials(const std::string& pattern);

/// Seed of one labelled random stream of a scenario.
std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view label);

struct Dataset {
  WedgeMesh mesh;                 // mesh of the inversion
  DisplacementField clean;
  DisplacementField observed;     // clean plus noise
  BoundaryForces forces;
  SegmentMap truth;
  std::vector<MaterialParams> params;
  ForwardResult forward;          // on the forward mesh
};

struct SegmentationOutput {
  DisplacementField field;        // the field used downstream
  ResidualField residual;
  std::vector<std::size_t> flagged;
  SegmentMap segments;
  NoiseDiagnostics diagnostics;
  std::optional<KrrReport> krr;
};

struct Identification {
  EquilibriumSystem system;       // sub-sampled heterogeneous system
  InterfaceNodes interface;
  PosteriorEnsemble posterior;
};

struct SegmentValidation {
  int segment = 0;
  int truth_segment = 0;
  std::vector<PathComparison> paths;
};

struct ValidationOutput {
  std::vector<SegmentValidation> segments;
  OlsBayesReport ols_bayes;
};

Dataset generate_dataset(const PipelineConfig& cfg);
/// Skips region growing (one segment, nothing flagged) when the residual
/// diagnostics report a nominally homogeneous plate.
SegmentationOutput segment_dataset(const Dataset& data, const PipelineConfig& cfg);
/// Throws NumericalError when some segment's column block is entirely zero.
void require_segment_rows(const EquilibriumSystem& system);
/// Throws NumericalError when a segment has no rows left after sub-sampling.
Identification identify_materials(const Dataset& data, const SegmentationOutput& seg,
                                  const PipelineConfig& cfg);
ValidationOutput validate_identification(const Dataset& data, const SegmentationOutput& seg,
                                         const Identification& id, const PipelineConfig& cfg);

/// File-mediated stages under cfg.output:
///   data/      mesh, clean and observed fields, forces, true segments and
///              parameters, manifest
///   segment/   field used, residuals, flagged nodes, segments, diagnostics
///   identify/  posterior summary and draws, OLS solution
///   validate/  energy-path CSVs per segment, R^2 summary, OLS comparison
void cmd_generate(const PipelineConfig& cfg);
void cmd_segment(const PipelineConfig& cfg);
void cmd_identify(const PipelineConfig& cfg);
void cmd_validate(const PipelineConfig& cfg);
void run_all(const PipelineConfig& cfg);

Dataset read_dataset(const fs::path& dir);
SegmentationOutput read_segmentation(const fs::path& dir, const Dataset& data);

/// Posterior draws as text: header, then one row per draw
/// "chain sigma2 nu p0 theta_1..theta_w z_1..z_w".
void write_posterior(const fs::path& path, const PosteriorEnsemble& ens);
PosteriorEnsemble read_posterior(const fs::path& path);

}  // namespace plateid
