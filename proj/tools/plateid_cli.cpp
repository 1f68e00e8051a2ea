// Command-line driver: generate, segment, identify, validate, run-all.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "plateid/error.hpp"
#include "plateid/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kSegmentation = 4, kOther = 1 };

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_flag, frac_free, frac_flag;
  std::optional<int> chains, chain_length, burn_in;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "scenario file (key=value lines)");
    app->add_option("--out", out, "output directory (overrides 'output')");
    app->add_option("--seed", seed, "global seed");
    app->add_option("--lambda-flag", lambda_flag, "residual flag threshold in sigma units");
    app->add_option("--frac-free", frac_free, "fraction of free nodes kept, [0.02, 0.10]");
    app->add_option("--frac-flag", frac_flag, "fraction of flagged nodes kept per interface");
    app->add_option("--chains", chains, "Gibbs chains");
    app->add_option("--chain-length", chain_length, "sweeps per chain");
    app->add_option("--burn-in", burn_in, "discarded sweeps per chain");
  }

  plateid::PipelineConfig resolve() const {
    plateid::PipelineConfig c = config.empty() ? plateid::PipelineConfig{} : plateid::load_config(config);
    if (out) c.output = *out;
    if (seed) c.seed = *seed;
    if (lambda_flag) c.lambda_flag = *lambda_flag;
    if (frac_free) c.frac_free = *frac_free;
    if (frac_flag) c.frac_flag = *frac_flag;
    if (chains) c.sampler.chains = *chains;
    if (chain_length) c.sampler.chain_length = *chain_length;
    if (burn_in) c.sampler.burn_in = *burn_in;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation and constitutive identification for heterogeneous hyperelastic plates"};
  app.require_subcommand(1);
  Overrides opts;

  using Stage = void (*)(const plateid::PipelineConfig&);
  const std::pair<const char*, Stage> stages[] = {
      {"generate", plateid::cmd_generate},
      {"segment", plateid::cmd_segment},
      {"identify", plateid::cmd_identify},
      {"validate", plateid::cmd_validate},
      {"run-all", plateid::run_all},
  };
  const char* help[] = {
      "forward-solve the scenario and write the dataset bundle",
      "denoise, compute residual forces and grow material segments",
      "assemble the segmented system and sample the posterior",
      "energy-path and OLS-vs-posterior reports",
      "generate, segment, identify and validate",
  };
  Stage chosen = nullptr;
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    CLI::App* sub = app.add_subcommand(stages[i].first, help[i]);
    opts.attach(sub);
    sub->callback([&chosen, f = stages[i].second] { chosen = f; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const plateid::PipelineConfig cfg = opts.resolve();
    chosen(cfg);
  } catch (const plateid::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const plateid::FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfig;
  } catch (const plateid::SegmentationFailure& e) {
    std::cerr << "segmentation failed: " << e.what() << "\n";
    return kSegmentation;
  } catch (const plateid::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
