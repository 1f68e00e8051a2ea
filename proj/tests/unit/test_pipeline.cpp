#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "plateid/error.hpp"
#include "plateid/pipeline.hpp"

using namespace plateid;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("plateid_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

PipelineConfig small(const std::string& pattern, int n) {
  PipelineConfig c;
  c.scenario = "test_" + pattern;
  c.pattern = pattern;
  c.n_divisions = n;
  c.frac_free = 0.1;
  c.sampler.chain_length = 40;
  c.sampler.burn_in = 10;
  c.sampler.chains = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("configuration round-trips through key=value text") {
  PipelineConfig c = small("split3", 12);
  c.sigma_u = 2e-3;
  c.lambda_r = 3.5;
  c.inverse_n_divisions = 11;
  c.materials = {materials::nh2_a(), MaterialParams::of({1, 0.5, 0, 0, 0, 7}), materials::isihara()};
  const fs::path dir = scratch("cfg");
  write_key_values(dir / "c.txt", c.to_key_values());
  const PipelineConfig back = load_config(dir / "c.txt");
  CHECK(back.to_key_values() == c.to_key_values());
  REQUIRE(back.materials.size() == 3);
  CHECK(back.materials[1].theta[5] == 7.0);
  CHECK(*back.inverse_n_divisions == 11);
}

TEST_CASE("configuration errors name the key") {
  auto message = [](const KeyValues& kv) {
    try {
      PipelineConfig::from_key_values(kv).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const std::string frac = message({{"subsample.frac_free", "0.5"}});
  CHECK(frac.find("subsample.frac_free") != std::string::npos);
  CHECK(frac.find("[0.02, 0.10]") != std::string::npos);
  CHECK(message({{"mesh.colour", "red"}}).find("unknown configuration key 'mesh.colour'") !=
        std::string::npos);
  CHECK(message({{"noise.sigma_u", "lots"}}).find("noise.sigma_u") != std::string::npos);
  CHECK(message({{"noise.sigma_u", "-1"}}).find("noise.sigma_u") != std::string::npos);
  CHECK(message({{"segment.lambda_flag", "0"}}).find("segment.lambda_flag") != std::string::npos);
  CHECK(message({{"pattern.name", "spiral"}}).find("unknown pattern") != std::string::npos);
  CHECK(message({{"pattern.materials", "nh2_a; 1 2 3"}}).find("pattern.materials") !=
        std::string::npos);
  CHECK(message({{"sampler.burn_in", "600"}}).find("burn_in") != std::string::npos);
  CHECK(message({{"denoise.enabled", "maybe"}}).find("denoise.enabled") != std::string::npos);
  CHECK(message({{"seed", "7"}, {"mesh.n_divisions", "12"}}).empty());
  CHECK_THROWS_AS(load_config("/nonexistent/config.txt"), ConfigError);

  PipelineConfig c = small("cross", 6);
  c.materials = {materials::nh2_a()};
  CHECK_THROWS_AS(generate_dataset(c), ConfigError);
}

TEST_CASE("stage seeds are distinct and depend on the global seed") {
  PipelineConfig a, b;
  b.seed = 2;
  std::set<std::uint64_t> seen;
  for (const char* label : {"noise", "denoise", "grow", "subsample", "sampler"}) {
    seen.insert(stage_seed(a, label));
    CHECK(stage_seed(a, label) != stage_seed(b, label));
  }
  CHECK(seen.size() == 5);
}

TEST_CASE("generated bundle records the load program and is reproducible") {
  PipelineConfig c = small("cross", 8);
  c.sigma_u = 1e-3;
  c.output = scratch("gen_a");
  cmd_generate(c);
  const KeyValues info = read_key_values(c.output / "data" / "forward.txt");
  CHECK(info.at("lambda_x") == "1.6");
  CHECK(info.at("lambda_y") == "2.2");
  const KeyValues manifest = read_key_values(c.output / "data" / "manifest.txt");
  CHECK(manifest.at("load.lambda_x") == "1.6");
  CHECK(manifest.count("derived_seed.noise") == 1);

  PipelineConfig c2 = c;
  c2.output = scratch("gen_b");
  cmd_generate(c2);
  for (const auto& entry : fs::directory_iterator(c.output / "data")) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.txt") continue;  // records the output path
    CHECK_MESSAGE(slurp(entry.path()) == slurp(c2.output / "data" / name), name);
  }

  const Dataset d = read_dataset(c.output / "data");
  const Dataset mem = generate_dataset(c);
  CHECK(d.truth == mem.truth);
  CHECK(d.observed.values == mem.observed.values);
  CHECK(d.clean.values != d.observed.values);
}

TEST_CASE("non-native mesh bundle lives on the inverse mesh") {
  PipelineConfig c = small("cross", 12);
  c.inverse_n_divisions = 11;
  const Dataset d = generate_dataset(c);
  CHECK(d.mesh.num_elements() == 2u * 11 * 11);
  CHECK(d.truth.size() == d.mesh.num_elements());
  CHECK(d.truth.num_segments == 2);
  check_field(d.mesh, d.observed);
}

TEST_CASE("homogeneous bundle segments into one nominally homogeneous region") {
  PipelineConfig c = small("homogeneous", 10);
  c.output = scratch("homog");
  cmd_generate(c);
  cmd_segment(c);
  const KeyValues diag = read_key_values(c.output / "segment" / "diagnostics.txt");
  CHECK(diag.at("segments") == "1");
  CHECK(diag.at("nominally_homogeneous") == "true");
}

TEST_CASE("file stages reproduce the in-memory pipeline") {
  PipelineConfig c = small("cross", 10);
  c.output = scratch("stages");
  run_all(c);
  const Dataset d = generate_dataset(c);
  const SegmentationOutput s = segment_dataset(d, c);
  const Identification id = identify_materials(d, s, c);
  const PosteriorEnsemble back = read_posterior(c.output / "identify" / "posterior.txt");
  REQUIRE(back.draws.size() == id.posterior.draws.size());
  CHECK(back.theta_matrix() == id.posterior.theta_matrix());
  CHECK(back.inclusion == id.posterior.inclusion);
  CHECK(read_segment_map(c.output / "segment" / "segments.txt") == s.segments);

  const std::string summary = slurp(c.output / "identify" / "summary.txt");
  const std::string posterior = slurp(c.output / "identify" / "posterior.txt");
  cmd_identify(c);
  CHECK(slurp(c.output / "identify" / "summary.txt") == summary);
  CHECK(slurp(c.output / "identify" / "posterior.txt") == posterior);

  const std::string csv = slurp(c.output / "validate" / "energy_segment_1.csv");
  CHECK(csv.rfind("path,gamma,W_true,W_med,W_lo,W_hi", 0) == 0);
  CHECK(fs::exists(c.output / "validate" / "r2.txt"));
  CHECK(fs::exists(c.output / "validate" / "ols_vs_bayes.txt"));

  PipelineConfig serial = c;
  serial.sampler.threaded = false;
  CHECK(identify_materials(d, s, serial).posterior.theta_matrix() == id.posterior.theta_matrix());
}

TEST_CASE("missing inputs give actionable errors") {
  PipelineConfig c = small("cross", 8);
  c.output = scratch("missing");
  try {
    cmd_validate(c);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("plateid generate") != std::string::npos);
  }
  cmd_generate(c);
  cmd_segment(c);
  try {
    cmd_validate(c);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("plateid identify") != std::string::npos);
  }
}

TEST_CASE("a segment without equations after sub-sampling is an explicit error") {
  EquilibriumSystem sys;
  sys.n_features = 2;
  sys.n_segments = 2;
  sys.A = Eigen::MatrixXd::Zero(3, 4);
  sys.A.leftCols(2) << 1, 2, 3, 4, 5, 6;
  sys.b = Eigen::VectorXd::Ones(3);
  try {
    require_segment_rows(sys);
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("segment 2 has no equations") != std::string::npos);
  }
  sys.A(1, 3) = 1e-3;
  CHECK_NOTHROW(require_segment_rows(sys));
}

TEST_CASE("segmentation failure carries a threshold hint") {
  PipelineConfig c = small("cross", 6);
  c.lambda_flag = 1e-12;
  const Dataset d = generate_dataset(c);
  try {
    segment_dataset(d, c);
    FAIL("expected an error");
  } catch (const SegmentationFailure& e) {
    CHECK(std::string(e.what()).find("segment.lambda_flag") != std::string::npos);
  }
}

TEST_CASE("posterior files reject malformed content") {
  const fs::path dir = scratch("post");
  write_text(dir / "p.txt", "chains 1 per_chain 2 width 1\n0 1 1 0.5 2 1\n");
  CHECK_THROWS_AS(read_posterior(dir / "p.txt"), FormatError);
  write_text(dir / "p.txt", "chains 1 per_chain 1 width 1\n0 1 1 0.5 2 3\n");
  CHECK_THROWS_AS(read_posterior(dir / "p.txt"), FormatError);
  write_text(dir / "p.txt", "chains 1 per_chain 1 width 1\n0 1 1 0.5 2 1\n");
  const PosteriorEnsemble e = read_posterior(dir / "p.txt");
  CHECK(e.theta_mean[0] == 2.0);
  CHECK(e.inclusion[0] == 1.0);
}

}
