#include "plateid/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "plateid/error.hpp"
#include "plateid/rng.hpp"

namespace plateid {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(text.substr(used)).size() != 0 || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(text.substr(used)).size() != 0)
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < -1000000000LL || v > 1000000000LL) throw ConfigError(key + ": value out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

MaterialParams parse_material(const std::string& key, const std::string& text) {
  static const std::map<std::string, std::function<MaterialParams()>> named{
      {"nh2_a", materials::nh2_a},
      {"nh2_b", materials::nh2_b},
      {"nh2_stiff", materials::nh2_stiff},
      {"isihara", materials::isihara},
      {"haines_wilson", materials::haines_wilson}};
  const std::string t = trim(text);
  if (auto it = named.find(t); it != named.end()) return it->second();
  std::istringstream is(t);
  std::vector<double> values;
  std::string tok;
  while (is >> tok) values.push_back(parse_double(key, tok));
  if (values.size() != 6) {
    throw ConfigError(key + ": each material is a name (nh2_a, nh2_b, nh2_stiff, isihara, "
                            "haines_wilson) or six numbers, got '" + t + "'");
  }
  return MaterialParams(Eigen::Map<Eigen::VectorXd>(values.data(), 6));
}

std::string format_material(const MaterialParams& p) {
  std::string s;
  for (Eigen::Index i = 0; i < p.theta.size(); ++i) s += (i ? " " : "") + format_double(p.theta[i]);
  return s;
}

void require(bool ok, const std::string& key, const std::string& range, double value) {
  if (!ok)
    throw ConfigError(key + " must be " + range + ", got " + format_double(value));
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::vector<MaterialParams> default_materials(const std::string& pattern) {
  if (pattern == "cross") return {materials::nh2_a(), materials::nh2_b()};
  if (pattern == "split3")
    return {materials::nh2_stiff(), materials::isihara(), materials::haines_wilson()};
  if (pattern == "multi_inclusion") {
    return {materials::isihara(), materials::nh2_b(), materials::haines_wilson(),
            materials::nh2_a()};
  }
  if (pattern == "homogeneous") return {materials::nh2_a()};
  return {};
}

void PipelineConfig::validate() const {
  if (scenario.empty()) throw ConfigError("scenario must not be empty");
  if (output.empty()) throw ConfigError("output must not be empty");
  require(side_length > 0.0, "mesh.side_length", "positive", side_length);
  require(thickness > 0.0, "mesh.thickness", "positive", thickness);
  require(n_divisions >= 2 && n_divisions <= 400, "mesh.n_divisions", "in [2, 400]", n_divisions);
  if (inverse_n_divisions) {
    require(*inverse_n_divisions >= 2 && *inverse_n_divisions <= 400, "mesh.inverse_n_divisions",
            "in [2, 400]", *inverse_n_divisions);
  }
  (void)parse_pattern(pattern);
  if (materials.empty() && default_materials(pattern).empty())
    throw ConfigError("pattern.materials is required for pattern '" + pattern + "'");
  for (std::size_t k = 0; k < materials.size(); ++k) {
    const auto& t = materials[k].theta;
    const std::string key = "pattern.materials[" + std::to_string(k + 1) + "]";
    if (t.size() != 6) throw ConfigError(key + " must have six coefficients");
    require(t.minCoeff() >= 0.0, key, "non-negative", t.minCoeff());
    require(t[5] > 0.0, key + " volumetric coefficient", "positive", t[5]);
  }
  require(load.lambda_x > 0.0, "load.lambda_x", "positive", load.lambda_x);
  require(load.lambda_y > 0.0, "load.lambda_y", "positive", load.lambda_y);
  require(load.steps >= 1, "load.steps", "at least 1", load.steps);
  require(sigma_u >= 0.0, "noise.sigma_u", "non-negative", sigma_u);
  require(denoise_trials >= 1, "denoise.trials", "at least 1", denoise_trials);
  require(lambda_flag > 0.0, "segment.lambda_flag", "positive", lambda_flag);
  if (lambda_r) require(*lambda_r > 0.0, "segment.lambda_r", "positive", *lambda_r);
  require(frac_free >= 0.02 && frac_free <= 0.10, "subsample.frac_free", "in [0.02, 0.10]",
          frac_free);
  require(frac_flag > 0.0 && frac_flag <= 1.0, "subsample.frac_flag", "in (0, 1]", frac_flag);
  sampler.validate();
  require(energy_points >= 2, "validate.points", "at least 2", energy_points);
}

KeyValues PipelineConfig::to_key_values() const {
  KeyValues kv;
  kv["scenario"] = scenario;
  kv["seed"] = std::to_string(seed);
  kv["output"] = output.string();
  kv["mesh.side_length"] = format_double(side_length);
  kv["mesh.thickness"] = format_double(thickness);
  kv["mesh.n_divisions"] = std::to_string(n_divisions);
  if (inverse_n_divisions) kv["mesh.inverse_n_divisions"] = std::to_string(*inverse_n_divisions);
  kv["pattern.name"] = pattern;
  std::string mats;
  for (const auto& m : materials.empty() ? default_materials(pattern) : materials)
    mats += (mats.empty() ? "" : "; ") + format_material(m);
  kv["pattern.materials"] = mats;
  kv["load.lambda_x"] = format_double(load.lambda_x);
  kv["load.lambda_y"] = format_double(load.lambda_y);
  kv["load.steps"] = std::to_string(load.steps);
  kv["noise.sigma_u"] = format_double(sigma_u);
  kv["denoise.enabled"] = denoise ? "true" : "false";
  kv["denoise.trials"] = std::to_string(denoise_trials);
  kv["segment.lambda_flag"] = format_double(lambda_flag);
  if (lambda_r) kv["segment.lambda_r"] = format_double(*lambda_r);
  kv["subsample.frac_free"] = format_double(frac_free);
  kv["subsample.frac_flag"] = format_double(frac_flag);
  kv["sampler.chains"] = std::to_string(sampler.chains);
  kv["sampler.chain_length"] = std::to_string(sampler.chain_length);
  kv["sampler.burn_in"] = std::to_string(sampler.burn_in);
  kv["sampler.tmvn_sweeps"] = std::to_string(sampler.tmvn_sweeps);
  kv["sampler.a_nu"] = format_double(sampler.a_nu);
  kv["sampler.b_nu"] = format_double(sampler.b_nu);
  kv["sampler.a_sigma"] = format_double(sampler.a_sigma);
  kv["sampler.b_sigma"] = format_double(sampler.b_sigma);
  kv["sampler.a_p"] = format_double(sampler.a_p);
  kv["sampler.b_p"] = format_double(sampler.b_p);
  kv["sampler.threaded"] = sampler.threaded ? "true" : "false";
  kv["validate.points"] = std::to_string(energy_points);
  return kv;
}

PipelineConfig PipelineConfig::from_key_values(const KeyValues& kv) {
  PipelineConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto dbl = [](double& d) -> Setter {
    return [&d](const std::string& k, const std::string& v) { d = parse_double(k, v); };
  };
  auto num = [](int& i) -> Setter {
    return [&i](const std::string& k, const std::string& v) { i = parse_int(k, v); };
  };
  auto flag = [](bool& b) -> Setter {
    return [&b](const std::string& k, const std::string& v) { b = parse_bool(k, v); };
  };
  const std::map<std::string, Setter> setters{
      {"scenario", [&](auto&, const std::string& v) { c.scenario = v; }},
      {"seed",
       [&](const std::string& k, const std::string& v) {
         const long long s = parse_integer(k, v);
         if (s < 0) throw ConfigError(k + " must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"output", [&](auto&, const std::string& v) { c.output = v; }},
      {"mesh.side_length", dbl(c.side_length)},
      {"mesh.thickness", dbl(c.thickness)},
      {"mesh.n_divisions", num(c.n_divisions)},
      {"mesh.inverse_n_divisions",
       [&](const std::string& k, const std::string& v) { c.inverse_n_divisions = parse_int(k, v); }},
      {"pattern.name", [&](auto&, const std::string& v) { c.pattern = v; }},
      {"pattern.materials",
       [&](const std::string& k, const std::string& v) {
         c.materials.clear();
         std::istringstream is(v);
         std::string item;
         while (std::getline(is, item, ';'))
           if (!trim(item).empty()) c.materials.push_back(parse_material(k, item));
       }},
      {"load.lambda_x", dbl(c.load.lambda_x)},
      {"load.lambda_y", dbl(c.load.lambda_y)},
      {"load.steps", num(c.load.steps)},
      {"noise.sigma_u", dbl(c.sigma_u)},
      {"denoise.enabled", flag(c.denoise)},
      {"denoise.trials", num(c.denoise_trials)},
      {"segment.lambda_flag", dbl(c.lambda_flag)},
      {"segment.lambda_r",
       [&](const std::string& k, const std::string& v) { c.lambda_r = parse_double(k, v); }},
      {"subsample.frac_free", dbl(c.frac_free)},
      {"subsample.frac_flag", dbl(c.frac_flag)},
      {"sampler.chains", num(c.sampler.chains)},
      {"sampler.chain_length", num(c.sampler.chain_length)},
      {"sampler.burn_in", num(c.sampler.burn_in)},
      {"sampler.tmvn_sweeps", num(c.sampler.tmvn_sweeps)},
      {"sampler.a_nu", dbl(c.sampler.a_nu)},
      {"sampler.b_nu", dbl(c.sampler.b_nu)},
      {"sampler.a_sigma", dbl(c.sampler.a_sigma)},
      {"sampler.b_sigma", dbl(c.sampler.b_sigma)},
      {"sampler.a_p", dbl(c.sampler.a_p)},
      {"sampler.b_p", dbl(c.sampler.b_p)},
      {"sampler.threaded", flag(c.sampler.threaded)},
      {"validate.points", num(c.energy_points)},
  };
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second(key, value);
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("configuration file " + path.string() + " not found");
  KeyValues kv;
  try {
    kv = read_key_values(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return PipelineConfig::from_key_values(kv);
}

std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view label) {
  return stream_seed(cfg.seed, label, 0);
}

// ---------------------------------------------------------------------------
// In-memory stages

Dataset generate_dataset(const PipelineConfig& cfg) {
  cfg.validate();
  Dataset d;
  const WedgeMesh forward_mesh = generate_plate_mesh(cfg.side_length, cfg.thickness, cfg.n_divisions);
  const Pattern pat = parse_pattern(cfg.pattern);
  const SegmentMap forward_truth = generate_pattern(forward_mesh, pat);
  d.params = cfg.materials.empty() ? default_materials(cfg.pattern) : cfg.materials;
  if (static_cast<int>(d.params.size()) != forward_truth.num_segments) {
    throw ConfigError("pattern.materials lists " + std::to_string(d.params.size()) +
                      " materials but pattern '" + cfg.pattern + "' has " +
                      std::to_string(forward_truth.num_segments) + " segments");
  }
  try {
    d.forward = forward_solve(forward_mesh, forward_truth, d.params, cfg.load);
  } catch (const NonConvergence& e) {
    throw NonConvergence("scenario '" + cfg.scenario + "': forward solve failed: " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("scenario '" + cfg.scenario + "': forward solve failed: " + e.what());
  }
  d.forces = d.forward.forces;
  if (cfg.inverse_n_divisions && *cfg.inverse_n_divisions != cfg.n_divisions) {
    d.mesh = generate_plate_mesh(cfg.side_length, cfg.thickness, *cfg.inverse_n_divisions);
    d.clean = interpolate_to_mesh(forward_mesh, recover_through_thickness(forward_mesh, d.forward.field),
                                  d.mesh);
    d.truth = transfer_segments(forward_mesh, forward_truth, d.mesh);
  } else {
    d.mesh = forward_mesh;
    d.clean = d.forward.field;
    d.truth = forward_truth;
  }
  d.observed = cfg.sigma_u > 0.0 ? add_noise(d.clean, cfg.sigma_u, stage_seed(cfg, "noise")) : d.clean;
  return d;
}

SegmentationOutput segment_dataset(const Dataset& data, const PipelineConfig& cfg) {
  cfg.validate();
  SegmentationOutput out;
  out.field = data.observed;
  if (cfg.sigma_u > 0.0 && cfg.denoise) {
    KrrOptions opt;
    opt.trials = cfg.denoise_trials;
    opt.seed = stage_seed(cfg, "denoise");
    KrrReport report;
    out.field = denoise_krr(data.mesh, data.observed, opt, &report);
    out.krr = report;
  }
  out.residual = residual_forces(data.mesh, out.field, data.forces, cfg.lambda_r);
  out.diagnostics = noise_diagnostics(out.residual, data.forces);
  if (out.diagnostics.nominally_homogeneous) {
    // Nothing to separate: residuals are at noise level everywhere.
    out.segments = SegmentMap(std::vector<int>(data.mesh.num_elements(), 1));
    return out;
  }
  out.flagged = flag_nodes(out.residual, cfg.lambda_flag);
  SegmentationResult grown;
  try {
    grown = grow_segments(data.mesh, out.flagged, stage_seed(cfg, "grow"));
  } catch (const SegmentationFailure& e) {
    throw SegmentationFailure(std::string(e.what()) + " (" + std::to_string(out.flagged.size()) +
                              " nodes flagged at segment.lambda_flag = " +
                              format_double(cfg.lambda_flag) + "; try a larger value)");
  }
  out.segments = resolve_segments(data.mesh, grown);
  return out;
}

void require_segment_rows(const EquilibriumSystem& system) {
  for (int k = 0; k < system.n_segments; ++k) {
    const auto block = system.A.middleCols(static_cast<Eigen::Index>(k) * system.n_features,
                                           system.n_features);
    if (block.size() == 0 || block.cwiseAbs().maxCoeff() == 0.0) {
      throw NumericalError("segment " + std::to_string(k + 1) +
                           " has no equations after sub-sampling; raise subsample.frac_free");
    }
  }
}

Identification identify_materials(const Dataset& data, const SegmentationOutput& seg,
                                  const PipelineConfig& cfg) {
  cfg.validate();
  const FeatureLibrary lib = FeatureLibrary::standard();
  Identification id;
  const EquilibriumSystem full =
      assemble_system(data.mesh, seg.field, seg.segments, lib, data.forces, cfg.lambda_r);
  const Eigen::VectorXd theta_het = ols_solve(full);
  id.interface = interface_nodes(data.mesh, seg.segments, seg.flagged, full, theta_het);
  id.system = subsample(full, id.interface, cfg.frac_free, cfg.frac_flag,
                        stage_seed(cfg, "subsample"));
  require_segment_rows(id.system);
  SpikeSlabConfig sc = cfg.sampler;
  sc.seed = stage_seed(cfg, "sampler");
  id.posterior = gibbs_run(id.system, sc);
  return id;
}

ValidationOutput validate_identification(const Dataset& data, const SegmentationOutput& seg,
                                         const Identification& id, const PipelineConfig& cfg) {
  const FeatureLibrary lib = FeatureLibrary::standard();
  ValidationOutput out;
  const std::vector<int> match = match_segments(seg.segments, data.truth);
  const Eigen::MatrixXd draws = id.posterior.theta_matrix();
  const int nf = lib.size();
  if (draws.cols() != nf * seg.segments.num_segments)
    throw InvalidArgument("posterior width does not match the segmentation");
  for (int k = 0; k < seg.segments.num_segments; ++k) {
    SegmentValidation sv;
    sv.segment = k + 1;
    sv.truth_segment = match[static_cast<std::size_t>(k)];
    const Eigen::VectorXd& truth = data.params[static_cast<std::size_t>(sv.truth_segment - 1)].theta;
    sv.paths = compare_energy_paths(truth, draws.middleCols(k * nf, nf), lib, cfg.energy_points);
    out.segments.push_back(std::move(sv));
  }
  out.ols_bayes = compare_ols_bayes(id.system, id.posterior);
  return out;
}

// ---------------------------------------------------------------------------
// Files

namespace {

fs::path data_dir(const PipelineConfig& c) { return c.output / "data"; }
fs::path segment_dir(const PipelineConfig& c) { return c.output / "segment"; }
fs::path identify_dir(const PipelineConfig& c) { return c.output / "identify"; }
fs::path validate_dir(const PipelineConfig& c) { return c.output / "validate"; }

void write_manifest(const fs::path& dir, const PipelineConfig& cfg, const std::string& stage) {
  KeyValues kv = cfg.to_key_values();
  kv["stage"] = stage;
  for (const char* label : {"noise", "denoise", "grow", "subsample", "sampler"})
    kv[std::string("derived_seed.") + label] = std::to_string(stage_seed(cfg, label));
  fs::create_directories(dir);
  write_key_values(dir / "manifest.txt", kv);
}

void need(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw ConfigError("missing " + path.string() + "; run `plateid " + producer +
                      "` with the same --out first");
  }
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace

void write_posterior(const fs::path& path, const PosteriorEnsemble& ens) {
  std::ostringstream os;
  os << "chains " << ens.chains << " per_chain " << ens.per_chain << " width " << ens.width << "\n";
  for (std::size_t k = 0; k < ens.draws.size(); ++k) {
    const auto& d = ens.draws[k];
    os << (ens.per_chain > 0 ? k / static_cast<std::size_t>(ens.per_chain) : 0) << ' '
       << format_double(d.sigma2) << ' ' << format_double(d.nu) << ' ' << format_double(d.p0);
    for (Eigen::Index i = 0; i < d.theta.size(); ++i) os << ' ' << format_double(d.theta[i]);
    for (char z : d.z) os << ' ' << int(z);
    os << '\n';
  }
  write_text(path, os.str());
}

PosteriorEnsemble read_posterior(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open posterior file " + path.string());
  PosteriorEnsemble ens;
  std::string a, b, c;
  if (!(in >> a >> ens.chains >> b >> ens.per_chain >> c >> ens.width) || a != "chains" ||
      b != "per_chain" || c != "width" || ens.width < 1 || ens.chains < 0 || ens.per_chain < 0) {
    throw FormatError(path.string() + ": bad posterior header");
  }
  const std::size_t n = static_cast<std::size_t>(ens.chains) * static_cast<std::size_t>(ens.per_chain);
  for (std::size_t k = 0; k < n; ++k) {
    SamplerState s;
    std::size_t chain = 0;
    s.theta.resize(ens.width);
    s.z.resize(static_cast<std::size_t>(ens.width));
    if (!(in >> chain >> s.sigma2 >> s.nu >> s.p0)) throw FormatError(path.string() + ": truncated");
    for (int i = 0; i < ens.width; ++i)
      if (!(in >> s.theta[i])) throw FormatError(path.string() + ": truncated");
    for (int i = 0; i < ens.width; ++i) {
      int z = 0;
      if (!(in >> z) || (z != 0 && z != 1)) throw FormatError(path.string() + ": bad indicator");
      s.z[static_cast<std::size_t>(i)] = static_cast<char>(z);
    }
    ens.draws.push_back(std::move(s));
  }
  std::string extra;
  if (in >> extra) throw FormatError(path.string() + ": trailing data");
  ens.summarize();
  return ens;
}

Dataset read_dataset(const fs::path& dir) {
  for (const char* f : {"mesh.txt", "displacement_clean.txt", "displacement_observed.txt",
                        "forces.txt", "segments_true.txt", "params_true.txt"}) {
    need(dir / f, "generate");
  }
  Dataset d;
  d.mesh = read_mesh(dir / "mesh.txt");
  d.clean = read_displacement(dir / "displacement_clean.txt", d.mesh);
  d.observed = read_displacement(dir / "displacement_observed.txt", d.mesh);
  d.forces = read_forces(dir / "forces.txt");
  d.truth = read_segment_map(dir / "segments_true.txt");
  d.params = read_params(dir / "params_true.txt");
  if (d.truth.size() != d.mesh.num_elements())
    throw FormatError("true segment map does not match the mesh");
  return d;
}

SegmentationOutput read_segmentation(const fs::path& dir, const Dataset& data) {
  for (const char* f : {"displacement_used.txt", "flagged.txt", "segments.txt", "residual.txt"})
    need(dir / f, "segment");
  SegmentationOutput s;
  s.field = read_displacement(dir / "displacement_used.txt", data.mesh);
  s.flagged = read_node_list(dir / "flagged.txt");
  s.segments = read_segment_map(dir / "segments.txt");
  if (s.segments.size() != data.mesh.num_elements())
    throw FormatError("segment map does not match the mesh");
  std::ifstream in(dir / "residual.txt");
  std::string header;
  std::getline(in, header);
  std::vector<std::size_t> nodes;
  std::vector<Vec3> f;
  std::size_t a = 0;
  double fx = 0, fy = 0, fz = 0, fr = 0;
  while (in >> a >> fx >> fy >> fz >> fr) {
    nodes.push_back(a);
    f.emplace_back(fx, fy, fz);
  }
  s.residual = make_residual_field(std::move(nodes), std::move(f));
  return s;
}

void cmd_generate(const PipelineConfig& cfg) {
  const Dataset d = generate_dataset(cfg);
  const fs::path dir = data_dir(cfg);
  write_manifest(dir, cfg, "generate");
  write_mesh(dir / "mesh.txt", d.mesh);
  if (cfg.inverse_n_divisions && *cfg.inverse_n_divisions != cfg.n_divisions)
    write_mesh(dir / "forward_mesh.txt", generate_plate_mesh(cfg.side_length, cfg.thickness, cfg.n_divisions));
  write_displacement(dir / "displacement_clean.txt", d.clean);
  write_displacement(dir / "displacement_observed.txt", d.observed);
  write_forces(dir / "forces.txt", d.forces);
  write_segment_map(dir / "segments_true.txt", d.truth);
  write_params(dir / "params_true.txt", d.params);
  KeyValues info;
  info["lambda_x"] = format_double(cfg.load.lambda_x);
  info["lambda_y"] = format_double(cfg.load.lambda_y);
  info["load_steps"] = std::to_string(cfg.load.steps);
  info["sigma_u"] = format_double(cfg.sigma_u);
  info["nodes"] = std::to_string(d.mesh.num_nodes());
  info["elements"] = std::to_string(d.mesh.num_elements());
  info["segments"] = std::to_string(d.truth.num_segments);
  info["newton_iterations"] = std::to_string(d.forward.iterations);
  info["newton_residual"] = format_double(d.forward.residual);
  info["newton_tolerance"] = format_double(d.forward.tolerance);
  write_key_values(dir / "forward.txt", info);
}

void cmd_segment(const PipelineConfig& cfg) {
  const Dataset d = read_dataset(data_dir(cfg));
  const SegmentationOutput s = segment_dataset(d, cfg);
  const fs::path dir = segment_dir(cfg);
  write_manifest(dir, cfg, "segment");
  write_displacement(dir / "displacement_used.txt", s.field);
  write_node_list(dir / "flagged.txt", s.flagged);
  write_segment_map(dir / "segments.txt", s.segments);
  std::ostringstream res;
  res << "node fx fy fz f_res\n";
  for (std::size_t k = 0; k < s.residual.size(); ++k) {
    const Vec3& f = s.residual.force[k];
    res << s.residual.nodes[k] << ' ' << format_double(f.x()) << ' ' << format_double(f.y()) << ' '
        << format_double(f.z()) << ' ' << format_double(s.residual.f_res[k]) << '\n';
  }
  write_text(dir / "residual.txt", res.str());

  KeyValues diag;
  diag["mu_fres"] = format_double(s.residual.mean);
  diag["sigma_fres"] = format_double(s.residual.sigma);
  diag["r_max"] = format_double(d.forces.max_abs());
  diag["mu_over_sigma"] = format_double(s.diagnostics.mu_over_sigma);
  diag["sigma_over_rmax"] = format_double(s.diagnostics.sigma_over_rmax);
  diag["nominally_homogeneous"] = yes_no(s.diagnostics.nominally_homogeneous);
  diag["lambda_flag"] = format_double(cfg.lambda_flag);
  diag["flagged_nodes"] = std::to_string(s.flagged.size());
  diag["segments"] = std::to_string(s.segments.num_segments);
  diag["misassignment_vs_truth"] = format_double(misassignment(s.segments, d.truth));
  if (s.krr) {
    diag["denoise.sigma_estimate"] = format_double(s.krr->sigma_estimate);
    for (std::size_t k = 0; k < s.krr->fits.size(); ++k) {
      const auto& fit = s.krr->fits[k];
      const std::string p = "denoise.channel" + std::to_string(k) + ".";
      diag[p + "bandwidth"] = format_double(fit.bandwidth);
      diag[p + "ridge"] = format_double(fit.ridge);
      diag[p + "removed_std"] = format_double(fit.removed_std);
    }
  }
  write_key_values(dir / "diagnostics.txt", diag);
}

void cmd_identify(const PipelineConfig& cfg) {
  const Dataset d = read_dataset(data_dir(cfg));
  const SegmentationOutput s = read_segmentation(segment_dir(cfg), d);
  const Identification id = identify_materials(d, s, cfg);
  const fs::path dir = identify_dir(cfg);
  write_manifest(dir, cfg, "identify");
  write_posterior(dir / "posterior.txt", id.posterior);

  const FeatureLibrary lib = FeatureLibrary::standard();
  const auto names = lib.names();
  const int nf = lib.size();
  std::ostringstream os;
  os << "segment feature name mean std inclusion\n";
  for (int i = 0; i < id.posterior.width; ++i) {
    os << i / nf + 1 << ' ' << i % nf + 1 << ' ' << names[static_cast<std::size_t>(i % nf)] << ' '
       << format_double(id.posterior.theta_mean[i]) << ' '
       << format_double(id.posterior.theta_std[i]) << ' '
       << format_double(id.posterior.inclusion[i]) << '\n';
  }
  write_text(dir / "summary.txt", os.str());

  KeyValues info;
  info["rows"] = std::to_string(id.system.num_rows());
  info["free_rows"] = std::to_string(id.system.num_free_rows());
  info["fixed_rows"] = std::to_string(id.system.num_fixed_rows());
  info["lambda_r"] = format_double(id.system.lambda_r);
  info["interface_nodes"] = std::to_string(id.interface.nodes.size());
  info["segments"] = std::to_string(id.system.n_segments);
  write_key_values(dir / "system.txt", info);
}

void cmd_validate(const PipelineConfig& cfg) {
  const Dataset d = read_dataset(data_dir(cfg));
  const SegmentationOutput s = read_segmentation(segment_dir(cfg), d);
  need(identify_dir(cfg) / "posterior.txt", "identify");
  Identification id;
  id.posterior = read_posterior(identify_dir(cfg) / "posterior.txt");

  // The sub-sampled system is a deterministic function of the earlier stages.
  const FeatureLibrary lib = FeatureLibrary::standard();
  const EquilibriumSystem full =
      assemble_system(d.mesh, s.field, s.segments, lib, d.forces, cfg.lambda_r);
  id.interface = interface_nodes(d.mesh, s.segments, s.flagged, full, ols_solve(full));
  id.system = subsample(full, id.interface, cfg.frac_free, cfg.frac_flag, stage_seed(cfg, "subsample"));

  const ValidationOutput v = validate_identification(d, s, id, cfg);
  const fs::path dir = validate_dir(cfg);
  write_manifest(dir, cfg, "validate");
  std::ostringstream r2;
  r2 << "segment truth_segment path r2 min_energy\n";
  for (const auto& sv : v.segments) {
    write_text(dir / ("energy_segment_" + std::to_string(sv.segment) + ".csv"), energy_csv(sv.paths));
    for (const auto& p : sv.paths) {
      r2 << sv.segment << ' ' << sv.truth_segment << ' ' << path_name(p.path.kind) << ' '
         << format_double(p.r2) << ' ' << format_double(p.min_energy) << '\n';
    }
  }
  write_text(dir / "r2.txt", r2.str());
  write_text(dir / "ols_vs_bayes.txt", v.ols_bayes.table());
}

void run_all(const PipelineConfig& cfg) {
  cmd_generate(cfg);
  cmd_segment(cfg);
  cmd_identify(cfg);
  cmd_validate(cfg);
}

}  // namespace plateid
