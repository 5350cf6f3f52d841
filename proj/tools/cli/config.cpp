#include "config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>

#include <fmt/format.h>

#include "twist/errors.hpp"

namespace twist::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::string_view section,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw UsageError(fmt::format("config: '{}' must be an object", section));
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw UsageError(fmt::format("config: unknown key '{}' in '{}'", key, section));
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, std::string_view section) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    throw UsageError(fmt::format("config: '{}.{}' has the wrong type", section, key));
  }
}

void read_optional(const json& obj, const char* key, std::optional<double>& out,
                   std::string_view section) {
  if (!obj.contains(key) || obj.at(key).is_null()) {
    out.reset();
    return;
  }
  double v = 0.0;
  read(obj, key, v, section);
  out = v;
}

json section(const json& root, const char* name) {
  return root.contains(name) ? root.at(name) : json::object();
}

void require(bool ok, std::string_view what) {
  if (!ok) throw UsageError(fmt::format("config: {}", what));
}

}  // namespace

ExperimentConfig parse_config(const json& root) {
  reject_unknown(root, "<root>",
                 {"schema_version", "hamiltonian", "density", "observable", "noise", "sampling",
                  "oracle", "compare", "clt", "covariance", "nonresonance", "seed", "output_dir",
                  "envelope_window", "full_scale"});
  ExperimentConfig cfg;
  read(root, "schema_version", cfg.schema_version, "<root>");
  if (cfg.schema_version != kSchemaVersion) {
    throw UsageError(fmt::format("config: unsupported schema_version {} (expected {})",
                                 cfg.schema_version, kSchemaVersion));
  }

  const json h = section(root, "hamiltonian");
  reject_unknown(h, "hamiltonian", {"alpha", "beta", "gamma", "coefficients"});
  read(h, "alpha", cfg.hamiltonian.alpha, "hamiltonian");
  read(h, "beta", cfg.hamiltonian.beta, "hamiltonian");
  read(h, "gamma", cfg.hamiltonian.gamma, "hamiltonian");
  read(h, "coefficients", cfg.hamiltonian.coefficients, "hamiltonian");

  const json d = section(root, "density");
  reject_unknown(d, "density", {"kind", "q0", "p0", "eps0", "a", "b", "kappa", "mu"});
  read(d, "kind", cfg.density.kind, "density");
  read(d, "q0", cfg.density.q0, "density");
  read(d, "p0", cfg.density.p0, "density");
  read(d, "eps0", cfg.density.eps0, "density");
  read(d, "a", cfg.density.a, "density");
  read(d, "b", cfg.density.b, "density");
  read(d, "kappa", cfg.density.kappa, "density");
  read(d, "mu", cfg.density.mu, "density");

  const json o = section(root, "observable");
  reject_unknown(o, "observable", {"name", "bound"});
  read(o, "name", cfg.observable.name, "observable");
  read_optional(o, "bound", cfg.observable.bound, "observable");

  const json n = section(root, "noise");
  reject_unknown(n, "noise", {"kind", "c", "r", "innovation_scale", "stationary_start", "half_width",
                              "k", "reference_I"});
  read(n, "kind", cfg.noise.kind, "noise");
  read(n, "c", cfg.noise.c, "noise");
  read(n, "r", cfg.noise.r, "noise");
  read(n, "innovation_scale", cfg.noise.innovation_scale, "noise");
  read(n, "stationary_start", cfg.noise.stationary_start, "noise");
  read(n, "half_width", cfg.noise.half_width, "noise");
  read(n, "k", cfg.noise.k, "noise");
  read(n, "reference_I", cfg.noise.reference_I, "noise");

  const json s = section(root, "sampling");
  reject_unknown(s, "sampling", {"M", "N", "R", "j_snapshots", "N_ladder", "H", "path_replicas"});
  read(s, "M", cfg.sampling.M, "sampling");
  read(s, "N", cfg.sampling.N, "sampling");
  read(s, "R", cfg.sampling.R, "sampling");
  read(s, "j_snapshots", cfg.sampling.j_snapshots, "sampling");
  read(s, "N_ladder", cfg.sampling.N_ladder, "sampling");
  read(s, "H", cfg.sampling.H, "sampling");
  read(s, "path_replicas", cfg.sampling.path_replicas, "sampling");

  const json q = section(root, "oracle");
  reject_unknown(q, "oracle", {"k_max", "I_nodes", "I_min", "I_max", "theta_points", "N"});
  read(q, "k_max", cfg.oracle.k_max, "oracle");
  read(q, "I_nodes", cfg.oracle.I_nodes, "oracle");
  read(q, "I_min", cfg.oracle.I_min, "oracle");
  read(q, "I_max", cfg.oracle.I_max, "oracle");
  read(q, "theta_points", cfg.oracle.theta_points, "oracle");
  read(q, "N", cfg.oracle.N, "oracle");

  const json c = section(root, "compare");
  reject_unknown(c, "compare", {"z_threshold", "oracle_c_override"});
  read(c, "z_threshold", cfg.compare.z_threshold, "compare");
  read_optional(c, "oracle_c_override", cfg.compare.oracle_c_override, "compare");

  const json t = section(root, "clt");
  reject_unknown(t, "clt", {"ks_threshold", "eps_grid", "oracle_centering"});
  read(t, "ks_threshold", cfg.clt.ks_threshold, "clt");
  read(t, "eps_grid", cfg.clt.eps_grid, "clt");
  read(t, "oracle_centering", cfg.clt.oracle_centering, "clt");

  const json v = section(root, "covariance");
  reject_unknown(v, "covariance", {"product"});
  read(v, "product", cfg.covariance.product, "covariance");

  const json r = section(root, "nonresonance");
  reject_unknown(r, "nonresonance", {"I_lo", "I_hi", "points", "k_max", "tol"});
  read(r, "I_lo", cfg.nonresonance.I_lo, "nonresonance");
  read(r, "I_hi", cfg.nonresonance.I_hi, "nonresonance");
  read(r, "points", cfg.nonresonance.points, "nonresonance");
  read(r, "k_max", cfg.nonresonance.k_max, "nonresonance");
  read(r, "tol", cfg.nonresonance.tol, "nonresonance");

  read(root, "seed", cfg.seed, "<root>");
  read(root, "output_dir", cfg.output_dir, "<root>");
  read(root, "envelope_window", cfg.envelope_window, "<root>");
  if (root.contains("full_scale")) {
    cfg.full_scale = root.at("full_scale");
    if (!cfg.full_scale.is_object()) throw UsageError("config: 'full_scale' must be an object");
  }
  validate(cfg);
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["hamiltonian"] = {{"alpha", cfg.hamiltonian.alpha},
                      {"beta", cfg.hamiltonian.beta},
                      {"gamma", cfg.hamiltonian.gamma},
                      {"coefficients", cfg.hamiltonian.coefficients}};
  j["density"] = {{"kind", cfg.density.kind}, {"q0", cfg.density.q0},   {"p0", cfg.density.p0},
                  {"eps0", cfg.density.eps0}, {"a", cfg.density.a},     {"b", cfg.density.b},
                  {"kappa", cfg.density.kappa}, {"mu", cfg.density.mu}};
  j["observable"] = {{"name", cfg.observable.name},
                     {"bound", cfg.observable.bound ? json(*cfg.observable.bound) : json(nullptr)}};
  j["noise"] = {{"kind", cfg.noise.kind},
                {"c", cfg.noise.c},
                {"r", cfg.noise.r},
                {"innovation_scale", cfg.noise.innovation_scale},
                {"stationary_start", cfg.noise.stationary_start},
                {"half_width", cfg.noise.half_width},
                {"k", cfg.noise.k},
                {"reference_I", cfg.noise.reference_I}};
  j["sampling"] = {{"M", cfg.sampling.M},
                   {"N", cfg.sampling.N},
                   {"R", cfg.sampling.R},
                   {"j_snapshots", cfg.sampling.j_snapshots},
                   {"N_ladder", cfg.sampling.N_ladder},
                   {"H", cfg.sampling.H},
                   {"path_replicas", cfg.sampling.path_replicas}};
  j["oracle"] = {{"k_max", cfg.oracle.k_max},   {"I_nodes", cfg.oracle.I_nodes},
                 {"I_min", cfg.oracle.I_min},   {"I_max", cfg.oracle.I_max},
                 {"theta_points", cfg.oracle.theta_points}, {"N", cfg.oracle.N}};
  j["compare"] = {{"z_threshold", cfg.compare.z_threshold},
                  {"oracle_c_override", cfg.compare.oracle_c_override
                                            ? json(*cfg.compare.oracle_c_override)
                                            : json(nullptr)}};
  j["clt"] = {{"ks_threshold", cfg.clt.ks_threshold},
              {"eps_grid", cfg.clt.eps_grid},
              {"oracle_centering", cfg.clt.oracle_centering}};
  j["covariance"] = {{"product", cfg.covariance.product}};
  j["nonresonance"] = {{"I_lo", cfg.nonresonance.I_lo},   {"I_hi", cfg.nonresonance.I_hi},
                       {"points", cfg.nonresonance.points}, {"k_max", cfg.nonresonance.k_max},
                       {"tol", cfg.nonresonance.tol}};
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["envelope_window"] = cfg.envelope_window;
  j["full_scale"] = cfg.full_scale;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

void validate(const ExperimentConfig& cfg) {
  const auto& d = cfg.density;
  require(d.kind == "gaussian" || d.kind == "ramp_von_mises",
          "density.kind must be 'gaussian' or 'ramp_von_mises'");
  if (d.kind == "gaussian") {
    require(d.eps0 > 0.0 && std::isfinite(d.eps0), "density.eps0 must be > 0");
  } else {
    require(d.a >= 0.0 && d.b > d.a, "density needs 0 <= a < b");
    require(d.kappa >= 0.0, "density.kappa must be >= 0");
  }
  const auto& o = cfg.observable;
  require(o.name == "sqrt2I_exp" || o.name == "I_cos" || o.name == "I_exp" || o.name == "I" ||
              o.name == "zero",
          "observable.name must be one of sqrt2I_exp, I_cos, I_exp, I, zero");
  if (o.bound) require(*o.bound > 0.0, "observable.bound must be > 0");
  const auto& n = cfg.noise;
  require(n.kind == "none" || n.kind == "brownian" || n.kind == "uniform" || n.kind == "ar1" ||
              n.kind == "resonant",
          "noise.kind must be one of none, brownian, uniform, ar1, resonant");
  if (n.kind != "none") require(n.c > 0.0, "noise.c must be > 0");
  if (n.kind == "ar1") {
    require(n.r > 0.0 && n.r < 1.0, "noise.r must lie in (0, 1)");
    require(n.innovation_scale >= 0.0, "noise.innovation_scale must be >= 0");
  }
  if (n.kind == "uniform") require(n.half_width > 0.0, "noise.half_width must be > 0");
  if (n.kind == "resonant") require(n.reference_I > 0.0, "noise.reference_I must be > 0");

  const auto& s = cfg.sampling;
  require(s.M >= 1, "sampling.M must be >= 1");
  require(s.N >= 1, "sampling.N must be >= 1");
  require(s.R >= 1, "sampling.R must be >= 1");
  require(!s.j_snapshots.empty(), "sampling.j_snapshots must not be empty");
  for (auto j : s.j_snapshots) require(j >= 0, "sampling.j_snapshots entries must be >= 0");
  for (auto j : s.N_ladder) require(j >= 1, "sampling.N_ladder entries must be >= 1");
  require(s.H >= 0, "sampling.H must be >= 0");

  const auto& q = cfg.oracle;
  require(q.k_max >= 1, "oracle.k_max must be >= 1");
  require(q.I_nodes == 0 || q.I_nodes >= 8, "oracle.I_nodes must be 0 or >= 8");
  require(q.I_max > q.I_min && q.I_min >= 0.0, "oracle needs 0 <= I_min < I_max");
  require(q.theta_points >= 4 * q.k_max + 16, "oracle.theta_points must be >= 4 k_max + 16");
  require(q.N >= 1, "oracle.N must be >= 1");
  require(cfg.compare.z_threshold > 0.0, "compare.z_threshold must be > 0");
  require(cfg.clt.ks_threshold > 0.0 && cfg.clt.ks_threshold < 1.0,
          "clt.ks_threshold must lie in (0, 1)");
  for (double e : cfg.clt.eps_grid) require(e > 0.0, "clt.eps_grid entries must be > 0");
  require(cfg.covariance.product == "bilinear" || cfg.covariance.product == "hermitian",
          "covariance.product must be 'bilinear' or 'hermitian'");
  require(cfg.nonresonance.points >= 1, "nonresonance.points must be >= 1");
  require(cfg.nonresonance.k_max >= 1, "nonresonance.k_max must be >= 1");
  require(cfg.envelope_window >= 1, "envelope_window must be >= 1");
}

ExperimentConfig apply_full_scale(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.merge_patch(cfg.full_scale);
  j["full_scale"] = json::object();
  return parse_config(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Where results land is not part of the experiment.
  nlohmann::json j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

FrequencyModel make_model(const ExperimentConfig& cfg) {
  if (!cfg.hamiltonian.coefficients.empty()) {
    return FrequencyModel::polynomial(cfg.hamiltonian.coefficients);
  }
  return FrequencyModel::cubic(cfg.hamiltonian.alpha, cfg.hamiltonian.beta, cfg.hamiltonian.gamma);
}

InitialDensity make_density(const ExperimentConfig& cfg) {
  const auto& d = cfg.density;
  if (d.kind == "gaussian") return GaussianPhaseSpace{d.q0, d.p0, d.eps0};
  return ramp_von_mises(d.a, d.b, d.kappa, d.mu);
}

Observable make_observable(const ExperimentConfig& cfg) {
  const auto support = effective_support(make_density(cfg));
  const double I_top = std::max(cfg.oracle.I_max, support.second);
  Observable G = Observable::builtin(cfg.observable.name, I_top);
  if (cfg.observable.bound) {
    return Observable(G.name(), [G](double I, double th) { return G(I, th); }, G.real_valued(),
                      *cfg.observable.bound);
  }
  return G;
}

PerturbationModel make_noise(const ExperimentConfig& cfg, const FrequencyModel& model) {
  const auto& n = cfg.noise;
  if (n.kind == "none") return PerturbationModel::none();
  if (n.kind == "brownian") return PerturbationModel::brownian(n.c);
  if (n.kind == "uniform") return PerturbationModel::iid(IidNoise::uniform(n.half_width), n.c);
  if (n.kind == "ar1") return PerturbationModel::ar1(n.r, n.innovation_scale, n.c, n.stationary_start);
  return PerturbationModel::resonant(model, n.k, n.reference_I, n.c);
}

SpectralOptions make_spectral_options(const ExperimentConfig& cfg, std::int64_t max_j,
                                      unsigned threads) {
  SpectralOptions o;
  o.k_max = cfg.oracle.k_max;
  o.I_nodes = cfg.oracle.I_nodes;
  o.I_min = cfg.oracle.I_min;
  o.I_max = cfg.oracle.I_max;
  o.theta_points = cfg.oracle.theta_points;
  o.max_j = max_j;
  o.threads = threads;
  return o;
}

}  // namespace twist::cli
