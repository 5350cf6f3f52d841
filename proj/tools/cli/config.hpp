#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twist/dynamics.hpp"
#include "twist/phase_core.hpp"
#include "twist/sampling.hpp"
#include "twist/spectral_oracle.hpp"

namespace twist::cli {

inline constexpr int kSchemaVersion = 1;

struct HamiltonianConfig {
  double alpha = 0.3;
  double beta = 0.1;
  double gamma = 0.005;
  /// When non-empty, h(I) = sum coefficients[i] I^i replaces the cubic.
  std::vector<double> coefficients;
};

struct DensityConfig {
  std::string kind = "gaussian";  // gaussian | ramp_von_mises
  double q0 = 1.0;
  double p0 = 0.0;
  double eps0 = 0.01;
  double a = 0.25;
  double b = 0.75;
  double kappa = 2.0;
  double mu = 0.0;
};

struct ObservableConfig {
  std::string name = "sqrt2I_exp";  // sqrt2I_exp | I_cos | I_exp | I | zero
  std::optional<double> bound;
};

struct NoiseConfig {
  std::string kind = "none";  // none | brownian | uniform | ar1 | resonant
  double c = 0.1;
  double r = 0.5;
  double innovation_scale = 1.0;
  bool stationary_start = true;
  double half_width = 1.0;
  int k = 1;
  double reference_I = 0.5;
};

struct SamplingConfig {
  std::size_t M = 100000;
  std::int64_t N = 1000;
  std::size_t R = 10000;
  std::vector<std::int64_t> j_snapshots{0, 1, 10, 100, 1000, 10000};
  std::vector<std::int64_t> N_ladder{10, 100, 1000};
  int H = 0;  // 0 means N / 4
  std::size_t path_replicas = 10000;
};

struct OracleConfig {
  int k_max = 16;
  int I_nodes = 0;  // 0 sizes the grid from N
  double I_min = 0.0;
  double I_max = 2.0;
  int theta_points = 256;
  std::int64_t N = 10000;
};

struct CompareConfig {
  double z_threshold = 5.0;
  std::optional<double> oracle_c_override;
};

struct CltConfig {
  double ks_threshold = 0.02;
  std::vector<double> eps_grid{0.05, 0.1, 0.2, 0.5};
  bool oracle_centering = true;
};

struct CovarianceConfig {
  std::string product = "bilinear";  // bilinear | hermitian
};

struct NonresonanceConfig {
  double I_lo = 0.01;
  double I_hi = 2.0;
  int points = 200;
  int k_max = 8;
  double tol = 1e-8;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  HamiltonianConfig hamiltonian;
  DensityConfig density;
  ObservableConfig observable;
  NoiseConfig noise;
  SamplingConfig sampling;
  OracleConfig oracle;
  CompareConfig compare;
  CltConfig clt;
  CovarianceConfig covariance;
  NonresonanceConfig nonresonance;
  std::uint64_t seed = 20240501;
  std::string output_dir = "out";
  std::size_t envelope_window = 50;
  /// Partial config merged over this one under --full-scale.
  nlohmann::json full_scale = nlohmann::json::object();
};

ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws UsageError naming the first invalid field.
void validate(const ExperimentConfig& cfg);

ExperimentConfig apply_full_scale(const ExperimentConfig& cfg);

/// FNV-1a of the canonical JSON serialization (output_dir excluded), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

FrequencyModel make_model(const ExperimentConfig& cfg);
InitialDensity make_density(const ExperimentConfig& cfg);
Observable make_observable(const ExperimentConfig& cfg);
PerturbationModel make_noise(const ExperimentConfig& cfg, const FrequencyModel& model);
SpectralOptions make_spectral_options(const ExperimentConfig& cfg, std::int64_t max_j,
                                      unsigned threads);

}  // namespace twist::cli
