#pragma once

// Monte Carlo estimators and the statistical tests built on them: ensemble
// means, replica sums X_N = N^{-1/2} sum X_j, lag covariances, the limiting
// variance, Kolmogorov-Smirnov and Lindeberg diagnostics, decay fits.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twist/dynamics.hpp"
#include "twist/phase_core.hpp"
#include "twist/random.hpp"
#include "twist/sampling.hpp"

namespace twist {

struct EnsembleReport {
  std::vector<std::int64_t> j_values;
  std::vector<std::complex<double>> mean;
  std::vector<double> stderr_re;
  std::vector<double> stderr_im;
  /// Running Cesaro averages, filled only when j_values is 0..N or 1..N.
  std::vector<std::complex<double>> cesaro;
  std::size_t sample_count = 0;

  double standard_error(std::size_t i) const;
};

/// Mean of G over M trajectories at each requested j. Trajectory i draws its
/// initial point from plan.stream(i, kLaneInitial) and its noise from
/// plan.stream(i, kLaneNoise); partial sums are merged in a fixed order.
EnsembleReport mc_ensemble_series(const Observable& G, const InitialDensity& rho,
                                  const FrequencyModel& model, const PerturbationModel& noise,
                                  std::size_t M, std::span<const std::int64_t> j_values,
                                  const SeedPlan& plan, unsigned threads = 1);

/// Phase points of the same M trajectories at each requested j (outer index
/// follows j_values).
std::vector<std::vector<PhasePoint>> ensemble_snapshots(const InitialDensity& rho,
                                                        const FrequencyModel& model,
                                                        const PerturbationModel& noise,
                                                        std::size_t M,
                                                        std::span<const std::int64_t> j_values,
                                                        const SeedPlan& plan, unsigned threads = 1);

std::vector<double> centroid_norm(const EnsembleReport& report, double q0);
std::vector<double> centroid_norm(std::span<const std::complex<double>> means, double q0);

/// R independent replicas of X_j = G(step j) - center for j = 1..N, each with
/// one initial draw and one noise path.
class ReplicaSet {
 public:
  ReplicaSet() = default;
  /// Synthetic data, replica-major: real[r * N + (j - 1)].
  ReplicaSet(std::int64_t N, std::size_t R, std::vector<double> real,
             std::vector<double> imag = {});

  std::int64_t steps() const noexcept { return N_; }
  std::size_t replicas() const noexcept { return R_; }
  std::size_t path_replicas() const noexcept { return path_R_; }
  bool is_complex() const noexcept { return !imag_.empty() || !sum_imag_.empty(); }

  /// X_j of replica r (1 <= j <= N, r < path_replicas()).
  double re(std::size_t r, std::int64_t j) const { return real_[r * N_ + (j - 1)]; }
  double im(std::size_t r, std::int64_t j) const {
    return imag_.empty() ? 0.0 : imag_[r * N_ + (j - 1)];
  }
  std::span<const double> row_re(std::size_t r) const;
  std::span<const double> row_im(std::size_t r) const;

  const std::vector<std::int64_t>& ladder() const noexcept { return ladder_; }
  /// N'^{-1/2} sum_{j <= N'} X_j for every replica; N' must be on the ladder
  /// (or any N' <= N when the paths are kept for every replica).
  std::vector<double> normalized_sums(std::int64_t N_prime) const;
  std::vector<double> normalized_sums_imag(std::int64_t N_prime) const;

 private:
  friend ReplicaSet simulate_replicas(const Observable&, const InitialDensity&,
                                      const FrequencyModel&, const PerturbationModel&,
                                      std::int64_t, std::size_t, const SeedPlan&,
                                      std::complex<double>, std::span<const std::int64_t>,
                                      std::size_t, unsigned);
  std::int64_t N_ = 0;
  std::size_t R_ = 0;
  std::size_t path_R_ = 0;
  std::vector<double> real_, imag_;  // path_R_ x N_
  std::vector<std::int64_t> ladder_;
  std::vector<double> sum_real_, sum_imag_;  // ladder x R_
};

/// `ladder` lists extra N' <= N whose normalized sums are recorded for every
/// replica; N itself is always recorded. Paths are kept for the first
/// `path_replicas` replicas (all of them by default).
ReplicaSet simulate_replicas(const Observable& G, const InitialDensity& rho,
                             const FrequencyModel& model, const PerturbationModel& noise,
                             std::int64_t N, std::size_t R, const SeedPlan& plan,
                             std::complex<double> center, std::span<const std::int64_t> ladder = {},
                             std::size_t path_replicas = static_cast<std::size_t>(-1),
                             unsigned threads = 1);

/// Real parts of X_N over R replicas (imaginary parts are reported separately
/// through ReplicaSet for complex observables).
std::vector<double> clt_samples(const Observable& G, const InitialDensity& rho,
                                const FrequencyModel& model, const PerturbationModel& noise,
                                std::int64_t N, std::size_t R, const SeedPlan& plan,
                                std::complex<double> center, unsigned threads = 1);

enum class LagProduct { bilinear, hermitian };

struct CovarianceReport {
  std::int64_t N = 0;
  std::size_t R = 0;
  int H = 0;
  std::vector<std::complex<double>> A_N;       // h = 0..H
  std::vector<double> A_N_stderr;
  std::vector<std::complex<double>> A_half;    // the same at N/2
  std::vector<double> A_half_stderr;
  std::vector<bool> converged;                 // plateau test per lag
  std::vector<std::complex<double>> c;         // extrapolated c_h (h = 0..H)
  std::vector<double> c_halfwidth;             // 95% half-width of c_h
  double sigma2 = 0.0;
  double sigma_star2 = 0.0;                    // sigma2 + 2 sum_{1..H} Re c_h
  double tail_rate = 0.0;                      // fitted exponential rate of |A_N,h|
  double remainder_bound = 0.0;                // bound on 2 sum_{h>H} |c_h|
  bool remainder_valid = false;
  double quartile_fraction = 0.25;

  bool all_converged() const;
};

/// Lag covariances from replica paths, averaged over j per A_{N,h}; sigma2 is
/// the mean of Var(X_j) over the last `tail_fraction` of j.
CovarianceReport estimate_lag_covariances(const ReplicaSet& X, std::int64_t N, int H,
                                          LagProduct product = LagProduct::bilinear,
                                          double tail_fraction = 0.25, unsigned threads = 1);

struct KsResult {
  double statistic = 0.0;
  bool pass = false;
  double threshold = 0.02;
};

/// D = sup |F_empirical(x) - Phi(x / sigma)|.
KsResult ks_normality_test(std::span<const double> samples, double sigma, double threshold = 0.02);

struct LindebergPoint {
  double eps = 0.0;
  double value = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;  // (2 ||G||)^3 / (eps sqrt(N))
  bool within_bound = true;
};

/// sum_j E[Y_{N,j}^2 1{|Y_{N,j}| > eps}] for Y_{N,j} = X_j / sqrt(N).
std::vector<LindebergPoint> lindeberg_diagnostic(const ReplicaSet& X, std::int64_t N,
                                                 std::span<const double> eps_grid,
                                                 double G_bound);

enum class DecayModel { exponential, power_law };

struct DecayFit {
  /// Exponential: y ~ prefactor * e^{-rate x}. Power law: y ~ prefactor * x^rate.
  double rate = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;
};

DecayFit fit_decay(std::span<const double> x, std::span<const double> y, DecayModel model);
/// Series indexed by j = 0, 1, ...; nonpositive entries are dropped.
DecayFit fit_decay(std::span<const double> series, DecayModel model);

/// Max of |v| over the window [i - w/2, i + w/2] clipped to the series.
std::vector<double> rolling_max_envelope(std::span<const double> values, std::size_t window);

/// log of the empirical characteristic function E e^{i u X} at each u.
std::vector<std::complex<double>> empirical_log_characteristic(std::span<const double> samples,
                                                               std::span<const double> u_grid);

/// E|S_N|^3 / N^{3/2} = E|X_N|^3 for normalized sums X_N.
double third_moment_ratio(std::span<const double> normalized_sums);

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};
SampleMoments sample_moments(std::span<const double> v);

}  // namespace twist
