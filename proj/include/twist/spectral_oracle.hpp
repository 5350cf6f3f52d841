#pragma once

// Semi-analytic ensemble statistics for one degree of freedom.
//
// Everything here evaluates truncated angular Fourier sums
//   <G>_j = 2 pi * integral sum_k Ghat_k(I) rhohat_{-k}(I) e^{ijk omega(I)} a_j^{(k)} dI
// on a composite Gauss-Legendre action grid. The grid is sized from the
// largest iteration count it must resolve, since the integrand oscillates
// with frequency ~ j * omega'(I).

#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "twist/dynamics.hpp"
#include "twist/phase_core.hpp"
#include "twist/sampling.hpp"

namespace twist {

struct SpectralOptions {
  int k_max = 16;
  int nodes_per_panel = 32;
  int min_nodes = 400;
  /// Explicit node count; 0 picks it from max_j.
  int I_nodes = 0;
  double I_min = 0.0;
  double I_max = 2.0;
  int theta_points = 256;
  /// Largest j (times the mode order) the action quadrature must resolve.
  std::int64_t max_j = 10000;
  unsigned threads = 1;
};

class SpectralTable {
 public:
  int k_max() const noexcept { return K_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<double>& omega() const noexcept { return omega_; }

  /// Ghat_k at node n, |k| <= k_max.
  std::complex<double> G_hat(std::size_t n, int k) const;
  /// rhohat_{0,k} at node n, |k| <= 2 k_max (the covariance needs m + n).
  std::complex<double> rho_hat(std::size_t n, int k) const;

  /// Modes k with a non-negligible Ghat_k somewhere on the grid.
  const std::vector<int>& active_modes() const noexcept { return active_; }

  double tail_estimate() const noexcept { return tail_; }
  double head_magnitude() const noexcept { return head_; }
  bool truncation_warning() const noexcept { return warning_; }
  bool bound_estimated() const noexcept { return bound_estimated_; }

  /// Largest j for which every active mode stays resolved by the grid.
  std::int64_t max_resolved_j() const noexcept { return max_resolved_j_; }
  unsigned threads() const noexcept { return threads_; }

 private:
  friend SpectralTable build_spectral_table(const Observable&, const InitialDensity&,
                                            const FrequencyModel&, const SpectralOptions&);
  int K_ = 0;
  std::vector<double> nodes_, weights_, omega_;
  std::vector<std::complex<double>> G_hat_;    // node-major, 2K+1 per node
  std::vector<std::complex<double>> rho_hat_;  // node-major, 4K+1 per node
  std::vector<int> active_;
  double tail_ = 0.0;
  double head_ = 0.0;
  bool warning_ = false;
  bool bound_estimated_ = false;
  std::int64_t max_resolved_j_ = 0;
  unsigned threads_ = 1;
};

SpectralTable build_spectral_table(const Observable& G, const InitialDensity& rho,
                                   const FrequencyModel& model, const SpectralOptions& opts = {});

/// Spec-style overload: k_max and a fixed I-node count.
SpectralTable build_spectral_table(const Observable& G, const InitialDensity& rho,
                                   const FrequencyModel& model, int k_max, int I_nodes);

using CharacteristicFn = std::function<std::complex<double>(int k, std::int64_t j)>;

/// a_j^{(k)} of a closed-form model as a callable.
CharacteristicFn characteristic_function(const PerturbationModel& noise);

std::complex<double> oracle_mean_deterministic(const SpectralTable& t, std::int64_t j);
std::complex<double> oracle_mean_brownian(const SpectralTable& t, std::int64_t j, double c);
std::complex<double> oracle_mean_general(const SpectralTable& t, std::int64_t j,
                                         const CharacteristicFn& a);
std::complex<double> oracle_mean(const SpectralTable& t, std::int64_t j,
                                 const PerturbationModel& noise);

struct OracleSeries {
  std::vector<std::complex<double>> values;  // j = 0..N
  double truncation_error_estimate = 0.0;
  bool resolved = true;  // false when N exceeds the table's max_resolved_j
};

/// Contribution of one mode, sum over nodes of 2 pi w Ghat_k rhohat_{-k} e^{ijk omega},
/// for j = 0..N (before any noise damping).
std::vector<std::complex<double>> modal_series(const SpectralTable& t, int k, std::int64_t N);

OracleSeries oracle_series(const SpectralTable& t, std::int64_t N, const PerturbationModel& noise);
OracleSeries oracle_series(const SpectralTable& t, std::int64_t N, const CharacteristicFn& a);

/// Mean of entries 1..N (entry 0 is excluded).
std::complex<double> cesaro_average(std::span<const std::complex<double>> series, std::int64_t N);
std::complex<double> cesaro_average(const OracleSeries& series, std::int64_t N);
double cesaro_average(std::span<const double> series, std::int64_t N);
/// Running Cesaro averages V_1..V_N (index 0 unused and set to 0).
std::vector<std::complex<double>> cesaro_running(std::span<const std::complex<double>> series);

/// 2 pi * integral Ghat_0 rhohat_0 dI, the long-time ensemble value.
std::complex<double> limit_value(const SpectralTable& t);

enum class CovarianceConvention {
  bilinear,  // E[G_j G_{j+h}] - E[G_j] E[G_{j+h}]
  hermitian  // E[G_j conj(G_{j+h})] - E[G_j] conj(E[G_{j+h}])
};

/// Covariance of G after j and j + h steps. Available for no noise and for
/// independent-increment noise (Brownian, i.i.d. with a characteristic
/// function); other processes throw UnsupportedError.
std::complex<double> oracle_covariance(const SpectralTable& t, std::int64_t j, std::int64_t h,
                                       const PerturbationModel& noise,
                                       CovarianceConvention conv = CovarianceConvention::bilinear);

/// A_{N,h} = (1/(N-h)) sum_{j=1}^{N-h} Cov(G_j, G_{j+h}).
std::complex<double> oracle_lag_covariance_average(
    const SpectralTable& t, std::int64_t N, std::int64_t h, const PerturbationModel& noise,
    CovarianceConvention conv = CovarianceConvention::bilinear);

/// lim_j Cov(G_j, G_{j+h}).
std::complex<double> oracle_lag_limit(const SpectralTable& t, std::int64_t h,
                                      const PerturbationModel& noise,
                                      CovarianceConvention conv = CovarianceConvention::bilinear);

struct LimitingVariance {
  double sigma2 = 0.0;       // lim_j Var(G_j)
  double sigma_star2 = 0.0;  // sigma2 + 2 sum_h c_h
  /// Variance of the angle average across actions; a positive value makes the
  /// normalized sum diverge (sigma_star2 is then +inf).
  double between_fiber_variance = 0.0;
};

/// For a real observable and independent-increment (or no) noise.
LimitingVariance oracle_limiting_variance(const SpectralTable& t, const PerturbationModel& noise);

/// Conditional statistics on a single action fiber I with
/// theta_0 ~ rho_0(theta | I): modal weights Ghat_k(I) rhohat_{-k}(I) / rhohat_0(I).
struct FiberModes {
  double action = 0.0;
  double omega = 0.0;
  std::vector<int> modes;
  std::vector<std::complex<double>> weights;
};
FiberModes fiber_modes(const Observable& G, const InitialDensity& rho, const FrequencyModel& model,
                       double I, int k_max, int theta_points = 256);

/// (1/N) sum_{j=1}^{N} w_k e^{ijk omega} a_j^{(k)} for one mode of the fiber.
std::complex<double> fiber_mode_cesaro(const FiberModes& f, int k, std::int64_t N,
                                       const CharacteristicFn& a);
/// Sum of fiber_mode_cesaro over all modes (the fiber's V_N).
std::complex<double> fiber_cesaro(const FiberModes& f, std::int64_t N, const CharacteristicFn& a);
/// The k = 0 weight, i.e. the angle average of G on the fiber.
std::complex<double> fiber_limit(const FiberModes& f);

}  // namespace twist
