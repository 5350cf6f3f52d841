#include "twist/spectral_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "twist/errors.hpp"
#include "twist/quadrature.hpp"

namespace twist {

namespace {

constexpr std::int64_t kSeriesBlock = 256;
// Phase change a single 32-node panel is allowed to see.
constexpr double kPanelPhase = 16.0;

std::complex<double> phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

// e^{i m omega}, with m * omega reduced mod 2pi before the trig call.
std::complex<double> exact_phasor(double m, double omega) { return phasor(reduced_phase(m, omega)); }

std::vector<std::complex<double>> angular_coefficients(const Observable& G, double I, int K, int Q) {
  std::vector<std::complex<double>> samples(Q);
  for (int m = 0; m < Q; ++m) samples[m] = G(I, kTwoPi * m / Q);
  std::vector<std::complex<double>> twiddle(Q);
  for (int m = 0; m < Q; ++m) twiddle[m] = phasor(-kTwoPi * m / Q);
  std::vector<std::complex<double>> out(2 * static_cast<std::size_t>(K) + 1);
  for (int k = -K; k <= K; ++k) {
    std::complex<double> acc = 0.0;
    for (int m = 0; m < Q; ++m) {
      const long long idx = ((static_cast<long long>(k) * m) % Q + Q) % Q;
      acc += samples[m] * twiddle[idx];
    }
    out[K + k] = acc / static_cast<double>(Q);
  }
  return out;
}

double max_frequency_slope(const FrequencyModel& model, double lo, double hi) {
  double worst = 0.0;
  constexpr int kProbe = 1024;
  for (int i = 0; i <= kProbe; ++i) {
    worst = std::max(worst, std::abs(model.frequency_slope(lo + (hi - lo) * i / kProbe)));
  }
  return worst;
}

// Weighted modal products 2 pi w_n Ghat_k rhohat_{-k} for one k.
std::vector<std::complex<double>> modal_weights(const SpectralTable& t, int k) {
  std::vector<std::complex<double>> p(t.size());
  for (std::size_t n = 0; n < t.size(); ++n) {
    p[n] = kTwoPi * t.weights()[n] * t.G_hat(n, k) * t.rho_hat(n, -k);
  }
  return p;
}

void check_j(std::int64_t j) {
  if (j < 0) throw UsageError("iteration index must be >= 0");
}

// Characteristic function of one increment, or 1 for no noise.
std::function<std::complex<double>(double)> increment_law(const PerturbationModel& noise) {
  if (noise.is_none()) return [](double) { return std::complex<double>(1.0); };
  if (!has_independent_increments(noise)) {
    throw UnsupportedError("oracle covariance needs independent increments; '" + noise.name() +
                           "' must use the Monte Carlo covariance estimator");
  }
  return [noise](double t) { return increment_characteristic(noise, t); };
}

std::complex<double> power(std::complex<double> z, std::int64_t n) {
  if (n == 0) return 1.0;
  if (z.imag() == 0.0 && z.real() >= 0.0) return std::pow(z.real(), static_cast<double>(n));
  return std::pow(z, static_cast<double>(n));
}

// Second-slot coefficient: Ghat_n for the bilinear form, conj(Ghat_{-n}) for
// the Hermitian one.
std::complex<double> second_coeff(const SpectralTable& t, std::size_t node, int n,
                                  CovarianceConvention conv) {
  if (conv == CovarianceConvention::bilinear) return t.G_hat(node, n);
  return std::conj(t.G_hat(node, -n));
}

std::vector<int> second_modes(const SpectralTable& t, CovarianceConvention conv) {
  std::vector<int> out = t.active_modes();
  if (conv == CovarianceConvention::hermitian) {
    for (int& k : out) k = -k;
    std::sort(out.begin(), out.end());
  }
  return out;
}

std::complex<double> combine(std::complex<double> a, std::complex<double> b,
                             CovarianceConvention conv) {
  return conv == CovarianceConvention::bilinear ? a * b : a * std::conj(b);
}

}  // namespace

std::complex<double> SpectralTable::G_hat(std::size_t n, int k) const {
  if (std::abs(k) > K_) return 0.0;
  return G_hat_[n * (2 * K_ + 1) + static_cast<std::size_t>(k + K_)];
}

std::complex<double> SpectralTable::rho_hat(std::size_t n, int k) const {
  if (std::abs(k) > 2 * K_) return 0.0;
  return rho_hat_[n * (4 * K_ + 1) + static_cast<std::size_t>(k + 2 * K_)];
}

SpectralTable build_spectral_table(const Observable& G, const InitialDensity& rho,
                                   const FrequencyModel& model, const SpectralOptions& opts) {
  if (opts.k_max < 1) throw UsageError("spectral table: k_max must be >= 1");
  if (opts.I_nodes != 0 && opts.I_nodes < 8) throw UsageError("spectral table: I_nodes must be >= 8");
  if (opts.theta_points < 4 * opts.k_max + 16) {
    throw UsageError("spectral table: theta_points must be >= 4 k_max + 16");
  }
  if (opts.nodes_per_panel < 2) throw UsageError("spectral table: nodes_per_panel must be >= 2");
  if (opts.max_j < 0) throw UsageError("spectral table: max_j must be >= 0");
  if (model.dimension() != 1) throw UsageError("the spectral oracle is implemented for n = 1 only");
  validate(rho);

  const auto support = effective_support(rho);
  const double lo = std::max(opts.I_min, support.first);
  const double hi = std::min(opts.I_max, support.second);
  if (!(lo < hi)) throw UsageError("spectral table: empty action range");

  SpectralTable t;
  const int K = opts.k_max;
  t.K_ = K;
  t.threads_ = std::max(1u, opts.threads);
  t.bound_estimated_ = G.bound_estimated();

  // Which modes the observable carries decides how fast the integrand turns.
  int k_reach = 0;
  {
    constexpr int kProbe = 33;
    std::vector<double> peak(2 * K + 1, 0.0);
    for (int i = 0; i < kProbe; ++i) {
      const auto c = angular_coefficients(G, lo + (hi - lo) * (i + 0.5) / kProbe, K, opts.theta_points);
      for (int k = 0; k <= 2 * K; ++k) peak[k] = std::max(peak[k], std::abs(c[k]));
    }
    const double top = *std::max_element(peak.begin(), peak.end());
    for (int k = -K; k <= K; ++k) {
      if (peak[k + K] > 1e-12 * top) k_reach = std::max(k_reach, std::abs(k));
    }
  }
  const double slope = max_frequency_slope(model, lo, hi);
  const double width = hi - lo;

  QuadratureRule rule;
  if (opts.I_nodes > 0) {
    if (opts.I_nodes <= opts.nodes_per_panel) {
      rule = composite_gauss_legendre(lo, hi, 1, opts.I_nodes);
    } else {
      const int panels = (opts.I_nodes + opts.nodes_per_panel - 1) / opts.nodes_per_panel;
      rule = composite_gauss_legendre(lo, hi, panels, opts.nodes_per_panel);
    }
  } else {
    const double need = static_cast<double>(opts.max_j) * std::max(k_reach, 1) * slope * width / kPanelPhase;
    const int min_panels = (opts.min_nodes + opts.nodes_per_panel - 1) / opts.nodes_per_panel;
    const int panels = std::max(min_panels, static_cast<int>(std::ceil(need)));
    rule = composite_gauss_legendre(lo, hi, panels, opts.nodes_per_panel);
  }
  const std::size_t N = rule.size();
  const double panel_width = opts.I_nodes > 0 && opts.I_nodes <= opts.nodes_per_panel
                                 ? width
                                 : width * opts.nodes_per_panel / static_cast<double>(N);
  if (slope * std::max(k_reach, 1) > 0.0) {
    const double limit = kPanelPhase / (slope * std::max(k_reach, 1) * panel_width);
    t.max_resolved_j_ = limit >= 9e18 ? std::numeric_limits<std::int64_t>::max()
                                      : static_cast<std::int64_t>(limit);
  } else {
    t.max_resolved_j_ = std::numeric_limits<std::int64_t>::max();
  }

  t.nodes_ = std::move(rule.nodes);
  t.weights_ = std::move(rule.weights);
  t.omega_.resize(N);
  t.G_hat_.resize(N * (2 * K + 1));
  t.rho_hat_.resize(N * (4 * K + 1));

  parallel_for_blocks(N, 64, t.threads_, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t n = begin; n < end; ++n) {
      const double I = t.nodes_[n];
      t.omega_[n] = model.frequency(I);
      const auto g = angular_coefficients(G, I, K, opts.theta_points);
      std::copy(g.begin(), g.end(), t.G_hat_.begin() + static_cast<std::ptrdiff_t>(n * (2 * K + 1)));
      const auto r = density_fourier_coeffs(rho, 2 * K, I);
      std::copy(r.begin(), r.end(), t.rho_hat_.begin() + static_cast<std::ptrdiff_t>(n * (4 * K + 1)));
    }
  });

  // Active modes and the truncation tail.
  std::vector<double> peak(2 * K + 1, 0.0);
  std::vector<double> mass(2 * K + 1, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    for (int k = -K; k <= K; ++k) {
      const auto g = t.G_hat(n, k);
      peak[k + K] = std::max(peak[k + K], std::abs(g));
      mass[k + K] += kTwoPi * t.weights_[n] * std::abs(g * t.rho_hat(n, -k));
    }
  }
  const double top = *std::max_element(peak.begin(), peak.end());
  for (int k = -K; k <= K; ++k) {
    if (top > 0.0 && peak[k + K] > 1e-12 * top) t.active_.push_back(k);
  }
  auto shell = [&](int k) { return k == 0 ? mass[K] : mass[K + k] + mass[K - k]; };
  for (int k = 0; k <= K; ++k) t.head_ = std::max(t.head_, shell(k));
  // Compare pairs of orders so that spectra with only odd (or even) harmonics
  // still show their tail.
  double last = shell(K), prev = shell(K - 1);
  if (K >= 3) {
    last = std::max(shell(K), shell(K - 1));
    prev = std::max(shell(K - 2), shell(K - 3));
  }
  if (last > 0.0) {
    const double ratio = prev > 0.0 ? last / prev : 1.0;
    t.tail_ = ratio < 1.0 ? last * std::max(1.0, ratio / (1.0 - ratio)) : last * K;
  }
  t.warning_ = t.tail_ > 1e-3 * t.head_;
  return t;
}

SpectralTable build_spectral_table(const Observable& G, const InitialDensity& rho,
                                   const FrequencyModel& model, int k_max, int I_nodes) {
  SpectralOptions opts;
  opts.k_max = k_max;
  opts.I_nodes = I_nodes;
  opts.theta_points = std::max(opts.theta_points, 4 * k_max + 16);
  return build_spectral_table(G, rho, model, opts);
}

CharacteristicFn characteristic_function(const PerturbationModel& noise) {
  if (!has_closed_form(noise)) {
    throw UnsupportedError("no closed-form characteristic sequence for '" + noise.name() + "'");
  }
  return [noise](int k, std::int64_t j) { return characteristic_sequence(noise, k, j).value; };
}

std::complex<double> oracle_mean_general(const SpectralTable& t, std::int64_t j,
                                         const CharacteristicFn& a) {
  check_j(j);
  std::complex<double> total = 0.0;
  for (int k : t.active_modes()) {
    std::complex<double> mode = 0.0;
    for (std::size_t n = 0; n < t.size(); ++n) {
      mode += kTwoPi * t.weights()[n] * t.G_hat(n, k) * t.rho_hat(n, -k) *
              exact_phasor(static_cast<double>(j) * k, t.omega()[n]);
    }
    total += (k == 0 || j == 0) ? mode : mode * a(k, j);
  }
  return total;
}

std::complex<double> oracle_mean_deterministic(const SpectralTable& t, std::int64_t j) {
  return oracle_mean_general(t, j, [](int, std::int64_t) { return std::complex<double>(1.0); });
}

std::complex<double> oracle_mean_brownian(const SpectralTable& t, std::int64_t j, double c) {
  if (!(c >= 0.0)) throw UsageError("oracle_mean_brownian: c must be >= 0");
  return oracle_mean_general(t, j, [c](int k, std::int64_t jj) {
    return std::complex<double>(std::exp(-0.5 * c * c * k * k * static_cast<double>(jj)));
  });
}

std::complex<double> oracle_mean(const SpectralTable& t, std::int64_t j,
                                 const PerturbationModel& noise) {
  if (noise.is_none()) return oracle_mean_deterministic(t, j);
  return oracle_mean_general(t, j, characteristic_function(noise));
}

std::vector<std::complex<double>> modal_series(const SpectralTable& t, int k, std::int64_t N) {
  check_j(N);
  const auto p = modal_weights(t, k);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(N) + 1, 0.0);
  const std::size_t count = out.size();
  parallel_for_blocks(count, kSeriesBlock, t.threads(),
                      [&](std::size_t begin, std::size_t end, std::size_t) {
                        for (std::size_t n = 0; n < t.size(); ++n) {
                          const double w = t.omega()[n];
                          std::complex<double> z = p[n] * exact_phasor(static_cast<double>(begin) * k, w);
                          const std::complex<double> step = exact_phasor(k, w);
                          for (std::size_t j = begin; j < end; ++j) {
                            out[j] += z;
                            z *= step;
                          }
                        }
                      });
  return out;
}

OracleSeries oracle_series(const SpectralTable& t, std::int64_t N, const CharacteristicFn& a) {
  check_j(N);
  OracleSeries s;
  s.values.assign(static_cast<std::size_t>(N) + 1, 0.0);
  s.truncation_error_estimate = t.tail_estimate();
  s.resolved = N <= t.max_resolved_j();
  for (int k : t.active_modes()) {
    const auto d = modal_series(t, k, N);
    for (std::int64_t j = 0; j <= N; ++j) s.values[j] += (k == 0 || j == 0) ? d[j] : d[j] * a(k, j);
  }
  return s;
}

OracleSeries oracle_series(const SpectralTable& t, std::int64_t N, const PerturbationModel& noise) {
  check_j(N);
  OracleSeries s;
  s.values.assign(static_cast<std::size_t>(N) + 1, 0.0);
  s.truncation_error_estimate = t.tail_estimate();
  s.resolved = N <= t.max_resolved_j();
  for (int k : t.active_modes()) {
    const auto d = modal_series(t, k, N);
    const auto a = characteristic_series(noise, k, N);
    for (std::int64_t j = 0; j <= N; ++j) s.values[j] += d[j] * a[j];
  }
  return s;
}

std::complex<double> cesaro_average(std::span<const std::complex<double>> series, std::int64_t N) {
  if (N < 1) throw UsageError("cesaro_average: N must be >= 1");
  if (static_cast<std::size_t>(N) >= series.size()) {
    throw UsageError("cesaro_average: N exceeds the series length");
  }
  std::complex<double> acc = 0.0;
  for (std::int64_t j = 1; j <= N; ++j) acc += series[j];
  return acc / static_cast<double>(N);
}

std::complex<double> cesaro_average(const OracleSeries& series, std::int64_t N) {
  return cesaro_average(std::span<const std::complex<double>>(series.values), N);
}

double cesaro_average(std::span<const double> series, std::int64_t N) {
  if (N < 1) throw UsageError("cesaro_average: N must be >= 1");
  if (static_cast<std::size_t>(N) >= series.size()) {
    throw UsageError("cesaro_average: N exceeds the series length");
  }
  double acc = 0.0;
  for (std::int64_t j = 1; j <= N; ++j) acc += series[j];
  return acc / static_cast<double>(N);
}

std::vector<std::complex<double>> cesaro_running(std::span<const std::complex<double>> series) {
  std::vector<std::complex<double>> out(series.size(), 0.0);
  std::complex<double> acc = 0.0;
  for (std::size_t j = 1; j < series.size(); ++j) {
    acc += series[j];
    out[j] = acc / static_cast<double>(j);
  }
  return out;
}

std::complex<double> limit_value(const SpectralTable& t) {
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < t.size(); ++n) {
    acc += kTwoPi * t.weights()[n] * t.G_hat(n, 0) * t.rho_hat(n, 0);
  }
  return acc;
}

std::complex<double> oracle_covariance(const SpectralTable& t, std::int64_t j, std::int64_t h,
                                       const PerturbationModel& noise, CovarianceConvention conv) {
  check_j(j);
  check_j(h);
  const auto phi = increment_law(noise);
  const double c = noise.intensity();
  const auto second = second_modes(t, conv);
  std::complex<double> joint = 0.0;
  for (int m : t.active_modes()) {
    for (int n : second) {
      const int s = m + n;
      const std::complex<double> damping =
          power(phi(c * s), j) * power(phi(c * n), h);
      if (damping == 0.0) continue;
      std::complex<double> acc = 0.0;
      const double mult = static_cast<double>(s) * static_cast<double>(j) +
                          static_cast<double>(n) * static_cast<double>(h);
      for (std::size_t q = 0; q < t.size(); ++q) {
        acc += kTwoPi * t.weights()[q] * t.G_hat(q, m) * second_coeff(t, q, n, conv) *
               t.rho_hat(q, -s) * exact_phasor(mult, t.omega()[q]);
      }
      joint += acc * damping;
    }
  }
  const auto mu_j = oracle_mean(t, j, noise);
  const auto mu_jh = oracle_mean(t, j + h, noise);
  return joint - combine(mu_j, mu_jh, conv);
}

std::complex<double> oracle_lag_covariance_average(const SpectralTable& t, std::int64_t N,
                                                   std::int64_t h, const PerturbationModel& noise,
                                                   CovarianceConvention conv) {
  check_j(h);
  const std::int64_t L = N - h;
  if (L < 1) throw UsageError("oracle_lag_covariance_average: need N > h");
  const auto phi = increment_law(noise);
  const double c = noise.intensity();
  const auto second = second_modes(t, conv);

  std::complex<double> joint = 0.0;
  for (int m : t.active_modes()) {
    for (int n : second) {
      const int s = m + n;
      const std::complex<double> step_damp = phi(c * s);
      const std::complex<double> lag_damp = power(phi(c * n), h);
      std::complex<double> acc = 0.0;
      for (std::size_t q = 0; q < t.size(); ++q) {
        const double w = t.omega()[q];
        // sum_{j=1}^{L} z^j with z = e^{i s omega} phi(c s).
        const std::complex<double> z = exact_phasor(s, w) * step_damp;
        std::complex<double> geo;
        if (std::abs(1.0 - z) > 1e-3) {
          const std::complex<double> zL = exact_phasor(static_cast<double>(s) * L, w) * power(step_damp, L);
          geo = z * (1.0 - zL) / (1.0 - z);
        } else {
          geo = 0.0;
          std::complex<double> zz = 1.0;
          for (std::int64_t j = 1; j <= L; ++j) {
            zz *= z;
            geo += zz;
          }
        }
        acc += kTwoPi * t.weights()[q] * t.G_hat(q, m) * second_coeff(t, q, n, conv) *
               t.rho_hat(q, -s) * exact_phasor(static_cast<double>(n) * h, w) * geo;
      }
      joint += acc * lag_damp;
    }
  }

  const OracleSeries mu = oracle_series(t, N, noise);
  std::complex<double> means = 0.0;
  for (std::int64_t j = 1; j <= L; ++j) means += combine(mu.values[j], mu.values[j + h], conv);
  return (joint - means) / static_cast<double>(L);
}

std::complex<double> oracle_lag_limit(const SpectralTable& t, std::int64_t h,
                                      const PerturbationModel& noise, CovarianceConvention conv) {
  check_j(h);
  const auto phi = increment_law(noise);
  const double c = noise.intensity();
  std::complex<double> joint = 0.0;
  for (int m : t.active_modes()) {
    const int n = -m;
    const std::complex<double> lag_damp = power(phi(c * n), h);
    std::complex<double> acc = 0.0;
    for (std::size_t q = 0; q < t.size(); ++q) {
      acc += kTwoPi * t.weights()[q] * t.G_hat(q, m) * second_coeff(t, q, n, conv) *
             t.rho_hat(q, 0) * exact_phasor(static_cast<double>(n) * h, t.omega()[q]);
    }
    joint += acc * lag_damp;
  }
  const auto lim = limit_value(t);
  return joint - combine(lim, lim, conv);
}

LimitingVariance oracle_limiting_variance(const SpectralTable& t, const PerturbationModel& noise) {
  const auto phi = increment_law(noise);
  const double c = noise.intensity();
  LimitingVariance out;
  const auto lim = limit_value(t);
  double zero_mode = 0.0;
  double total = 0.0;
  double star = 0.0;
  for (int n : t.active_modes()) {
    const std::complex<double> damp = phi(c * n);
    for (std::size_t q = 0; q < t.size(); ++q) {
      const double w = kTwoPi * t.weights()[q] * std::norm(t.G_hat(q, n)) * t.rho_hat(q, 0).real();
      if (n == 0) {
        zero_mode += w;
        continue;
      }
      total += w;
      const std::complex<double> z = exact_phasor(n, t.omega()[q]) * damp;
      star += w * ((1.0 + z) / (1.0 - z)).real();
    }
  }
  out.between_fiber_variance = std::max(0.0, zero_mode - std::norm(lim));
  out.sigma2 = total + out.between_fiber_variance;
  const double scale = std::max(out.sigma2, std::norm(lim));
  out.sigma_star2 = out.between_fiber_variance > 1e-12 * std::max(scale, 1e-300)
                        ? std::numeric_limits<double>::infinity()
                        : star + out.between_fiber_variance;
  return out;
}

FiberModes fiber_modes(const Observable& G, const InitialDensity& rho, const FrequencyModel& model,
                       double I, int k_max, int theta_points) {
  if (k_max < 1) throw UsageError("fiber_modes: k_max must be >= 1");
  if (theta_points < 4 * k_max + 16) throw UsageError("fiber_modes: too few theta points");
  FiberModes f;
  f.action = I;
  f.omega = model.frequency(I);
  const auto g = angular_coefficients(G, I, k_max, theta_points);
  const auto r = density_fourier_coeffs(rho, k_max, I);
  const double r0 = r[k_max].real();
  if (!(r0 > 0.0)) throw DomainError("fiber_modes: the density vanishes on this action fiber");
  std::vector<std::complex<double>> w(2 * k_max + 1);
  double top = 0.0;
  for (int k = -k_max; k <= k_max; ++k) {
    w[k + k_max] = g[k + k_max] * r[k_max - k] / r0;
    top = std::max(top, std::abs(w[k + k_max]));
  }
  for (int k = -k_max; k <= k_max; ++k) {
    if (top > 0.0 && std::abs(w[k + k_max]) > 1e-14 * top) {
      f.modes.push_back(k);
      f.weights.push_back(w[k + k_max]);
    }
  }
  return f;
}

std::complex<double> fiber_mode_cesaro(const FiberModes& f, int k, std::int64_t N,
                                       const CharacteristicFn& a) {
  if (N < 1) throw UsageError("fiber_mode_cesaro: N must be >= 1");
  std::complex<double> weight = 0.0;
  for (std::size_t i = 0; i < f.modes.size(); ++i) {
    if (f.modes[i] == k) weight = f.weights[i];
  }
  if (weight == 0.0) return 0.0;
  std::complex<double> acc = 0.0;
  for (std::int64_t j = 1; j <= N; ++j) {
    const auto rot = exact_phasor(static_cast<double>(j) * k, f.omega);
    acc += k == 0 ? std::complex<double>(1.0) : rot * a(k, j);
  }
  return weight * acc / static_cast<double>(N);
}

std::complex<double> fiber_cesaro(const FiberModes& f, std::int64_t N, const CharacteristicFn& a) {
  std::complex<double> total = 0.0;
  for (int k : f.modes) total += fiber_mode_cesaro(f, k, N, a);
  return total;
}

std::complex<double> fiber_limit(const FiberModes& f) {
  for (std::size_t i = 0; i < f.modes.size(); ++i) {
    if (f.modes[i] == 0) return f.weights[i];
  }
  return 0.0;
}

}  // namespace twist
