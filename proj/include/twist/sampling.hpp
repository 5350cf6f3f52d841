#pragma once

// Initial densities rho_0(I, theta): pointwise evaluation, exact samplers and
// angular Fourier coefficients.

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "twist/phase_core.hpp"
#include "twist/random.hpp"

namespace twist {

/// (q, p) ~ Normal((q0, p0), eps0 * Id) pushed through q + ip = sqrt(2I) e^{-i theta}.
/// In action-angle form
///   rho_0 = (1 / 2 pi eps0) exp(-(I + R^2/2 - R sqrt(2I) cos(theta + phi)) / eps0)
/// with R = |(q0, p0)| and phi = atan2(p0, q0).
struct GaussianPhaseSpace {
  double q0 = 1.0;
  double p0 = 0.0;
  double eps0 = 0.01;
};

/// rho_0(I, theta) = action_pdf(I) * angle_pdf(theta). The angle factor is
/// uniform (1/2pi) unless a von Mises concentration is given.
struct ProductDensity {
  std::function<double(double)> action_pdf;
  std::function<double(Stream&)> action_sampler;  // optional
  double support_lo = 0.0;
  double support_hi = 1.0;
  double von_mises_kappa = 0.0;
  double von_mises_mu = 0.0;
};

struct CustomDensity {
  std::function<double(double, double)> pdf;
  std::function<PhasePoint(Stream&)> sampler;  // optional
  double support_lo = 0.0;
  double support_hi = 2.0;
};

using InitialDensity = std::variant<GaussianPhaseSpace, ProductDensity, CustomDensity>;

/// Linear ramp 2(b - I)/(b - a)^2 on [a, b] times a von Mises(kappa, mu) angle
/// law. Unlike the Gaussian it is bounded away from zero at the lower action
/// boundary.
ProductDensity ramp_von_mises(double a, double b, double kappa, double mu = 0.0);

void validate(const InitialDensity& rho);

/// Action interval outside which the density is negligible (< 1e-12 of the
/// mass for the Gaussian) or zero.
std::pair<double, double> effective_support(const InitialDensity& rho);

double density_value(const InitialDensity& rho, double I, TorusAngle theta);
double density_value(const InitialDensity& rho, double I, double theta);

PhasePoint draw_initial(const InitialDensity& rho, Stream& stream);

/// M points; point i is drawn from plan.stream(i, kLaneInitial), so the set is
/// the same for every thread count.
std::vector<PhasePoint> sample_initial_points(const InitialDensity& rho, std::size_t M,
                                              const SeedPlan& plan, unsigned threads = 1);
std::vector<ActionAngleState> sample_initial(const InitialDensity& rho, std::size_t M,
                                             const SeedPlan& plan, unsigned threads = 1);

/// (1/2pi) * integral of rho_0(I, theta) e^{-ik theta} d theta by the periodic
/// trapezoid rule.
std::complex<double> rho_fourier_coeff(const InitialDensity& rho, int k, double I,
                                       int quadrature_points);

/// Closed form through modified Bessel functions:
///   (1/2 pi eps0) exp(-(I + R^2/2)/eps0) I_k(R sqrt(2I)/eps0) e^{ik phi}.
std::complex<double> gaussian_fourier_coeff(const GaussianPhaseSpace& g, int k, double I);

/// Closed-form coefficients k = -K..K at one action (index k + K), computed
/// with exponentially scaled Bessel functions so no intermediate overflows.
std::vector<std::complex<double>> gaussian_fourier_coeffs(const GaussianPhaseSpace& g, int K,
                                                          double I);

/// Coefficients k = -K..K at one action (index k + K): closed forms for the
/// Gaussian and product densities, trapezoid quadrature for custom ones.
std::vector<std::complex<double>> density_fourier_coeffs(const InitialDensity& rho, int K,
                                                         double I);

/// exp(-x) I_nu(x) for x >= 0.
double scaled_bessel_i(int nu, double x);

}  // namespace twist
