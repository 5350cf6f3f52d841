#include "twist/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "twist/errors.hpp"

namespace twist {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double von_mises_pdf(double theta, double kappa, double mu) {
  if (kappa == 0.0) return 1.0 / kTwoPi;
  // exp(kappa cos) / (2 pi I_0(kappa)) written with the scaled Bessel value.
  return std::exp(kappa * (std::cos(theta - mu) - 1.0)) / (kTwoPi * scaled_bessel_i(0, kappa));
}

// Best and Fisher (1979) rejection sampler.
double draw_von_mises(double kappa, double mu, Stream& s) {
  if (kappa == 0.0) return kTwoPi * s.uniform();
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  for (;;) {
    const double z = std::cos(kPi * s.uniform());
    const double f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    const double u2 = s.uniform_open();
    if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
      const double a = std::acos(std::clamp(f, -1.0, 1.0));
      return TorusAngle(s.uniform() < 0.5 ? mu - a : mu + a).value();
    }
  }
}

double gaussian_radius(const GaussianPhaseSpace& g) { return std::hypot(g.q0, g.p0); }

void check_action(double I) {
  if (!(I >= 0.0) || !std::isfinite(I)) throw DomainError("density: action must be finite and >= 0");
}

}  // namespace

double scaled_bessel_i(int nu, double x) {
  if (x < 0.0) throw DomainError("scaled_bessel_i: x must be >= 0");
  nu = std::abs(nu);
  if (x == 0.0) return nu == 0 ? 1.0 : 0.0;
  if (x < 600.0) return std::cyl_bessel_i(static_cast<double>(nu), x) * std::exp(-x);
  // Large-argument expansion; the terms shrink fast for x >= 600 and nu << x.
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0;
  for (int m = 1; m < 60; ++m) {
    const double next = -term * (mu - (2.0 * m - 1) * (2.0 * m - 1)) / (m * 8.0 * x);
    if (std::abs(next) > std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / std::sqrt(kTwoPi * x);
}

ProductDensity ramp_von_mises(double a, double b, double kappa, double mu) {
  if (!(a >= 0.0 && b > a)) throw UsageError("ramp density needs 0 <= a < b");
  if (!(kappa >= 0.0)) throw UsageError("von Mises concentration must be >= 0");
  ProductDensity d;
  const double w = b - a;
  d.action_pdf = [a, b, w](double I) { return (I < a || I > b) ? 0.0 : 2.0 * (b - I) / (w * w); };
  d.action_sampler = [b, w](Stream& s) { return b - w * std::sqrt(s.uniform_open()); };
  d.support_lo = a;
  d.support_hi = b;
  d.von_mises_kappa = kappa;
  d.von_mises_mu = mu;
  return d;
}

void validate(const InitialDensity& rho) {
  std::visit(overloaded{[](const GaussianPhaseSpace& g) {
                          if (!(g.eps0 > 0.0) || !std::isfinite(g.eps0)) {
                            throw UsageError("eps0 must be > 0");
                          }
                          if (!std::isfinite(g.q0) || !std::isfinite(g.p0)) {
                            throw UsageError("q0 and p0 must be finite");
                          }
                        },
                        [](const ProductDensity& d) {
                          if (!d.action_pdf) throw UsageError("product density needs an action pdf");
                          if (!(d.support_lo >= 0.0 && d.support_hi > d.support_lo)) {
                            throw UsageError("product density needs 0 <= lo < hi");
                          }
                          if (!(d.von_mises_kappa >= 0.0)) throw UsageError("kappa must be >= 0");
                        },
                        [](const CustomDensity& d) {
                          if (!d.pdf) throw UsageError("custom density needs a pdf");
                          if (!(d.support_lo >= 0.0 && d.support_hi > d.support_lo)) {
                            throw UsageError("custom density needs 0 <= lo < hi");
                          }
                        }},
             rho);
}

std::pair<double, double> effective_support(const InitialDensity& rho) {
  return std::visit(overloaded{[](const GaussianPhaseSpace& g) {
                                 // Radius R +- 8 sd in the (q, p) plane: tail mass ~ e^{-32}.
                                 const double s = std::sqrt(g.eps0), R = gaussian_radius(g);
                                 const double lo = std::max(0.0, R - 8.0 * s);
                                 const double hi = R + 8.0 * s;
                                 return std::pair{0.5 * lo * lo, 0.5 * hi * hi};
                               },
                               [](const auto& d) { return std::pair{d.support_lo, d.support_hi}; }},
                    rho);
}

double density_value(const InitialDensity& rho, double I, double theta) {
  check_action(I);
  return std::visit(overloaded{[&](const GaussianPhaseSpace& g) {
                                 const double R = gaussian_radius(g);
                                 const double phi = std::atan2(g.p0, g.q0);
                                 const double e = I + 0.5 * R * R -
                                                  R * std::sqrt(2.0 * I) * std::cos(theta + phi);
                                 return std::exp(-e / g.eps0) / (kTwoPi * g.eps0);
                               },
                               [&](const ProductDensity& d) {
                                 return d.action_pdf(I) *
                                        von_mises_pdf(theta, d.von_mises_kappa, d.von_mises_mu);
                               },
                               [&](const CustomDensity& d) { return d.pdf(I, theta); }},
                    rho);
}

double density_value(const InitialDensity& rho, double I, TorusAngle theta) {
  return density_value(rho, I, theta.value());
}

PhasePoint draw_initial(const InitialDensity& rho, Stream& s) {
  return std::visit(
      overloaded{[&](const GaussianPhaseSpace& g) {
                   const double sd = std::sqrt(g.eps0);
                   for (;;) {
                     const double q = g.q0 + sd * s.normal();
                     const double p = g.p0 + sd * s.normal();
                     if (q != 0.0 || p != 0.0) return canonical_to_phase_point(q, p);
                   }
                 },
                 [&](const ProductDensity& d) {
                   if (!d.action_sampler) {
                     throw UnsupportedError("product density has no action sampler");
                   }
                   const double I = d.action_sampler(s);
                   return PhasePoint{I, draw_von_mises(d.von_mises_kappa, d.von_mises_mu, s)};
                 },
                 [&](const CustomDensity& d) {
                   if (!d.sampler) throw UnsupportedError("custom density has no sampler");
                   PhasePoint p = d.sampler(s);
                   p.angle = TorusAngle(p.angle).value();
                   return p;
                 }},
      rho);
}

std::vector<PhasePoint> sample_initial_points(const InitialDensity& rho, std::size_t M,
                                              const SeedPlan& plan, unsigned threads) {
  if (M < 1) throw UsageError("sample_initial: M must be >= 1");
  validate(rho);
  if (const auto* c = std::get_if<CustomDensity>(&rho); c && !c->sampler) {
    throw UnsupportedError("custom density has no sampler");
  }
  std::vector<PhasePoint> out(M);
  parallel_for_blocks(M, 4096, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      Stream s = plan.stream(i, kLaneInitial);
      out[i] = draw_initial(rho, s);
    }
  });
  return out;
}

std::vector<ActionAngleState> sample_initial(const InitialDensity& rho, std::size_t M,
                                             const SeedPlan& plan, unsigned threads) {
  const auto pts = sample_initial_points(rho, M, plan, threads);
  std::vector<ActionAngleState> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.emplace_back(p);
  return out;
}

std::complex<double> rho_fourier_coeff(const InitialDensity& rho, int k, double I,
                                       int quadrature_points) {
  if (quadrature_points < 4 * std::abs(k) + 16) {
    throw UsageError("rho_fourier_coeff: need at least 4|k| + 16 quadrature points");
  }
  check_action(I);
  std::complex<double> acc = 0.0;
  for (int m = 0; m < quadrature_points; ++m) {
    const double theta = kTwoPi * m / quadrature_points;
    // k*m reduced first keeps the phase argument small.
    const double phase = -kTwoPi * static_cast<double>((static_cast<long long>(k) * m) % quadrature_points) /
                         quadrature_points;
    acc += density_value(rho, I, theta) * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc / static_cast<double>(quadrature_points);
}

std::complex<double> gaussian_fourier_coeff(const GaussianPhaseSpace& g, int k, double I) {
  return gaussian_fourier_coeffs(g, std::abs(k), I)[static_cast<std::size_t>(k + std::abs(k))];
}

std::vector<std::complex<double>> gaussian_fourier_coeffs(const GaussianPhaseSpace& g, int K,
                                                          double I) {
  check_action(I);
  if (K < 0) throw UsageError("gaussian_fourier_coeffs: K must be >= 0");
  const double R = gaussian_radius(g);
  const double phi = std::atan2(g.p0, g.q0);
  const double r = std::sqrt(2.0 * I);
  const double x = R * r / g.eps0;
  // exp(-(I + R^2/2)/eps0) I_k(x) = exp(-(r - R)^2 / 2 eps0) * [e^{-x} I_k(x)].
  const double envelope = std::exp(-(r - R) * (r - R) / (2.0 * g.eps0)) / (kTwoPi * g.eps0);
  std::vector<std::complex<double>> out(2 * static_cast<std::size_t>(K) + 1);
  for (int k = 0; k <= K; ++k) {
    const double mag = envelope * scaled_bessel_i(k, x);
    out[K + k] = std::polar(mag, k * phi);
    out[K - k] = std::polar(mag, -k * phi);
  }
  return out;
}

std::vector<std::complex<double>> density_fourier_coeffs(const InitialDensity& rho, int K,
                                                         double I) {
  if (K < 0) throw UsageError("density_fourier_coeffs: K must be >= 0");
  if (const auto* g = std::get_if<GaussianPhaseSpace>(&rho)) return gaussian_fourier_coeffs(*g, K, I);
  check_action(I);
  std::vector<std::complex<double>> out(2 * static_cast<std::size_t>(K) + 1);
  if (const auto* d = std::get_if<ProductDensity>(&rho)) {
    const double a = d->action_pdf(I);
    const double i0 = d->von_mises_kappa == 0.0 ? 1.0 : scaled_bessel_i(0, d->von_mises_kappa);
    for (int k = -K; k <= K; ++k) {
      const double ik = d->von_mises_kappa == 0.0 ? (k == 0 ? 1.0 : 0.0)
                                                  : scaled_bessel_i(k, d->von_mises_kappa);
      out[K + k] = std::polar(a * ik / (kTwoPi * i0), -k * d->von_mises_mu);
    }
    return out;
  }
  int Q = 256;
  while (Q < 4 * K + 16) Q *= 2;
  for (int k = -K; k <= K; ++k) out[K + k] = rho_fourier_coeff(rho, k, I, Q);
  return out;
}

}  // namespace twist
