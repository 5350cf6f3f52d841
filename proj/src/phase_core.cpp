#include "twist/phase_core.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "twist/errors.hpp"

namespace twist {

namespace {

// 2pi = kSplitHi + kSplitLo to about 1e-32; kSplitHi is the double nearest 2pi.
constexpr double kSplitHi = 6.283185307179586;
constexpr double kSplitLo = 2.4492935982947064e-16;

// multiplier * omega - 2pi * n, with n the nearest integer, in about [-pi, pi].
double centred_remainder(double multiplier, double omega, double* turns = nullptr) {
  const double hi = multiplier * omega;
  const double lo = std::fma(multiplier, omega, -hi);
  const double n = std::nearbyint(hi / kSplitHi);
  double r = std::fma(-n, kSplitHi, hi);
  r = std::fma(-n, kSplitLo, r);
  r += lo;
  if (turns) *turns = n;
  return r;
}

double horner(const std::vector<double>& c, double x) noexcept {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<double> differentiate(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(static_cast<double>(i) * c[i]);
  if (d.empty()) d.push_back(0.0);
  return d;
}

}  // namespace

TorusAngle::TorusAngle(double radians) {
  if (!std::isfinite(radians)) throw DomainError("angle must be finite");
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2pi.
  if (r >= kTwoPi) r = 0.0;
  value_ = r;
}

TorusAngle TorusAngle::operator+(TorusAngle other) const { return TorusAngle(value_ + other.value_); }
TorusAngle TorusAngle::operator-(TorusAngle other) const { return TorusAngle(value_ - other.value_); }
TorusAngle TorusAngle::operator-() const { return TorusAngle(-value_); }

TorusAngle wrap_angle(double x) { return TorusAngle(x); }

double reduced_phase(double multiplier, double omega) {
  if (!std::isfinite(multiplier) || !std::isfinite(omega)) {
    throw DomainError("reduced_phase: non-finite argument");
  }
  double r = centred_remainder(multiplier, omega);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi || r < 0.0) r = 0.0;
  return r;
}

ActionAngleState::ActionAngleState(std::vector<double> action, std::vector<TorusAngle> angle)
    : action_(std::move(action)), angle_(std::move(angle)) {
  if (action_.empty() || action_.size() != angle_.size()) {
    throw UsageError("ActionAngleState: action and angle must have the same nonzero length");
  }
  for (double I : action_) {
    if (!std::isfinite(I)) throw DomainError("ActionAngleState: action must be finite");
  }
}

ActionAngleState::ActionAngleState(double action, double angle)
    : ActionAngleState(std::vector<double>{action}, std::vector<TorusAngle>{TorusAngle(angle)}) {}

PhasePoint ActionAngleState::scalar() const { return {I(), theta()}; }

FrequencyModel FrequencyModel::polynomial(std::vector<double> coeffs, ActionDomain domain) {
  if (coeffs.empty()) coeffs.push_back(0.0);
  for (double c : coeffs) {
    if (!std::isfinite(c)) throw UsageError("Hamiltonian coefficients must be finite");
  }
  if (!(domain.lower <= domain.upper)) throw UsageError("action domain is empty");
  FrequencyModel m;
  m.h_coeffs_ = std::move(coeffs);
  m.omega_coeffs_ = differentiate(m.h_coeffs_);
  m.slope_coeffs_ = differentiate(m.omega_coeffs_);
  m.domain_ = domain;
  return m;
}

FrequencyModel FrequencyModel::cubic(double alpha, double beta, double gamma, ActionDomain domain) {
  return polynomial({0.0, alpha, beta, gamma}, domain);
}

FrequencyModel FrequencyModel::constant_frequency(double omega, ActionDomain domain) {
  return polynomial({0.0, omega}, domain);
}

FrequencyModel FrequencyModel::general(std::size_t dimension, HamiltonianFn h, FrequencyFn omega,
                                       ActionDomain domain) {
  if (dimension == 0) throw UsageError("FrequencyModel: dimension must be >= 1");
  if (!h || !omega) throw UsageError("FrequencyModel: both h and omega are required");
  FrequencyModel m;
  m.dimension_ = dimension;
  m.custom_h_ = std::move(h);
  m.custom_omega_ = std::move(omega);
  m.domain_ = domain;
  return m;
}

void FrequencyModel::check_domain(double I) const {
  if (!std::isfinite(I) || !domain_.contains(I)) {
    throw DomainError("action " + std::to_string(I) + " outside the configured domain");
  }
}

double FrequencyModel::hamiltonian(double I) const {
  check_domain(I);
  if (custom_h_) {
    if (dimension_ != 1) throw UsageError("scalar hamiltonian() requires dimension 1");
    return custom_h_(std::span<const double>(&I, 1));
  }
  return horner(h_coeffs_, I);
}

double FrequencyModel::frequency(double I) const {
  check_domain(I);
  return frequency_unchecked(I);
}

double FrequencyModel::frequency_unchecked(double I) const noexcept {
  if (custom_omega_) {
    double out = 0.0;
    custom_omega_(std::span<const double>(&I, 1), std::span<double>(&out, 1));
    return out;
  }
  return horner(omega_coeffs_, I);
}

double FrequencyModel::frequency_slope(double I) const {
  check_domain(I);
  if (!custom_omega_) return horner(slope_coeffs_, I);
  const double step = 1e-6 * std::max(1.0, std::abs(I));
  return (frequency_unchecked(I + step) - frequency_unchecked(I - step)) / (2.0 * step);
}

void FrequencyModel::frequency(std::span<const double> I, std::span<double> out) const {
  if (I.size() != dimension_ || out.size() != dimension_) {
    throw UsageError("frequency: dimension mismatch");
  }
  for (double x : I) check_domain(x);
  if (custom_omega_) {
    custom_omega_(I, out);
  } else {
    out[0] = horner(omega_coeffs_, I[0]);
  }
}

double frequency(const FrequencyModel& model, double I) { return model.frequency(I); }

Observable::Observable(std::string name, ScalarFn fn, bool real_valued, std::optional<double> bound)
    : name_(std::move(name)), scalar_(std::move(fn)), real_valued_(real_valued), bound_(bound) {
  if (!scalar_) throw UsageError("Observable: empty evaluator");
  if (bound_ && !(*bound_ >= 0.0)) throw UsageError("Observable: bound must be >= 0");
}

Observable::Observable(std::string name, VectorFn fn, bool real_valued, double bound)
    : name_(std::move(name)), vector_(std::move(fn)), real_valued_(real_valued), bound_(bound) {
  if (!vector_) throw UsageError("Observable: empty evaluator");
  if (!(bound >= 0.0)) throw UsageError("Observable: bound must be >= 0");
}

Observable Observable::sqrt2I_exp(double I_max) {
  return Observable(
      "sqrt2I_exp",
      [](double I, double theta) { return std::polar(std::sqrt(2.0 * I), -theta); }, false,
      std::sqrt(2.0 * I_max));
}

Observable Observable::action_cos(double I_max) {
  return Observable(
      "I_cos", [](double I, double theta) { return std::complex<double>(I * std::cos(theta), 0.0); },
      true, I_max);
}

Observable Observable::action_exp(double I_max) {
  return Observable(
      "I_exp", [](double I, double theta) { return std::polar(I, -theta); }, false, I_max);
}

Observable Observable::builtin(std::string_view name, double I_max) {
  if (name == "sqrt2I_exp") return sqrt2I_exp(I_max);
  if (name == "I_cos") return action_cos(I_max);
  if (name == "I_exp") return action_exp(I_max);
  if (name == "I") {
    return Observable(
        "I", [](double I, double) { return std::complex<double>(I, 0.0); }, true, I_max);
  }
  if (name == "zero") {
    return Observable(
        "zero", [](double, double) { return std::complex<double>(0.0, 0.0); }, true, 0.0);
  }
  throw UsageError("unknown observable '" + std::string(name) + "'");
}

double Observable::bound() const {
  if (!bound_) throw UsageError("observable '" + name_ + "' has no sup-norm bound");
  return *bound_;
}

Observable Observable::with_estimated_bound(double I_lo, double I_hi) const {
  if (!scalar_) throw UsageError("bound estimation needs a scalar evaluator");
  if (!(I_lo <= I_hi)) throw UsageError("bound estimation: empty action range");
  constexpr int kGrid = 256;
  double worst = 0.0;
  for (int a = 0; a < kGrid; ++a) {
    const double I = I_lo + (I_hi - I_lo) * a / (kGrid - 1);
    for (int b = 0; b < kGrid; ++b) {
      worst = std::max(worst, std::abs(scalar_(I, kTwoPi * b / kGrid)));
    }
  }
  Observable out = *this;
  out.bound_ = 1.05 * worst;
  out.bound_estimated_ = true;
  return out;
}

std::complex<double> Observable::operator()(const ActionAngleState& s) const {
  if (vector_) return vector_(s.action(), s.angle());
  return scalar_(s.I(), s.theta());
}

NonresonanceReport check_nonresonance(const FrequencyModel& model, std::span<const double> grid,
                                      int k_max, double tol) {
  if (grid.empty()) throw UsageError("check_nonresonance: empty action grid");
  if (k_max < 1) throw UsageError("check_nonresonance: k_max must be >= 1");
  NonresonanceReport rep;
  rep.k_max = k_max;
  rep.tolerance = tol;
  rep.grid.assign(grid.begin(), grid.end());
  for (double I : grid) {
    const double w = model.frequency(I);
    for (int k = 1; k <= k_max; ++k) {
      double turns = 0.0;
      const double margin = std::abs(centred_remainder(k, w, &turns));
      if (margin < rep.worst_margin) {
        rep.worst_margin = margin;
        rep.worst_action = I;
        rep.worst_k = k;
      }
      if (margin <= tol) {
        rep.resonant_points.push_back({I, k, static_cast<std::int64_t>(turns), margin});
      }
    }
  }
  return rep;
}

PhasePoint canonical_to_phase_point(double q, double p) {
  if (!std::isfinite(q) || !std::isfinite(p)) throw DomainError("non-finite canonical point");
  if (q == 0.0 && p == 0.0) {
    throw DegeneratePointError("angle is undefined at (q, p) = (0, 0)");
  }
  return {0.5 * (q * q + p * p), TorusAngle(-std::atan2(p, q)).value()};
}

ActionAngleState canonical_to_action_angle(double q, double p) {
  return ActionAngleState(canonical_to_phase_point(q, p));
}

CanonicalPoint action_angle_to_canonical(double I, double theta) {
  if (!(I >= 0.0)) throw DomainError("action must be >= 0");
  const double r = std::sqrt(2.0 * I);
  return {r * std::cos(theta), -r * std::sin(theta)};
}

CanonicalPoint action_angle_to_canonical(const ActionAngleState& s) {
  if (s.dimension() != 1) throw UsageError("canonical transform is defined for n = 1 only");
  return action_angle_to_canonical(s.I(), s.theta());
}

std::complex<double> theta_average(const Observable& G, double I, int quadrature_points) {
  if (quadrature_points < 16) throw UsageError("theta_average: need at least 16 points");
  std::complex<double> acc = 0.0;
  for (int m = 0; m < quadrature_points; ++m) acc += G(I, kTwoPi * m / quadrature_points);
  return acc / static_cast<double>(quadrature_points);
}

}  // namespace twist
