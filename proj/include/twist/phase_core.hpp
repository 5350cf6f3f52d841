#pragma once

// Action-angle phase space: torus arithmetic, polynomial Hamiltonians and
// their frequency maps, observables and the nonresonance scan.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace twist {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

/// Point of the circle R / 2piZ, stored as its representative in [0, 2pi).
class TorusAngle {
 public:
  constexpr TorusAngle() = default;
  /// Wraps `radians`; throws DomainError when it is not finite.
  explicit TorusAngle(double radians);

  constexpr double value() const noexcept { return value_; }

  TorusAngle operator+(TorusAngle other) const;
  TorusAngle operator-(TorusAngle other) const;
  TorusAngle operator-() const;

  friend constexpr bool operator==(TorusAngle, TorusAngle) = default;

 private:
  double value_ = 0.0;
};

TorusAngle wrap_angle(double x);

/// `multiplier * omega` reduced modulo 2pi into [0, 2pi).
///
/// The product is formed exactly with an FMA two-product and reduced against
/// a two-term split of 2pi, so the result keeps ~1e-16 absolute accuracy for
/// multipliers up to 2^40 (the closed-form iterate j*omega(I) for j ~ 1e7 is
/// the intended use).
double reduced_phase(double multiplier, double omega);

/// Scalar (n = 1) phase point; the hot loops of the Monte Carlo engines work
/// on these instead of ActionAngleState.
struct PhasePoint {
  double action = 0.0;
  double angle = 0.0;  // in [0, 2pi)
};

class ActionAngleState {
 public:
  ActionAngleState() = default;
  ActionAngleState(std::vector<double> action, std::vector<TorusAngle> angle);
  ActionAngleState(double action, double angle);
  explicit ActionAngleState(PhasePoint p) : ActionAngleState(p.action, p.angle) {}

  std::size_t dimension() const noexcept { return action_.size(); }
  std::span<const double> action() const noexcept { return action_; }
  std::span<const TorusAngle> angle() const noexcept { return angle_; }

  // First component; convenience for the one-degree-of-freedom case.
  double I() const { return action_.at(0); }
  double theta() const { return angle_.at(0).value(); }
  PhasePoint scalar() const;

  friend bool operator==(const ActionAngleState&, const ActionAngleState&) = default;

 private:
  std::vector<double> action_;
  std::vector<TorusAngle> angle_;
};

/// Closed interval of admissible actions, applied componentwise.
struct ActionDomain {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double I) const noexcept { return I >= lower && I <= upper; }
};

/// Hamiltonian h(I) together with its frequency map omega = dh/dI.
///
/// The polynomial form covers one degree of freedom and differentiates at the
/// coefficient level. The general form takes a user-supplied (h, omega) pair on
/// R^n; no consistency between the two callables is enforced for it.
class FrequencyModel {
 public:
  using HamiltonianFn = std::function<double(std::span<const double>)>;
  using FrequencyFn = std::function<void(std::span<const double>, std::span<double>)>;

  /// h(I) = sum_i coeffs[i] * I^i.
  static FrequencyModel polynomial(std::vector<double> coeffs, ActionDomain domain = {});
  /// h(I) = alpha I + beta I^2 + gamma I^3.
  static FrequencyModel cubic(double alpha, double beta, double gamma, ActionDomain domain = {});
  /// omega(I) = constant, h(I) = constant * I.
  static FrequencyModel constant_frequency(double omega, ActionDomain domain = {});
  static FrequencyModel general(std::size_t dimension, HamiltonianFn h, FrequencyFn omega,
                                ActionDomain domain = {});

  std::size_t dimension() const noexcept { return dimension_; }
  bool is_polynomial() const noexcept { return !custom_omega_; }
  const std::vector<double>& hamiltonian_coefficients() const noexcept { return h_coeffs_; }
  const std::vector<double>& frequency_coefficients() const noexcept { return omega_coeffs_; }
  const ActionDomain& domain() const noexcept { return domain_; }

  double hamiltonian(double I) const;
  double frequency(double I) const;
  /// d omega / dI. Exact for polynomials, centred difference otherwise.
  double frequency_slope(double I) const;
  void frequency(std::span<const double> I, std::span<double> out) const;

  // Unchecked Horner evaluation for inner loops that validated the domain already.
  double frequency_unchecked(double I) const noexcept;

 private:
  FrequencyModel() = default;
  void check_domain(double I) const;

  std::size_t dimension_ = 1;
  std::vector<double> h_coeffs_;
  std::vector<double> omega_coeffs_;
  std::vector<double> slope_coeffs_;
  HamiltonianFn custom_h_;
  FrequencyFn custom_omega_;
  ActionDomain domain_;
};

double frequency(const FrequencyModel& model, double I);

/// Complex-valued function on phase space with a sup-norm bound.
class Observable {
 public:
  using ScalarFn = std::function<std::complex<double>(double I, double theta)>;
  using VectorFn =
      std::function<std::complex<double>(std::span<const double>, std::span<const TorusAngle>)>;

  Observable(std::string name, ScalarFn fn, bool real_valued, std::optional<double> bound = {});
  Observable(std::string name, VectorFn fn, bool real_valued, double bound);

  /// sqrt(2I) e^{-i theta} = q + i p; bound sqrt(2 I_max).
  static Observable sqrt2I_exp(double I_max);
  /// I cos(theta); bound I_max.
  static Observable action_cos(double I_max);
  /// I e^{-i theta}; the analytic companion of action_cos (its real part).
  static Observable action_exp(double I_max);
  /// Looks up a named built-in ("sqrt2I_exp", "I_cos", "I_exp").
  static Observable builtin(std::string_view name, double I_max);

  const std::string& name() const noexcept { return name_; }
  bool real_valued() const noexcept { return real_valued_; }
  bool has_scalar_form() const noexcept { return static_cast<bool>(scalar_); }

  /// Throws UsageError when no bound was supplied or estimated.
  double bound() const;
  bool has_bound() const noexcept { return bound_.has_value(); }
  bool bound_estimated() const noexcept { return bound_estimated_; }

  /// Copy whose bound is the max of |G| on a 256 x 256 grid of
  /// [I_lo, I_hi] x [0, 2pi), inflated by 5%, and flagged as estimated.
  Observable with_estimated_bound(double I_lo, double I_hi) const;

  std::complex<double> operator()(double I, double theta) const { return scalar_(I, theta); }
  std::complex<double> operator()(const ActionAngleState& s) const;

 private:
  std::string name_;
  ScalarFn scalar_;
  VectorFn vector_;
  bool real_valued_ = false;
  std::optional<double> bound_;
  bool bound_estimated_ = false;
};

struct ResonantPoint {
  double action;
  int k;
  std::int64_t m;
  double margin;
};

struct NonresonanceReport {
  int k_max = 0;
  double tolerance = 0.0;
  std::vector<double> grid;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_action = 0.0;
  int worst_k = 0;
  std::vector<ResonantPoint> resonant_points;

  bool nonresonant() const noexcept { return resonant_points.empty(); }
};

/// Distance of k*omega(I) to 2piZ over the grid and 0 < |k| <= k_max; points
/// with distance <= tol are reported as resonances (I, k, m).
NonresonanceReport check_nonresonance(const FrequencyModel& model, std::span<const double> grid,
                                      int k_max, double tol);

struct CanonicalPoint {
  double q = 0.0;
  double p = 0.0;
};

/// q + i p = sqrt(2I) e^{-i theta}.
ActionAngleState canonical_to_action_angle(double q, double p);
PhasePoint canonical_to_phase_point(double q, double p);
CanonicalPoint action_angle_to_canonical(const ActionAngleState& s);
CanonicalPoint action_angle_to_canonical(double I, double theta);

/// (1/2pi) * integral of G(I, .) over the circle by the periodic trapezoid rule.
std::complex<double> theta_average(const Observable& G, double I, int quadrature_points);

}  // namespace twist
