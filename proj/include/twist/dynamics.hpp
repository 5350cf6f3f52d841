#pragma once

// Iteration maps (I, theta) -> (I, theta + j omega(I) + c X_j) and the
// perturbation processes X_j that drive the stochastic versions.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "twist/phase_core.hpp"
#include "twist/random.hpp"

namespace twist {

struct NoPerturbation {};

/// X_j = B_j, standard Brownian motion sampled at integer times.
struct BrownianNoise {};

/// X_j = sum of j i.i.d. increments; char_fn(t) = E exp(i t xi).
struct IidNoise {
  std::function<double(Stream&)> sampler;
  std::function<std::complex<double>(double)> char_fn;  // may be empty
  std::string name = "iid";

  /// Increments uniform on [-half_width, half_width].
  static IidNoise uniform(double half_width);
};

/// Angle increments follow a Gaussian AR(1) process
///   xi_j = r xi_{j-1} + innovation_scale * eta_j,  X_j = xi_1 + ... + xi_j,
/// with xi_0 drawn from the stationary law (or xi_0 = 0).
struct Ar1Noise {
  double r = 0.5;
  double innovation_scale = 1.0;
  bool stationary_start = true;

  double stationary_variance() const noexcept;
};

/// Deterministic X_j = -j omega(I_ref) / c, which cancels the rotation of
/// every mode on the fiber I = I_ref: e^{i j k omega(I_ref)} E e^{i c k X_j} = 1.
struct ResonantNoise {
  int k = 1;
  double reference_I = 0.5;
  double omega_ref = 0.0;
};

/// User-supplied increments. `path(N, stream)` returns xi_1..xi_N; the
/// optional closed form gives a_j^{(k)} for intensity c.
struct CustomNoise {
  std::function<std::vector<double>(std::size_t, Stream&)> path;
  std::function<std::complex<double>(double c, int k, std::int64_t j)> characteristic;
  std::string name = "custom";
};

using NoiseKind =
    std::variant<NoPerturbation, BrownianNoise, IidNoise, Ar1Noise, ResonantNoise, CustomNoise>;

/// A noise family together with its intensity c.
class PerturbationModel {
 public:
  static PerturbationModel none();
  static PerturbationModel brownian(double c);
  static PerturbationModel iid(IidNoise noise, double c);
  static PerturbationModel ar1(double r, double innovation_scale, double c,
                               bool stationary_start = true);
  static PerturbationModel resonant(const FrequencyModel& model, int k, double reference_I,
                                    double c);
  static PerturbationModel custom(CustomNoise noise, double c);

  const NoiseKind& kind() const noexcept { return kind_; }
  double intensity() const noexcept { return c_; }
  bool is_none() const noexcept { return std::holds_alternative<NoPerturbation>(kind_); }
  std::string name() const;

  /// Same process with a different intensity (the resonant path is rebuilt so
  /// that it keeps cancelling the rotation).
  PerturbationModel with_intensity(double c) const;

 private:
  PerturbationModel(NoiseKind kind, double c) : kind_(std::move(kind)), c_(c) {}
  NoiseKind kind_;
  double c_ = 0.0;
};

/// increments[0] = cumulative[0] = 0; entries 1..N hold xi_j and X_j.
struct NoisePath {
  std::vector<double> increments;
  std::vector<double> cumulative;

  std::size_t steps() const noexcept { return cumulative.empty() ? 0 : cumulative.size() - 1; }
};

NoisePath sample_noise_path(const PerturbationModel& model, std::int64_t N, Stream& stream);

/// X at the given nondecreasing times. Brownian motion is sampled through its
/// independent increments without building the full path; other processes
/// fall back to a full path up to the last time.
std::vector<double> sample_noise_at(const PerturbationModel& model,
                                    std::span<const std::int64_t> times, Stream& stream);

ActionAngleState iterate_deterministic(const ActionAngleState& s0, const FrequencyModel& model,
                                       std::int64_t j);
ActionAngleState iterate_stochastic(const ActionAngleState& s0, const FrequencyModel& model,
                                    const NoisePath& noise, double c, std::int64_t j);

/// theta0 + j*omega + offset on [0, 2pi), with j*omega reduced exactly.
double advance_angle(double theta0, double omega, std::int64_t j, double offset = 0.0);

struct CharacteristicOptions {
  bool allow_monte_carlo = true;
  std::size_t paths = 10000;
  std::uint64_t seed = 0x5eed;
  unsigned threads = 1;
};

struct CharacteristicValue {
  std::complex<double> value;
  double standard_error = 0.0;  // 0 for closed forms
  bool exact = true;
};

/// a_j^{(k)} = E exp(i c k X_j).
CharacteristicValue characteristic_sequence(const PerturbationModel& model, double c, int k,
                                            std::int64_t j, const CharacteristicOptions& opts = {});
CharacteristicValue characteristic_sequence(const PerturbationModel& model, int k, std::int64_t j,
                                            const CharacteristicOptions& opts = {});

/// a_0..a_N for one k using the model's own intensity. Closed forms only;
/// throws UnsupportedError otherwise.
std::vector<std::complex<double>> characteristic_series(const PerturbationModel& model, int k,
                                                        std::int64_t N);

bool has_closed_form(const PerturbationModel& model);

/// True when E exp(i(sum of t_j X_j)) factorizes over increments, which is
/// what the modal covariance formula needs.
bool has_independent_increments(const PerturbationModel& model);

/// Characteristic function of one increment, E exp(i t xi), for
/// independent-increment models.
std::complex<double> increment_characteristic(const PerturbationModel& model, double t);

/// |a_j^{(k)}| <= C * ratio^j for every j >= 1, when such a bound is known.
struct GeometricBound {
  double C;
  double ratio;
};
std::optional<GeometricBound> geometric_bound(const PerturbationModel& model, int k);

/// Variance of X_j for the AR(1) model (closed form recursion), j = 0..N.
std::vector<double> ar1_cumulative_variance(const Ar1Noise& noise, std::int64_t N);

}  // namespace twist
