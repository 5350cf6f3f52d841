#include "twist/dynamics.hpp"

#include <algorithm>
#include <array>
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

void require_intensity(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw UsageError("noise intensity c must be > 0");
}

std::complex<double> unit_phasor(double phase) { return {std::cos(phase), std::sin(phase)}; }

}  // namespace

IidNoise IidNoise::uniform(double half_width) {
  if (!(half_width > 0.0)) throw UsageError("uniform increments need half_width > 0");
  IidNoise n;
  n.name = "uniform";
  n.sampler = [half_width](Stream& s) { return half_width * (2.0 * s.uniform() - 1.0); };
  n.char_fn = [half_width](double t) -> std::complex<double> {
    const double x = half_width * t;
    return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  };
  return n;
}

double Ar1Noise::stationary_variance() const noexcept {
  return innovation_scale * innovation_scale / (1.0 - r * r);
}

PerturbationModel PerturbationModel::none() { return {NoPerturbation{}, 0.0}; }

PerturbationModel PerturbationModel::brownian(double c) {
  require_intensity(c);
  return {BrownianNoise{}, c};
}

PerturbationModel PerturbationModel::iid(IidNoise noise, double c) {
  require_intensity(c);
  if (!noise.sampler) throw UsageError("i.i.d. noise needs a sampler");
  return {std::move(noise), c};
}

PerturbationModel PerturbationModel::ar1(double r, double innovation_scale, double c,
                                         bool stationary_start) {
  require_intensity(c);
  if (!(r > 0.0 && r < 1.0)) throw UsageError("AR(1) coefficient r must lie in (0, 1)");
  if (!(innovation_scale >= 0.0)) throw UsageError("AR(1) innovation scale must be >= 0");
  return {Ar1Noise{r, innovation_scale, stationary_start}, c};
}

PerturbationModel PerturbationModel::resonant(const FrequencyModel& model, int k,
                                              double reference_I, double c) {
  require_intensity(c);
  if (k == 0) throw UsageError("resonant counterexample needs k != 0");
  return {ResonantNoise{k, reference_I, model.frequency(reference_I)}, c};
}

PerturbationModel PerturbationModel::custom(CustomNoise noise, double c) {
  require_intensity(c);
  if (!noise.path) throw UsageError("custom noise needs a path sampler");
  return {std::move(noise), c};
}

PerturbationModel PerturbationModel::with_intensity(double c) const {
  if (is_none()) return *this;
  require_intensity(c);
  return {kind_, c};
}

std::string PerturbationModel::name() const {
  return std::visit(overloaded{[](const NoPerturbation&) { return std::string("none"); },
                               [](const BrownianNoise&) { return std::string("brownian"); },
                               [](const IidNoise& n) { return n.name; },
                               [](const Ar1Noise&) { return std::string("ar1"); },
                               [](const ResonantNoise&) { return std::string("resonant"); },
                               [](const CustomNoise& n) { return n.name; }},
                    kind_);
}

NoisePath sample_noise_path(const PerturbationModel& model, std::int64_t N, Stream& stream) {
  if (N < 1) throw UsageError("sample_noise_path: N must be >= 1");
  NoisePath path;
  path.increments.assign(static_cast<std::size_t>(N) + 1, 0.0);
  auto& xi = path.increments;
  const double c = model.intensity();
  std::visit(overloaded{
                 [](const NoPerturbation&) {},
                 [&](const BrownianNoise&) {
                   for (std::int64_t j = 1; j <= N; ++j) xi[j] = stream.normal();
                 },
                 [&](const IidNoise& n) {
                   for (std::int64_t j = 1; j <= N; ++j) xi[j] = n.sampler(stream);
                 },
                 [&](const Ar1Noise& n) {
                   double state =
                       n.stationary_start ? std::sqrt(n.stationary_variance()) * stream.normal() : 0.0;
                   for (std::int64_t j = 1; j <= N; ++j) {
                     state = n.r * state + n.innovation_scale * stream.normal();
                     xi[j] = state;
                   }
                 },
                 [&](const ResonantNoise& n) {
                   for (std::int64_t j = 1; j <= N; ++j) xi[j] = -n.omega_ref / c;
                 },
                 [&](const CustomNoise& n) {
                   const auto v = n.path(static_cast<std::size_t>(N), stream);
                   if (v.size() != static_cast<std::size_t>(N)) {
                     throw UsageError("custom noise returned a path of the wrong length");
                   }
                   std::copy(v.begin(), v.end(), xi.begin() + 1);
                 }},
             model.kind());

  path.cumulative.assign(xi.size(), 0.0);
  if (const auto* res = std::get_if<ResonantNoise>(&model.kind())) {
    // Closed form avoids accumulating rounding in the cancellation.
    for (std::int64_t j = 1; j <= N; ++j) path.cumulative[j] = -static_cast<double>(j) * res->omega_ref / c;
  } else {
    for (std::size_t j = 1; j < xi.size(); ++j) path.cumulative[j] = path.cumulative[j - 1] + xi[j];
  }
  return path;
}

std::vector<double> sample_noise_at(const PerturbationModel& model,
                                    std::span<const std::int64_t> times, Stream& stream) {
  std::vector<double> out(times.size(), 0.0);
  if (times.empty()) return out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0 || (i > 0 && times[i] < times[i - 1])) {
      throw UsageError("sample_noise_at: times must be nondecreasing and >= 0");
    }
  }
  if (model.is_none()) return out;
  if (std::holds_alternative<BrownianNoise>(model.kind())) {
    double level = 0.0;
    std::int64_t last = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const std::int64_t dt = times[i] - last;
      if (dt > 0) level += std::sqrt(static_cast<double>(dt)) * stream.normal();
      last = times[i];
      out[i] = level;
    }
    return out;
  }
  if (const auto* res = std::get_if<ResonantNoise>(&model.kind())) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      out[i] = -static_cast<double>(times[i]) * res->omega_ref / model.intensity();
    }
    return out;
  }
  const std::int64_t last = times.back();
  if (last == 0) return out;
  const NoisePath path = sample_noise_path(model, last, stream);
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = path.cumulative[times[i]];
  return out;
}

double advance_angle(double theta0, double omega, std::int64_t j, double offset) {
  return TorusAngle(theta0 + reduced_phase(static_cast<double>(j), omega) + offset).value();
}

ActionAngleState iterate_deterministic(const ActionAngleState& s0, const FrequencyModel& model,
                                       std::int64_t j) {
  if (j < 0) throw UsageError("iterate_deterministic: j must be >= 0");
  if (j == 0) return s0;
  const auto I = s0.action();
  std::vector<double> omega(I.size());
  model.frequency(I, omega);
  std::vector<TorusAngle> angle;
  angle.reserve(I.size());
  for (std::size_t i = 0; i < I.size(); ++i) {
    angle.emplace_back(advance_angle(s0.angle()[i].value(), omega[i], j));
  }
  return ActionAngleState(std::vector<double>(I.begin(), I.end()), std::move(angle));
}

ActionAngleState iterate_stochastic(const ActionAngleState& s0, const FrequencyModel& model,
                                    const NoisePath& noise, double c, std::int64_t j) {
  if (j < 0) throw UsageError("iterate_stochastic: j must be >= 0");
  if (static_cast<std::size_t>(j) > noise.steps()) {
    throw UsageError("iterate_stochastic: j exceeds the noise path length");
  }
  if (s0.dimension() != 1) throw UsageError("stochastic maps are implemented for n = 1 only");
  if (j == 0) return s0;
  const double w = model.frequency(s0.I());
  return ActionAngleState(s0.I(), advance_angle(s0.theta(), w, j, c * noise.cumulative[j]));
}

bool has_closed_form(const PerturbationModel& model) {
  return std::visit(overloaded{[](const IidNoise& n) { return static_cast<bool>(n.char_fn); },
                               [](const CustomNoise& n) { return static_cast<bool>(n.characteristic); },
                               [](const auto&) { return true; }},
                    model.kind());
}

bool has_independent_increments(const PerturbationModel& model) {
  return std::visit(overloaded{[](const NoPerturbation&) { return true; },
                               [](const BrownianNoise&) { return true; },
                               [](const IidNoise& n) { return static_cast<bool>(n.char_fn); },
                               [](const auto&) { return false; }},
                    model.kind());
}

std::complex<double> increment_characteristic(const PerturbationModel& model, double t) {
  return std::visit(
      overloaded{[](const NoPerturbation&) -> std::complex<double> { return 1.0; },
                 [t](const BrownianNoise&) -> std::complex<double> { return std::exp(-0.5 * t * t); },
                 [t](const IidNoise& n) -> std::complex<double> {
                   if (!n.char_fn) throw UnsupportedError("i.i.d. noise has no characteristic function");
                   return n.char_fn(t);
                 },
                 [](const auto&) -> std::complex<double> {
                   throw UnsupportedError("noise increments are not independent");
                 }},
      model.kind());
}

std::vector<double> ar1_cumulative_variance(const Ar1Noise& n, std::int64_t N) {
  std::vector<double> var(static_cast<std::size_t>(std::max<std::int64_t>(N, 0)) + 1, 0.0);
  const double s2 = n.innovation_scale * n.innovation_scale;
  double v = n.stationary_start ? n.stationary_variance() : 0.0;  // Var xi_{j-1}
  double cross = 0.0;                                           // Cov(X_{j-1}, xi_j)
  for (std::int64_t j = 1; j <= N; ++j) {
    const double vj = n.r * n.r * v + s2;  // Var xi_j
    if (j > 1) cross = n.r * (cross + v);
    var[j] = var[j - 1] + vj + 2.0 * cross;
    v = vj;
  }
  return var;
}

namespace {

std::complex<double> closed_form(const PerturbationModel& model, double c, int k, std::int64_t j) {
  if (k == 0 || j == 0) return 1.0;
  const double t = c * k;
  const double jd = static_cast<double>(j);
  return std::visit(
      overloaded{
          [](const NoPerturbation&) -> std::complex<double> { return 1.0; },
          [&](const BrownianNoise&) -> std::complex<double> { return std::exp(-0.5 * t * t * jd); },
          [&](const IidNoise& n) -> std::complex<double> { return std::pow(n.char_fn(t), jd); },
          [&](const Ar1Noise& n) -> std::complex<double> {
            return std::exp(-0.5 * t * t * ar1_cumulative_variance(n, j)[j]);
          },
          [&](const ResonantNoise& n) -> std::complex<double> {
            // c k X_j = -j k omega_ref (c / c_model).
            const double scale = c / model.intensity();
            return unit_phasor(-reduced_phase(jd, k * n.omega_ref * scale));
          },
          [&](const CustomNoise& n) -> std::complex<double> { return n.characteristic(c, k, j); }},
      model.kind());
}

}  // namespace

CharacteristicValue characteristic_sequence(const PerturbationModel& model, double c, int k,
                                            std::int64_t j, const CharacteristicOptions& opts) {
  if (j < 0) throw UsageError("characteristic_sequence: j must be >= 0");
  if (model.is_none() || k == 0 || j == 0) return {1.0, 0.0, true};
  if (has_closed_form(model)) return {closed_form(model, c, k, j), 0.0, true};
  if (!opts.allow_monte_carlo) {
    throw UnsupportedError("no closed-form characteristic sequence for '" + model.name() +
                           "' and Monte Carlo is disabled");
  }
  if (opts.paths < 2) throw UsageError("characteristic_sequence: need at least 2 paths");

  const SeedPlan plan{opts.seed};
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = block_count(opts.paths, kBlock);
  std::vector<std::array<double, 4>> partial(blocks, {0.0, 0.0, 0.0, 0.0});
  parallel_for_blocks(opts.paths, kBlock, opts.threads,
                      [&](std::size_t begin, std::size_t end, std::size_t b) {
                        auto& acc = partial[b];
                        for (std::size_t i = begin; i < end; ++i) {
                          Stream s = plan.stream(i, kLaneNoise);
                          const NoisePath p = sample_noise_path(model, j, s);
                          const double phase = c * k * p.cumulative[j];
                          const double re = std::cos(phase), im = std::sin(phase);
                          acc[0] += re;
                          acc[1] += im;
                          acc[2] += re * re;
                          acc[3] += im * im;
                        }
                      });
  std::array<double, 4> tot{0.0, 0.0, 0.0, 0.0};
  for (const auto& a : partial) {
    for (int q = 0; q < 4; ++q) tot[q] += a[q];
  }
  const double P = static_cast<double>(opts.paths);
  const std::complex<double> mean(tot[0] / P, tot[1] / P);
  const double var = (tot[2] + tot[3]) / P - std::norm(mean);
  return {mean, std::sqrt(std::max(var, 0.0) * P / (P - 1.0) / P), false};
}

CharacteristicValue characteristic_sequence(const PerturbationModel& model, int k, std::int64_t j,
                                            const CharacteristicOptions& opts) {
  return characteristic_sequence(model, model.intensity(), k, j, opts);
}

std::vector<std::complex<double>> characteristic_series(const PerturbationModel& model, int k,
                                                        std::int64_t N) {
  if (N < 0) throw UsageError("characteristic_series: N must be >= 0");
  if (!has_closed_form(model)) {
    throw UnsupportedError("no closed-form characteristic sequence for '" + model.name() + "'");
  }
  std::vector<std::complex<double>> a(static_cast<std::size_t>(N) + 1, 1.0);
  if (model.is_none() || k == 0) return a;
  const double t = model.intensity() * k;
  if (const auto* n = std::get_if<Ar1Noise>(&model.kind())) {
    const auto var = ar1_cumulative_variance(*n, N);
    for (std::int64_t j = 1; j <= N; ++j) a[j] = std::exp(-0.5 * t * t * var[j]);
    return a;
  }
  for (std::int64_t j = 1; j <= N; ++j) a[j] = closed_form(model, model.intensity(), k, j);
  return a;
}

std::optional<GeometricBound> geometric_bound(const PerturbationModel& model, int k) {
  if (k == 0) return std::nullopt;
  const double t = model.intensity() * k;
  return std::visit(
      overloaded{
          [&](const BrownianNoise&) -> std::optional<GeometricBound> {
            return GeometricBound{1.0, std::exp(-0.5 * t * t)};
          },
          [&](const IidNoise& n) -> std::optional<GeometricBound> {
            if (!n.char_fn) return std::nullopt;
            return GeometricBound{1.0, std::abs(n.char_fn(t))};
          },
          [&](const Ar1Noise& n) -> std::optional<GeometricBound> {
            // Var X_j >= v j (1+r)/(1-r) - 2 v r/(1-r)^2 for the stationary
            // start; a zero start removes at most v r^2/(1-r)^2 more.
            const double v = n.stationary_variance();
            const double d = (1.0 - n.r) * (1.0 - n.r);
            double deficit = 2.0 * v * n.r / d;
            if (!n.stationary_start) deficit += v * n.r * n.r / d;
            return GeometricBound{std::exp(0.5 * t * t * deficit),
                                  std::exp(-0.5 * t * t * v * (1.0 + n.r) / (1.0 - n.r))};
          },
          [](const auto&) -> std::optional<GeometricBound> { return std::nullopt; }},
      model.kind());
}

}  // namespace twist
