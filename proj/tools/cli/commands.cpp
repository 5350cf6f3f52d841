#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "output.hpp"
#include "twist/errors.hpp"
#include "twist/stats.hpp"

namespace twist::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Context {
  fs::path out;
  RunStamp stamp;
  unsigned threads = 1;
  std::ostream& log;
};

struct Setup {
  FrequencyModel model;
  InitialDensity rho;
  Observable G;
  PerturbationModel noise;
};

Setup make_setup(const ExperimentConfig& cfg) {
  FrequencyModel model = make_model(cfg);
  InitialDensity rho = make_density(cfg);
  Observable G = make_observable(cfg);
  PerturbationModel noise = make_noise(cfg, model);
  return {std::move(model), std::move(rho), std::move(G), std::move(noise)};
}

double gaussian_q0(const ExperimentConfig& cfg) {
  return cfg.density.kind == "gaussian" ? cfg.density.q0 : 0.0;
}

json complex_json(std::complex<double> z) { return {{"re", json_number(z.real())}, {"im", json_number(z.imag())}}; }

std::vector<std::int64_t> ladder_with(const std::vector<std::int64_t>& ladder, std::int64_t N) {
  std::vector<std::int64_t> out;
  for (auto n : ladder) {
    if (n >= 1 && n <= N) out.push_back(n);
  }
  out.push_back(N);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// |f(N)| on a log-spaced subset of [lo, hi], for power-law fits.
void log_spaced(std::int64_t lo, std::int64_t hi, int per_decade, std::vector<std::int64_t>& out) {
  if (lo < 1 || hi < lo) return;
  const double a = std::log10(static_cast<double>(lo)), b = std::log10(static_cast<double>(hi));
  const int count = std::max(2, static_cast<int>(std::ceil((b - a) * per_decade)) + 1);
  for (int i = 0; i < count; ++i) {
    const auto n = static_cast<std::int64_t>(std::llround(std::pow(10.0, a + (b - a) * i / (count - 1))));
    if (out.empty() || out.back() != n) out.push_back(n);
  }
}

json fit_json(std::span<const double> x, std::span<const double> y, DecayModel model) {
  try {
    const DecayFit f = fit_decay(x, y, model);
    return {{"rate", json_number(f.rate)},
            {"prefactor", json_number(f.prefactor)},
            {"r_squared", json_number(f.r_squared)},
            {"points", f.used},
            {"dropped", f.dropped}};
  } catch (const UsageError& e) {
    return {{"error", e.what()}};
  }
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const ExperimentConfig& cfg, const Context& ctx) {
  const Setup s = make_setup(cfg);
  const SeedPlan plan{cfg.seed};
  const auto& js = cfg.sampling.j_snapshots;
  const std::size_t M = cfg.sampling.M;

  const auto snaps = ensemble_snapshots(s.rho, s.model, s.noise, M, js, plan, ctx.threads);
  for (std::size_t t = 0; t < js.size(); ++t) {
    CsvWriter csv(ctx.out / fmt::format("phase_t{}.csv", js[t]), ctx.stamp, {"q", "p", "I", "theta"});
    for (const auto& p : snaps[t]) {
      const auto qp = action_angle_to_canonical(p.action, p.angle);
      csv.row(qp.q, qp.p, p.action, p.angle);
    }
    csv.close();
  }

  const EnsembleReport rep = mc_ensemble_series(s.G, s.rho, s.model, s.noise, M, js, plan, ctx.threads);
  const double q0 = gaussian_q0(cfg);
  std::vector<double> centroid(rep.mean.size(), std::nan(""));
  if (q0 != 0.0) centroid = centroid_norm(rep, q0);
  CsvWriter means(ctx.out / "ensemble_means.csv", ctx.stamp,
                  {"j", "re_mean", "im_mean", "stderr_re", "stderr_im", "centroid_norm"});
  json rows = json::array();
  for (std::size_t i = 0; i < rep.mean.size(); ++i) {
    means.row(rep.j_values[i], rep.mean[i].real(), rep.mean[i].imag(), rep.stderr_re[i],
              rep.stderr_im[i], centroid[i]);
    rows.push_back({{"j", rep.j_values[i]},
                    {"mean", complex_json(rep.mean[i])},
                    {"centroid_norm", json_number(centroid[i])}});
  }
  means.close();

  // Energy of the initial cloud (same draws as every snapshot).
  const auto initial = sample_initial_points(s.rho, M, plan, ctx.threads);
  std::vector<double> energy;
  energy.reserve(M);
  for (const auto& p : initial) energy.push_back(s.model.hamiltonian(p.action));
  std::vector<double> sorted = energy;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    return sorted[static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)))];
  };
  const SampleMoments em = sample_moments(energy);
  constexpr double kLevel = 0.181;
  const double centre_I = cfg.density.kind == "gaussian"
                              ? 0.5 * (cfg.density.q0 * cfg.density.q0 + cfg.density.p0 * cfg.density.p0)
                              : 0.5 * (cfg.density.a + cfg.density.b);
  json summary = {{"command", "simulate"},
                  {"M", M},
                  {"noise", s.noise.name()},
                  {"observable", s.G.name()},
                  {"means", rows},
                  {"energy",
                   {{"mean", em.mean},
                    {"sd", std::sqrt(em.variance)},
                    {"min", sorted.front()},
                    {"max", sorted.back()},
                    {"q01", quantile(0.01)},
                    {"q99", quantile(0.99)},
                    {"H_at_cloud_centre", s.model.hamiltonian(centre_I)},
                    {"level_set", kLevel},
                    {"level_set_within_spread", kLevel >= quantile(0.01) && kLevel <= quantile(0.99)}}}};
  write_json(ctx.out / "summary.json", ctx.stamp, summary);
  fmt::print(ctx.log, "simulate: {} points, {} snapshots, energy mean {:.6f}\n", M, js.size(), em.mean);
  return kExitOk;
}

// ------------------------------------------------------------------ oracle

int cmd_oracle(const ExperimentConfig& cfg, const Context& ctx) {
  const Setup s = make_setup(cfg);
  const std::int64_t N = cfg.oracle.N;
  const SpectralTable table =
      build_spectral_table(s.G, s.rho, s.model, make_spectral_options(cfg, N, ctx.threads));
  const OracleSeries series = oracle_series(table, N, s.noise);
  const auto lim = limit_value(table);

  CsvWriter means(ctx.out / "oracle_means.csv", ctx.stamp, {"j", "re", "im"});
  for (std::int64_t j = 0; j <= N; ++j) means.row(j, series.values[j].real(), series.values[j].imag());
  means.close();

  const auto running = cesaro_running(series.values);
  CsvWriter ces(ctx.out / "oracle_cesaro.csv", ctx.stamp, {"N", "re", "im", "abs"});
  for (std::int64_t n = 1; n <= N; ++n) ces.row(n, running[n].real(), running[n].imag(), std::abs(running[n]));
  ces.close();

  std::vector<double> absval(N + 1);
  for (std::int64_t j = 0; j <= N; ++j) absval[j] = std::abs(series.values[j]);
  const auto envelope = rolling_max_envelope(absval, cfg.envelope_window);
  const double q0 = gaussian_q0(cfg);
  CsvWriter env(ctx.out / "oracle_envelope.csv", ctx.stamp, {"j", "abs_mean", "centroid_norm", "envelope"});
  for (std::int64_t j = 0; j <= N; ++j) {
    env.row(j, absval[j], q0 != 0.0 ? absval[j] / std::abs(q0) : std::nan(""), envelope[j]);
  }
  env.close();

  // Cesaro rate: |V_N - limit| on a log grid over [100, N].
  std::vector<std::int64_t> grid;
  log_spaced(std::min<std::int64_t>(100, N), N, 10, grid);
  std::vector<double> gx, gy;
  for (auto n : grid) {
    gx.push_back(static_cast<double>(n));
    gy.push_back(std::abs(running[n] - lim));
  }
  // Raw decay of |<G>_j - limit| and the modewise damping of the slowest mode.
  std::vector<double> dx, dy;
  for (std::int64_t j = 1; j <= N; ++j) {
    const double v = std::abs(series.values[j] - lim);
    if (v > 1e-13) {
      dx.push_back(static_cast<double>(j));
      dy.push_back(v);
    }
  }
  json damping = nullptr;
  int slow_mode = 0;
  for (int k : table.active_modes()) {
    if (k != 0 && (slow_mode == 0 || std::abs(k) < std::abs(slow_mode))) slow_mode = k;
  }
  if (!s.noise.is_none() && slow_mode != 0) {
    const auto a = characteristic_series(s.noise, slow_mode, N);
    std::vector<double> ax, ay;
    for (std::int64_t j = 1; j <= N; ++j) {
      ax.push_back(static_cast<double>(j));
      ay.push_back(std::abs(a[j]));
    }
    damping = fit_json(ax, ay, DecayModel::exponential);
    damping["mode"] = slow_mode;
  }
  // |<G>_j| relative to the unperturbed series: the noise-induced damping profile.
  json ratio_fit = nullptr;
  if (!s.noise.is_none()) {
    const OracleSeries det = oracle_series(table, N, PerturbationModel::none());
    std::vector<double> rx, ry;
    for (std::int64_t j = 1; j <= N; ++j) {
      const double d = std::abs(det.values[j] - lim);
      if (d > 1e-10) {
        rx.push_back(static_cast<double>(j));
        ry.push_back(std::abs(series.values[j] - lim) / d);
      }
    }
    ratio_fit = fit_json(rx, ry, DecayModel::exponential);
  }

  const bool fatal = table.tail_estimate() > 1e-2 * table.head_magnitude();
  json summary = {{"command", "oracle"},
                  {"N", N},
                  {"noise", s.noise.name()},
                  {"observable", s.G.name()},
                  {"limit_value", complex_json(lim)},
                  {"nodes", table.size()},
                  {"active_modes", table.active_modes()},
                  {"truncation",
                   {{"tail_estimate", table.tail_estimate()},
                    {"head_magnitude", table.head_magnitude()},
                    {"warning", table.truncation_warning()},
                    {"fatal", fatal}}},
                  {"resolved", series.resolved},
                  {"max_resolved_j", table.max_resolved_j()},
                  {"cesaro_power_law", fit_json(gx, gy, DecayModel::power_law)},
                  {"mean_exponential_fit", fit_json(dx, dy, DecayModel::exponential)},
                  {"mode_damping_fit", damping},
                  {"damping_ratio_fit", ratio_fit},
                  {"V_N_final", complex_json(running[N])}};
  write_json(ctx.out / "oracle_summary.json", ctx.stamp, summary);
  fmt::print(ctx.log, "oracle: limit {:.6g}{:+.6g}i, |V_N| {:.6g}, tail {:.3g}\n", lim.real(),
             lim.imag(), std::abs(running[N]), table.tail_estimate());
  if (table.truncation_warning()) fmt::print(ctx.log, "oracle: warning: Fourier tail is not negligible\n");
  return fatal ? kExitGate : kExitOk;
}

// ----------------------------------------------------------------- compare

int cmd_compare(const ExperimentConfig& cfg, const Context& ctx) {
  const Setup s = make_setup(cfg);
  if (!has_closed_form(s.noise)) {
    throw UnsupportedError("no oracle for noise '" + s.noise.name() +
                           "'; only the Monte Carlo path (simulate) is available");
  }
  PerturbationModel oracle_noise = s.noise;
  if (cfg.compare.oracle_c_override) oracle_noise = s.noise.with_intensity(*cfg.compare.oracle_c_override);
  const auto& js = cfg.sampling.j_snapshots;
  const std::int64_t jmax = *std::max_element(js.begin(), js.end());
  const SpectralTable table =
      build_spectral_table(s.G, s.rho, s.model, make_spectral_options(cfg, std::max<std::int64_t>(jmax, 1), ctx.threads));
  const EnsembleReport mc =
      mc_ensemble_series(s.G, s.rho, s.model, s.noise, cfg.sampling.M, js, SeedPlan{cfg.seed}, ctx.threads);

  auto zscore = [](double diff, double se) {
    if (se > 0.0) return diff / se;
    return std::abs(diff) <= 1e-12 ? 0.0 : std::copysign(INFINITY, diff);
  };
  bool pass = true;
  double worst = 0.0;
  json rows = json::array();
  for (std::size_t i = 0; i < js.size(); ++i) {
    const auto o = oracle_mean(table, js[i], oracle_noise);
    const double zr = zscore(mc.mean[i].real() - o.real(), mc.stderr_re[i]);
    const double zi = zscore(mc.mean[i].imag() - o.imag(), mc.stderr_im[i]);
    const double z = std::max(std::abs(zr), std::abs(zi));
    worst = std::max(worst, z);
    pass = pass && z <= cfg.compare.z_threshold;
    rows.push_back({{"j", js[i]},
                    {"mc", complex_json(mc.mean[i])},
                    {"stderr", {{"re", mc.stderr_re[i]}, {"im", mc.stderr_im[i]}}},
                    {"oracle", complex_json(o)},
                    {"z", {{"re", json_number(zr)}, {"im", json_number(zi)}}}});
  }
  json report = {{"command", "compare"},
                 {"M", cfg.sampling.M},
                 {"noise", s.noise.name()},
                 {"oracle_intensity", oracle_noise.intensity()},
                 {"z_threshold", cfg.compare.z_threshold},
                 {"max_abs_z", json_number(worst)},
                 {"pass", pass},
                 {"rows", rows}};
  write_json(ctx.out / "compare_report.json", ctx.stamp, report);
  fmt::print(ctx.log, "compare: max |z| = {:.3f} -> {}\n", worst, pass ? "PASS" : "FAIL");
  return pass ? kExitOk : kExitGate;
}

// --------------------------------------------------------------------- clt

int cmd_clt(const ExperimentConfig& cfg, const Context& ctx) {
  const Setup s = make_setup(cfg);
  if (!s.G.real_valued()) {
    throw UsageError("clt needs a real observable (for example I_cos); '" + s.G.name() +
                     "' is complex-valued");
  }
  const std::size_t R = cfg.sampling.R;
  const std::int64_t N = cfg.sampling.N;
  if (R < 100) throw UsageError("clt needs R >= 100 replicas");
  if (N < 4) throw UsageError("clt needs N >= 4");
  const int H = cfg.sampling.H > 0 ? cfg.sampling.H : static_cast<int>(N / 4);
  const auto ladder = ladder_with(cfg.sampling.N_ladder, N);

  const SpectralTable table =
      build_spectral_table(s.G, s.rho, s.model, make_spectral_options(cfg, N, ctx.threads));
  const double center = limit_value(table).real();

  // N'^{-1/2} sum_{j<=N'} (E G_j - limit): the deterministic part of X_N'.
  std::map<std::int64_t, double> shift;
  const bool centering = cfg.clt.oracle_centering && has_closed_form(s.noise);
  if (centering) {
    const OracleSeries mu = oracle_series(table, N, s.noise);
    double acc = 0.0;
    std::size_t next = 0;
    for (std::int64_t j = 1; j <= N; ++j) {
      acc += mu.values[j].real() - center;
      if (next < ladder.size() && ladder[next] == j) {
        shift[j] = acc / std::sqrt(static_cast<double>(j));
        ++next;
      }
    }
  }

  const std::size_t path_R = std::min(R, std::max<std::size_t>(cfg.sampling.path_replicas, 100));
  const ReplicaSet set = simulate_replicas(s.G, s.rho, s.model, s.noise, N, R, SeedPlan{cfg.seed}, center,
                                           ladder, path_R, ctx.threads);
  const CovarianceReport cov = estimate_lag_covariances(set, N, std::min(H, static_cast<int>(N / 4)),
                                                        LagProduct::bilinear, 0.25, ctx.threads);

  json oracle_var = nullptr;
  if (has_independent_increments(s.noise)) {
    const auto lv = oracle_limiting_variance(table, s.noise);
    oracle_var = {{"sigma2", lv.sigma2},
                  {"sigma_star2", json_number(lv.sigma_star2)},
                  {"sigma_star2_infinite", std::isinf(lv.sigma_star2)},
                  {"between_fiber_variance", lv.between_fiber_variance}};
  }

  const double sigma_star2 = cov.sigma_star2;
  const auto final_samples = set.normalized_sums(N);
  const auto [mn, mx] = std::minmax_element(final_samples.begin(), final_samples.end());
  const bool degenerate = !(sigma_star2 > 1e-12) || (*mx - *mn) <= 1e-12;
  const double sigma = degenerate ? 0.0 : std::sqrt(sigma_star2);

  json per_N = json::array();
  bool monotone = true;
  double prev_ks = INFINITY;
  double final_ks = std::nan("");
  const double ks_noise = 1.36 / std::sqrt(static_cast<double>(R));
  for (auto n : ladder) {
    const auto x = set.normalized_sums(n);
    const double sh = centering ? shift[n] : 0.0;
    std::vector<double> xc(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xc[i] = x[i] - sh;
    CsvWriter csv(ctx.out / fmt::format("clt_samples_N{}.csv", n), ctx.stamp, {"replica", "x", "x_centered"});
    for (std::size_t i = 0; i < x.size(); ++i) csv.row(i, x[i], xc[i]);
    csv.close();

    const SampleMoments m = sample_moments(x);
    json entry = {{"N", n}, {"mean", m.mean}, {"variance", m.variance}, {"centering_shift", sh}};
    if (!degenerate) {
      const KsResult raw = ks_normality_test(x, sigma, cfg.clt.ks_threshold);
      const KsResult cen = ks_normality_test(xc, sigma, cfg.clt.ks_threshold);
      const double gate_ks = centering ? cen.statistic : raw.statistic;
      entry["ks_uncentered"] = raw.statistic;
      entry["ks_centered"] = cen.statistic;
      entry["ks_gate"] = gate_ks;
      if (gate_ks > prev_ks + ks_noise) monotone = false;
      prev_ks = gate_ks;
      if (n == N) final_ks = gate_ks;
    }
    per_N.push_back(entry);
  }

  json lags = json::array();
  for (int h = 0; h <= cov.H; ++h) {
    lags.push_back({{"h", h},
                    {"A_N", cov.A_N[h].real()},
                    {"A_N_stderr", cov.A_N_stderr[h]},
                    {"A_half", json_number(cov.A_half[h].real())},
                    {"converged", static_cast<bool>(cov.converged[h])}});
  }

  json report = {{"command", "clt"},
                 {"observable", s.G.name()},
                 {"noise", s.noise.name()},
                 {"R", R},
                 {"N", N},
                 {"path_replicas", set.path_replicas()},
                 {"center", center},
                 {"oracle_centering", centering},
                 {"standardization", "sigma_star"},
                 {"sigma2", cov.sigma2},
                 {"sigma_star2", sigma_star2},
                 {"remainder_bound", cov.remainder_valid ? json(cov.remainder_bound) : json(nullptr)},
                 {"lag_tail_rate", json_number(cov.tail_rate)},
                 {"oracle_limiting_variance", oracle_var},
                 {"lags", lags},
                 {"degenerate", degenerate},
                 {"ladder", per_N},
                 {"ks_threshold", cfg.clt.ks_threshold},
                 {"ks_non_increasing", monotone}};

  bool pass = true;
  if (degenerate) {
    report["ks_skipped"] = true;
    fmt::print(ctx.log, "clt: degenerate samples (sigma*^2 = {:.3g}); KS skipped\n", sigma_star2);
  } else {
    pass = final_ks <= cfg.clt.ks_threshold && monotone;
    report["ks_final"] = final_ks;

    const auto xc_final = [&] {
      auto x = set.normalized_sums(N);
      for (auto& v : x) v -= centering ? shift[N] : 0.0;
      return x;
    }();
    std::vector<double> z = xc_final;
    for (auto& v : z) v /= sigma;
    std::sort(z.begin(), z.end());
    json ecdf = json::array();
    for (int i = -16; i <= 16; ++i) {
      const double x = 0.25 * i;
      const auto cnt = std::upper_bound(z.begin(), z.end(), x) - z.begin();
      ecdf.push_back({{"x", x},
                      {"ecdf", static_cast<double>(cnt) / static_cast<double>(z.size())},
                      {"normal_cdf", 0.5 * std::erfc(-x / std::sqrt(2.0))}});
    }
    report["ecdf_grid"] = ecdf;

    std::vector<double> u_grid;
    for (double u : {0.5, 1.0, 2.0, 3.0}) u_grid.push_back(u / sigma);
    const auto logchar = empirical_log_characteristic(xc_final, u_grid);
    json lc = json::array();
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
      lc.push_back({{"u", u_grid[i]},
                    {"empirical_re", logchar[i].real()},
                    {"empirical_im", logchar[i].imag()},
                    {"gaussian", -0.5 * u_grid[i] * u_grid[i] * sigma_star2}});
    }
    report["log_characteristic"] = lc;
    report["third_moment_ratio"] = third_moment_ratio(xc_final);
  }

  const auto lind = lindeberg_diagnostic(set, N, cfg.clt.eps_grid, s.G.bound());
  json lj = json::array();
  bool lind_ok = true;
  for (const auto& p : lind) {
    lind_ok = lind_ok && p.within_bound;
    lj.push_back({{"eps", p.eps},
                  {"value", p.value},
                  {"stderr", p.standard_error},
                  {"bound", p.bound},
                  {"within_bound", p.within_bound}});
  }
  report["lindeberg"] = lj;
  report["lindeberg_within_bound"] = lind_ok;
  report["G_bound"] = s.G.bound();
  report["G_bound_estimated"] = s.G.bound_estimated();
  report["pass"] = pass;
  write_json(ctx.out / "clt_report.json", ctx.stamp, report);
  if (!degenerate) {
    fmt::print(ctx.log, "clt: sigma*^2 = {:.5g}, KS(N={}) = {:.4f} -> {}\n", sigma_star2, N, final_ks,
               pass ? "PASS" : "FAIL");
  }
  return pass ? kExitOk : kExitGate;
}

// -------------------------------------------------------------- covariance

int cmd_covariance(const ExperimentConfig& cfg, const Context& ctx) {
  const Setup s = make_setup(cfg);
  const std::size_t R = cfg.sampling.R;
  const std::int64_t N = cfg.sampling.N;
  if (R < 100) throw UsageError("covariance needs R >= 100 replicas");
  if (N < 4) throw UsageError("covariance needs N >= 4");
  const int H = cfg.sampling.H > 0 ? std::min<int>(cfg.sampling.H, static_cast<int>(N / 4))
                                   : static_cast<int>(N / 4);
  const bool herm = cfg.covariance.product == "hermitian";

  const SpectralTable table =
      build_spectral_table(s.G, s.rho, s.model, make_spectral_options(cfg, N + H, ctx.threads));
  const auto center = limit_value(table);
  const ReplicaSet set = simulate_replicas(s.G, s.rho, s.model, s.noise, N, R, SeedPlan{cfg.seed}, center,
                                           {}, R, ctx.threads);
  const CovarianceReport cov = estimate_lag_covariances(
      set, N, H, herm ? LagProduct::hermitian : LagProduct::bilinear, 0.25, ctx.threads);

  const bool have_oracle = has_independent_increments(s.noise);
  const auto conv = herm ? CovarianceConvention::hermitian : CovarianceConvention::bilinear;
  CsvWriter csv(ctx.out / "covariance.csv", ctx.stamp,
                {"h", "A_re", "A_im", "A_stderr", "A_half_re", "A_half_im", "A_half_stderr", "converged",
                 "oracle_re", "oracle_im", "z"});
  double worst_z = 0.0;
  std::vector<double> hx, hy;
  for (int h = 0; h <= H; ++h) {
    std::complex<double> o(std::nan(""), std::nan(""));
    double z = std::nan("");
    if (have_oracle) {
      o = oracle_lag_covariance_average(table, N, h, s.noise, conv);
      z = cov.A_N_stderr[h] > 0.0 ? std::abs(cov.A_N[h] - o) / cov.A_N_stderr[h] : 0.0;
      worst_z = std::max(worst_z, z);
    }
    if (h >= 1) {
      hx.push_back(h);
      hy.push_back(std::abs(cov.A_N[h]));
    }
    csv.row(h, cov.A_N[h].real(), cov.A_N[h].imag(), cov.A_N_stderr[h], cov.A_half[h].real(),
            cov.A_half[h].imag(), cov.A_half_stderr[h], cov.converged[h] ? 1 : 0, o.real(), o.imag(), z);
  }
  csv.close();

  const std::size_t fit_len = std::min<std::size_t>(hx.size(), 20);
  json report = {{"command", "covariance"},
                 {"R", R},
                 {"N", N},
                 {"H", H},
                 {"product", cfg.covariance.product},
                 {"noise", s.noise.name()},
                 {"sigma2", cov.sigma2},
                 {"sigma_star2", cov.sigma_star2},
                 {"remainder_bound", cov.remainder_valid ? json(cov.remainder_bound) : json(nullptr)},
                 {"all_converged", cov.all_converged()},
                 {"envelope_fit_h1_20",
                  fit_json(std::span<const double>(hx).first(fit_len),
                           std::span<const double>(hy).first(fit_len), DecayModel::exponential)},
                 {"oracle_available", have_oracle},
                 {"max_z_vs_oracle", have_oracle ? json(worst_z) : json(nullptr)}};
  write_json(ctx.out / "covariance_report.json", ctx.stamp, report);
  fmt::print(ctx.log, "covariance: sigma^2 = {:.5g}, sigma*^2 = {:.5g}\n", cov.sigma2, cov.sigma_star2);
  return kExitOk;
}

// ---------------------------------------------------------- counterexample

int cmd_counterexample(const ExperimentConfig& cfg, const Context& ctx) {
  if (cfg.noise.kind != "resonant") {
    throw UsageError("counterexample needs noise.kind = \"resonant\"; the command exhibits resonance");
  }
  if (cfg.noise.k == 0) throw UsageError("counterexample needs a nonzero mode k");
  const Setup s = make_setup(cfg);
  int k = cfg.noise.k;
  const double I_ref = cfg.noise.reference_I;
  const int K = std::max(cfg.oracle.k_max, std::abs(k));
  const FiberModes fiber = fiber_modes(s.G, s.rho, s.model, I_ref, K, std::max(cfg.oracle.theta_points, 4 * K + 16));
  // The resonant phase cancels the rotation of modes k and -k alike.
  auto weight_of = [&](int mode) {
    for (std::size_t i = 0; i < fiber.modes.size(); ++i) {
      if (fiber.modes[i] == mode) return fiber.weights[i];
    }
    return std::complex<double>(0.0);
  };
  std::complex<double> weight = weight_of(k);
  if (std::abs(weight) == 0.0 && std::abs(weight_of(-k)) > 0.0) {
    k = -k;
    weight = weight_of(k);
  }
  if (std::abs(weight) == 0.0) {
    throw UsageError(fmt::format("observable '{}' has no mode +-{} on the fiber I = {}", s.G.name(), k, I_ref));
  }

  const auto resonant = characteristic_function(s.noise);
  const auto control_noise = PerturbationModel::brownian(cfg.noise.c);
  const auto control = characteristic_function(control_noise);
  const std::int64_t Nmax = cfg.oracle.N;
  const auto ladder = ladder_with(cfg.sampling.N_ladder, Nmax);

  const SpectralTable table =
      build_spectral_table(s.G, s.rho, s.model, make_spectral_options(cfg, Nmax, ctx.threads));
  const auto ensemble = cesaro_running(oracle_series(table, Nmax, s.noise).values);
  const auto lim = limit_value(table);
  const auto fiber_lim = fiber_limit(fiber);

  CsvWriter csv(ctx.out / "counterexample.csv", ctx.stamp,
                {"N", "mode_re", "mode_im", "fiber_re", "fiber_im", "control_mode_abs", "control_fiber_abs",
                 "ensemble_abs"});
  const auto first = fiber_mode_cesaro(fiber, k, 1, resonant);
  double drift = 0.0;
  json rows = json::array();
  std::complex<double> last_fiber = 0.0, last_control = 0.0;
  for (auto n : ladder) {
    const auto mode = fiber_mode_cesaro(fiber, k, n, resonant);
    const auto total = fiber_cesaro(fiber, n, resonant);
    const auto ctrl_mode = fiber_mode_cesaro(fiber, k, n, control);
    const auto ctrl_total = fiber_cesaro(fiber, n, control);
    drift = std::max(drift, std::abs(mode - first));
    last_fiber = total;
    last_control = ctrl_mode;
    csv.row(n, mode.real(), mode.imag(), total.real(), total.imag(), std::abs(ctrl_mode),
            std::abs(ctrl_total - fiber_lim), std::abs(ensemble[n] - lim));
    rows.push_back({{"N", n},
                    {"mode", complex_json(mode)},
                    {"fiber_total", complex_json(total)},
                    {"control_mode_abs", std::abs(ctrl_mode)},
                    {"ensemble_distance", std::abs(ensemble[n] - lim)}});
  }
  csv.close();

  const double scale = std::abs(weight);
  const bool constant = drift <= 1e-12 * std::max(1.0, scale);
  const bool stuck = std::abs(last_fiber - fiber_lim) >= 0.5 * scale;
  const bool control_decays = std::abs(last_control) <= 0.05 * scale;
  const bool detected = constant && stuck;
  json report = {{"command", "counterexample"},
                 {"k", cfg.noise.k},
                 {"flagged_mode", k},
                 {"reference_I", I_ref},
                 {"omega_ref", fiber.omega},
                 {"mode_weight", complex_json(weight)},
                 {"mode_cesaro_j1", complex_json(first)},
                 {"mode_max_drift", drift},
                 {"mode_constant", constant},
                 {"fiber_limit", complex_json(fiber_lim)},
                 {"fiber_V_N_final", complex_json(last_fiber)},
                 {"fiber_does_not_converge", stuck},
                 {"control_noise", control_noise.name()},
                 {"control_mode_final_abs", std::abs(last_control)},
                 {"control_converges", control_decays},
                 {"ensemble_limit", complex_json(lim)},
                 {"non_convergence_detected", detected},
                 {"ladder", rows}};
  write_json(ctx.out / "counterexample.json", ctx.stamp, report);
  fmt::print(ctx.log, "counterexample: mode drift {:.3g}, fiber |V_N - limit| {:.4g}, control {:.3g} -> {}\n",
             drift, std::abs(last_fiber - fiber_lim), std::abs(last_control),
             detected ? "non-convergence detected" : "not detected");
  return detected ? kExitOk : kExitGate;
}

// ------------------------------------------------------ check-nonresonance

int cmd_check_nonresonance(const ExperimentConfig& cfg, const Context& ctx) {
  const FrequencyModel model = make_model(cfg);
  const auto& nr = cfg.nonresonance;
  std::vector<double> grid(nr.points);
  for (int i = 0; i < nr.points; ++i) {
    grid[i] = nr.points == 1 ? nr.I_lo : nr.I_lo + (nr.I_hi - nr.I_lo) * i / (nr.points - 1);
  }
  const NonresonanceReport rep = check_nonresonance(model, grid, nr.k_max, nr.tol);
  json violations = json::array();
  for (std::size_t i = 0; i < rep.resonant_points.size() && i < 1000; ++i) {
    const auto& p = rep.resonant_points[i];
    violations.push_back({{"I", p.action}, {"k", p.k}, {"m", p.m}, {"margin", p.margin}});
  }
  json report = {{"command", "check-nonresonance"},
                 {"k_max", rep.k_max},
                 {"tolerance", rep.tolerance},
                 {"grid", {{"lo", nr.I_lo}, {"hi", nr.I_hi}, {"points", nr.points}}},
                 {"worst_margin", rep.worst_margin},
                 {"worst_action", rep.worst_action},
                 {"worst_k", rep.worst_k},
                 {"violation_count", rep.resonant_points.size()},
                 {"violations", violations},
                 {"nonresonant", rep.nonresonant()}};
  write_json(ctx.out / "nonresonance.json", ctx.stamp, report);
  fmt::print(ctx.log, "check-nonresonance: worst margin {:.6g} at I = {:.6g}, k = {}; {} violation(s)\n",
             rep.worst_margin, rep.worst_action, rep.worst_k, rep.resonant_points.size());
  return rep.nonresonant() ? kExitOk : kExitGate;
}

using Handler = std::function<int(const ExperimentConfig&, const Context&)>;

const std::map<std::string, Handler, std::less<>>& handlers() {
  static const std::map<std::string, Handler, std::less<>> table = {
      {"simulate", cmd_simulate},
      {"oracle", cmd_oracle},
      {"compare", cmd_compare},
      {"clt", cmd_clt},
      {"covariance", cmd_covariance},
      {"counterexample", cmd_counterexample},
      {"check-nonresonance", cmd_check_nonresonance}};
  return table;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"simulate",   "oracle",         "compare",
                                                 "clt",        "covariance",     "counterexample",
                                                 "check-nonresonance"};
  return names;
}

int run_command(std::string_view command, ExperimentConfig cfg, const CommandOptions& opts,
                std::ostream& log, std::ostream& err) {
  try {
    const auto it = handlers().find(command);
    if (it == handlers().end()) throw UsageError("unknown command '" + std::string(command) + "'");
    if (opts.full_scale) cfg = apply_full_scale(cfg);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.output_dir = opts.out_dir->string();
    validate(cfg);
    Context ctx{fs::path(cfg.output_dir), RunStamp{config_hash(cfg), cfg.seed},
                resolve_threads(opts.threads), log};
    ensure_directory(ctx.out);
    return it->second(cfg, ctx);
  } catch (const IoError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitIo;
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\n", e.what());
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    fmt::print(err, "unsupported: {}\n", e.what());
    return kExitUsage;
  } catch (const DomainError& e) {
    fmt::print(err, "domain error: {}\n", e.what());
    return kExitUsage;
  }
}

int run_command(std::string_view command, const CommandOptions& opts, std::ostream& log,
                std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(opts.config_path);
  } catch (const IoError& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitIo;
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\n", e.what());
    return kExitUsage;
  }
  return run_command(command, std::move(cfg), opts, log, err);
}

}  // namespace twist::cli
