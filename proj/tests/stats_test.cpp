#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "twist/errors.hpp"
#include "twist/spectral_oracle.hpp"
#include "twist/stats.hpp"

using namespace twist;
using cd = std::complex<double>;

namespace {
const FrequencyModel kModel = FrequencyModel::cubic(0.3, 0.1, 0.005);
const GaussianPhaseSpace kGauss{1.0, 0.0, 0.01};

ReplicaSet white_noise(std::int64_t N, std::size_t R, std::uint64_t seed) {
  std::vector<double> x(N * R);
  for (std::size_t r = 0; r < R; ++r) {
    auto s = SeedPlan{seed}.stream(r);
    for (std::int64_t j = 0; j < N; ++j) x[r * N + j] = s.normal();
  }
  return ReplicaSet(N, R, std::move(x));
}
}  // namespace

TEST_CASE("ensemble means against the oracle") {
  const auto G = Observable::sqrt2I_exp(2.0);
  const std::vector<std::int64_t> js{0, 1, 10, 100, 1000, 10000};
  const auto rep = mc_ensemble_series(G, kGauss, kModel, PerturbationModel::none(), 100000, js, SeedPlan{1}, 4);
  REQUIRE(rep.mean.size() == js.size());
  CHECK(rep.sample_count == 100000);
  CHECK(std::abs(rep.mean[0].real() - 1.0) < 4 * rep.stderr_re[0]);
  SpectralOptions o;
  o.max_j = 10000;
  o.threads = 4;
  const auto t = build_spectral_table(G, kGauss, kModel, o);
  for (std::size_t i = 0; i < js.size(); ++i) {
    const cd ora = oracle_mean_deterministic(t, js[i]);
    CHECK(std::abs(rep.mean[i].real() - ora.real()) < 5 * rep.stderr_re[i]);
    CHECK(std::abs(rep.mean[i].imag() - ora.imag()) < 5 * rep.stderr_im[i]);
  }
  CHECK(std::abs(rep.mean.back()) < 0.02);
}

TEST_CASE("ensemble means: bookkeeping, errors and determinism") {
  const auto I = Observable::builtin("I", 2.0);
  const std::vector<std::int64_t> js{0, 3, 50};
  const auto rep = mc_ensemble_series(I, kGauss, kModel, PerturbationModel::brownian(0.1), 1000, js, SeedPlan{4});
  CHECK(rep.mean[0] == rep.mean[1]);
  CHECK(rep.mean[0] == rep.mean[2]);
  const std::vector<std::int64_t> none;
  const std::vector<std::int64_t> bad{2, -1};
  CHECK_THROWS_AS(mc_ensemble_series(I, kGauss, kModel, PerturbationModel::none(), 1000, none, SeedPlan{1}), UsageError);
  CHECK_THROWS_AS(mc_ensemble_series(I, kGauss, kModel, PerturbationModel::none(), 1000, bad, SeedPlan{1}), UsageError);

  const auto G = Observable::sqrt2I_exp(2.0);
  const std::vector<std::int64_t> seq{0, 1, 2, 3, 4, 5};
  const auto a = mc_ensemble_series(G, kGauss, kModel, PerturbationModel::brownian(0.2), 5000, seq, SeedPlan{9}, 1);
  const auto b = mc_ensemble_series(G, kGauss, kModel, PerturbationModel::brownian(0.2), 5000, seq, SeedPlan{9}, 3);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(a.mean[i] == b.mean[i]);
    CHECK(a.stderr_re[i] == b.stderr_re[i]);
  }
  REQUIRE(a.cesaro.size() == seq.size());
  CHECK(std::abs(a.cesaro[5] - (a.mean[1] + a.mean[2] + a.mean[3] + a.mean[4] + a.mean[5]) / 5.0) < 1e-15);
  // Standard error definition.
  CHECK(a.stderr_re[0] > 0.0);
  CHECK(a.standard_error(0) == doctest::Approx(std::hypot(a.stderr_re[0], a.stderr_im[0])));
}

TEST_CASE("snapshots follow the map") {
  const std::vector<std::int64_t> js{0, 7};
  const auto snaps = ensemble_snapshots(kGauss, kModel, PerturbationModel::none(), 10, js, SeedPlan{3});
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(snaps[1][i].action == snaps[0][i].action);
    const double expect = advance_angle(snaps[0][i].angle, kModel.frequency(snaps[0][i].action), 7);
    CHECK(snaps[1][i].angle == expect);
  }
  const auto one = ensemble_snapshots(kGauss, kModel, PerturbationModel::brownian(0.1), 1, js, SeedPlan{3});
  CHECK(one[0].size() == 1);
}

TEST_CASE("centroid norm") {
  const auto G = Observable::sqrt2I_exp(2.0);
  const std::vector<std::int64_t> js{0};
  const auto rep = mc_ensemble_series(G, kGauss, kModel, PerturbationModel::none(), 10000, js, SeedPlan{1});
  CHECK(centroid_norm(rep, 1.0)[0] == doctest::Approx(1.0).epsilon(0.01));
  CHECK_THROWS_AS(centroid_norm(rep, 0.0), UsageError);
  const std::vector<cd> zeros(5);
  for (double v : centroid_norm(zeros, 2.0)) CHECK(v == 0.0);
  SpectralOptions o;
  o.max_j = 500;
  const auto t = build_spectral_table(G, kGauss, kModel, o);
  const auto s = oracle_series(t, 500, PerturbationModel::brownian(0.2));
  CHECK(centroid_norm(s.values, 1.0)[500] < 0.05);
}

TEST_CASE("normalized sums") {
  SUBCASE("constant observable equal to its limit gives zeros") {
    const Observable flat("const", [](double, double) { return cd(0.7); }, true, 0.7);
    const auto x = clt_samples(flat, kGauss, kModel, PerturbationModel::brownian(0.1), 50, 200, SeedPlan{1}, cd(0.7));
    for (double v : x) CHECK(v == 0.0);
  }
  SUBCASE("N = 1 reduces to X_1") {
    const auto G = Observable::action_cos(2.0);
    SpectralOptions o;
    o.max_j = 10;
    const auto t = build_spectral_table(G, kGauss, kModel, o);
    const double center = limit_value(t).real();
    const auto x = clt_samples(G, kGauss, kModel, PerturbationModel::none(), 1, 20000, SeedPlan{2}, cd(center));
    const auto m = sample_moments(x);
    CHECK(std::abs(m.mean - (oracle_mean_deterministic(t, 1).real() - center)) < 4 * std::sqrt(m.variance / x.size()));
  }
  SUBCASE("ladder sums agree with the kept paths") {
    const auto G = Observable::action_cos(2.0);
    const std::vector<std::int64_t> ladder{5, 20};
    const auto set = simulate_replicas(G, kGauss, kModel, PerturbationModel::brownian(0.1), 40, 300,
                                       SeedPlan{6}, cd(0.0), ladder, 300);
    for (std::int64_t n : {5, 20, 40}) {
      const auto s = set.normalized_sums(n);
      for (std::size_t r = 0; r < 300; r += 37) {
        double acc = 0;
        for (std::int64_t j = 1; j <= n; ++j) acc += set.re(r, j);
        CHECK(s[r] == doctest::Approx(acc / std::sqrt(double(n))).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("lag covariances of synthetic sequences") {
  SUBCASE("white noise: no lag correlation, sigma*^2 = sigma^2") {
    const auto set = white_noise(200, 2000, 11);
    const auto rep = estimate_lag_covariances(set, 200, 20);
    CHECK(rep.sigma2 == doctest::Approx(1.0).epsilon(0.05));
    for (int h = 1; h <= 20; ++h) CHECK(std::abs(rep.c[h].real()) < 4 * rep.A_N_stderr[h]);
    CHECK(std::abs(rep.sigma_star2 - rep.sigma2) < 0.15);
  }
  SUBCASE("perfectly correlated: A_{N,k} = Var(X_1)") {
    std::vector<double> x(100 * 500);
    double s = 0, s2 = 0;
    for (std::size_t r = 0; r < 500; ++r) {
      auto st = SeedPlan{2}.stream(r);
      const double v = st.normal();
      s += v;
      s2 += v * v;
      for (int j = 0; j < 100; ++j) x[r * 100 + j] = v;
    }
    const double var = (s2 - s * s / 500) / 499;
    const auto rep = estimate_lag_covariances(ReplicaSet(100, 500, x), 100, 25);
    for (int h = 0; h <= 25; ++h) CHECK(rep.A_N[h].real() == doctest::Approx(var).epsilon(1e-10));
  }
  SUBCASE("AR(1) long-run variance sigma^2 (1 + r)/(1 - r)") {
    const double r = 0.5;
    const std::int64_t N = 400;
    const std::size_t R = 4000;
    std::vector<double> x(N * R);
    for (std::size_t i = 0; i < R; ++i) {
      auto st = SeedPlan{21}.stream(i);
      double v = st.normal();  // stationary start with unit variance
      for (std::int64_t j = 0; j < N; ++j) {
        v = r * v + std::sqrt(1 - r * r) * st.normal();
        x[i * N + j] = v;
      }
    }
    const auto rep = estimate_lag_covariances(ReplicaSet(N, R, x), N, 40);
    CHECK(rep.sigma_star2 == doctest::Approx(3.0).epsilon(0.10));
    CHECK(rep.all_converged());
    CHECK(rep.tail_rate == doctest::Approx(std::log(2.0)).epsilon(0.3));
  }
  SUBCASE("usage errors") {
    const auto small = white_noise(100, 50, 1);
    CHECK_THROWS_AS(estimate_lag_covariances(small, 100, 10), UsageError);
    const auto ok = white_noise(100, 200, 1);
    CHECK_THROWS_AS(estimate_lag_covariances(ok, 100, 26), UsageError);
  }
  SUBCASE("thread count does not change the result") {
    const auto set = white_noise(120, 700, 5);
    const auto a = estimate_lag_covariances(set, 120, 30, LagProduct::bilinear, 0.25, 1);
    const auto b = estimate_lag_covariances(set, 120, 30, LagProduct::bilinear, 0.25, 4);
    for (int h = 0; h <= 30; ++h) CHECK(a.A_N[h] == b.A_N[h]);
    CHECK(a.sigma_star2 == b.sigma_star2);
  }
}

TEST_CASE("sample variance of X_N matches the estimated sigma*^2") {
  const auto G = Observable::action_cos(2.0);
  const auto noise = PerturbationModel::brownian(0.2);
  SpectralOptions o;
  o.max_j = 1000;
  o.threads = 4;
  const auto t = build_spectral_table(G, kGauss, kModel, o);
  const std::int64_t N = 1000;
  const auto set = simulate_replicas(G, kGauss, kModel, noise, N, 10000, SeedPlan{99}, limit_value(t),
                                     {}, static_cast<std::size_t>(-1), 4);
  const auto rep = estimate_lag_covariances(set, N, 250, LagProduct::bilinear, 0.25, 4);
  const auto x = set.normalized_sums(N);
  const auto m = sample_moments(x);
  CHECK(m.variance == doctest::Approx(rep.sigma_star2).epsilon(0.10));
  const auto oracle = oracle_limiting_variance(t, noise);
  CHECK(rep.sigma2 == doctest::Approx(oracle.sigma2).epsilon(0.03));
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
  std::vector<double> z(100000);
  auto s = SeedPlan{1}.stream(0);
  for (auto& v : z) v = s.normal();
  CHECK(ks_normality_test(z, 1.0).statistic < 0.005);
  CHECK(ks_normality_test(z, 1.0).pass);
  const std::vector<double> zeros(1000, 0.0);
  CHECK(ks_normality_test(zeros, 1.0).statistic == doctest::Approx(0.5));
  std::vector<double> wide(z);
  for (auto& v : wide) v *= 2.0;
  CHECK_FALSE(ks_normality_test(wide, 1.0).pass);
  CHECK_THROWS_AS(ks_normality_test(z, 0.0), UsageError);
}

TEST_CASE("Lindeberg diagnostic") {
  const auto G = Observable::action_cos(2.0);
  const std::int64_t N = 10000;
  const auto set = simulate_replicas(G, kGauss, kModel, PerturbationModel::brownian(0.1), N, 200, SeedPlan{8}, cd(0.0));
  const std::vector<double> eps{0.5, 0.01};
  const auto pts = lindeberg_diagnostic(set, N, eps, G.bound());
  for (const auto& p : pts) {
    CHECK(p.within_bound);
    CHECK(p.value <= p.bound + 3 * p.standard_error);
    CHECK(p.bound == doctest::Approx(std::pow(2 * G.bound(), 3) / (p.eps * std::sqrt(double(N)))));
  }
  // eps above 2||G|| / sqrt(N): the indicator never fires.
  CHECK(pts[0].value == 0.0);
  const auto quarter = lindeberg_diagnostic(set, N / 4, eps, G.bound());
  CHECK(pts[0].bound == doctest::Approx(quarter[0].bound / 2));
  // Heavy synthetic values above eps contribute.
  std::vector<double> x(4 * 100, 3.0);
  const auto heavy = lindeberg_diagnostic(ReplicaSet(4, 100, x), 4, eps, 3.0);
  CHECK(heavy[0].value == doctest::Approx(4 * 9.0 / 4));
}

TEST_CASE("decay fits") {
  std::vector<double> e(200), p(200);
  for (int j = 0; j < 200; ++j) {
    e[j] = std::exp(-0.02 * j);
    p[j] = j == 0 ? 0.0 : 1.0 / j;
  }
  const auto fe = fit_decay(e, DecayModel::exponential);
  CHECK(fe.rate == doctest::Approx(0.02).epsilon(1e-10));
  CHECK(fe.r_squared > 0.999);
  const auto fp = fit_decay(p, DecayModel::power_law);
  CHECK(fp.rate == doctest::Approx(-1.0).epsilon(0.01));
  CHECK(fp.dropped == 1);
  const std::vector<double> few{1.0, 0.5, 0.0, 0.0, 0.2};
  CHECK_THROWS_AS(fit_decay(few, DecayModel::exponential), UsageError);
}

TEST_CASE("mean decay of E X_j under the deterministic map") {
  SUBCASE("density with mass at the action boundary: 1/j") {
    const InitialDensity ramp = ramp_von_mises(0.25, 0.75, 2.0);
    const auto G = Observable::sqrt2I_exp(2.0);
    SpectralOptions o;
    o.max_j = 10000;
    o.I_min = 0.25;
    o.I_max = 0.75;
    o.threads = 4;
    const auto t = build_spectral_table(G, ramp, kModel, o);
    const auto s = oracle_series(t, 10000, PerturbationModel::none());
    std::vector<double> x, y;
    for (std::int64_t j = 10; j <= 10000; j = std::max(j + 1, j * 11 / 10)) {
      x.push_back(double(j));
      y.push_back(std::abs(s.values[j] - limit_value(t)));
    }
    const auto fit = fit_decay(x, y, DecayModel::power_law);
    CHECK(fit.rate >= -1.3);
    CHECK(fit.rate <= -0.7);
  }
  SUBCASE("Gaussian cloud: faster than any power") {
    const auto G = Observable::sqrt2I_exp(2.0);
    SpectralOptions o;
    o.max_j = 3000;
    o.threads = 4;
    const auto t = build_spectral_table(G, kGauss, kModel, o);
    const auto s = oracle_series(t, 3000, PerturbationModel::none());
    CHECK(std::abs(s.values[100]) > 1e-2);
    CHECK(std::abs(s.values[3000]) < 1e-12);
  }
}

TEST_CASE("envelopes and moment diagnostics") {
  const std::vector<double> v{0, 3, -5, 1, 0, 0, 2};
  const auto env = rolling_max_envelope(v, 2);
  CHECK(env == std::vector<double>{3, 5, 5, 5, 1, 2, 2});
  std::vector<double> z(200000);
  auto s = SeedPlan{3}.stream(0);
  for (auto& x : z) x = s.normal();
  CHECK(third_moment_ratio(z) == doctest::Approx(2 * std::sqrt(2 / kPi)).epsilon(0.02));
  const std::vector<double> u{0.5, 1.0};
  const auto lc = empirical_log_characteristic(z, u);
  CHECK(lc[0].real() == doctest::Approx(-0.125).epsilon(0.05));
  CHECK(lc[1].real() == doctest::Approx(-0.5).epsilon(0.03));
  const std::vector<double> three{1.0, 2.0, 3.0};
  CHECK(sample_moments(three).mean == 2.0);
  CHECK(sample_moments(three).variance == 1.0);
}
