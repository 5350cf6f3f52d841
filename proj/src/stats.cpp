#include "twist/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "twist/errors.hpp"

namespace twist {

namespace {

constexpr std::size_t kTrajectoryBlock = 1024;
constexpr std::size_t kReplicaBlock = 64;

struct TimeIndex {
  std::vector<std::int64_t> sorted;      // unique, increasing
  std::vector<std::size_t> slot;         // j_values[i] -> sorted index
};

TimeIndex index_times(std::span<const std::int64_t> j_values) {
  if (j_values.empty()) throw UsageError("j list is empty");
  for (auto j : j_values) {
    if (j < 0) throw UsageError("j list contains a negative iteration index");
  }
  TimeIndex t;
  t.sorted.assign(j_values.begin(), j_values.end());
  std::sort(t.sorted.begin(), t.sorted.end());
  t.sorted.erase(std::unique(t.sorted.begin(), t.sorted.end()), t.sorted.end());
  for (auto j : j_values) {
    t.slot.push_back(static_cast<std::size_t>(
        std::lower_bound(t.sorted.begin(), t.sorted.end(), j) - t.sorted.begin()));
  }
  return t;
}

// One trajectory: initial point and the noise at the requested times.
struct Trajectory {
  PhasePoint start;
  double omega = 0.0;
  std::vector<double> noise;
};

Trajectory draw_trajectory(const InitialDensity& rho, const FrequencyModel& model,
                           const PerturbationModel& noise, std::span<const std::int64_t> times,
                           const SeedPlan& plan, std::size_t i) {
  Trajectory tr;
  Stream s0 = plan.stream(i, kLaneInitial);
  tr.start = draw_initial(rho, s0);
  tr.omega = model.frequency(tr.start.action);
  if (noise.is_none()) {
    tr.noise.assign(times.size(), 0.0);
  } else {
    Stream s1 = plan.stream(i, kLaneNoise);
    tr.noise = sample_noise_at(noise, times, s1);
  }
  return tr;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double EnsembleReport::standard_error(std::size_t i) const {
  return std::hypot(stderr_re.at(i), stderr_im.at(i));
}

EnsembleReport mc_ensemble_series(const Observable& G, const InitialDensity& rho,
                                  const FrequencyModel& model, const PerturbationModel& noise,
                                  std::size_t M, std::span<const std::int64_t> j_values,
                                  const SeedPlan& plan, unsigned threads) {
  if (M < 1) throw UsageError("mc_ensemble_series: M must be >= 1");
  validate(rho);
  const TimeIndex ti = index_times(j_values);
  const std::size_t T = ti.sorted.size();
  const double c = noise.intensity();

  const std::size_t blocks = block_count(M, kTrajectoryBlock);
  std::vector<std::vector<std::array<double, 4>>> partial(blocks);
  parallel_for_blocks(M, kTrajectoryBlock, threads,
                      [&](std::size_t begin, std::size_t end, std::size_t b) {
                        auto& acc = partial[b];
                        acc.assign(T, {0.0, 0.0, 0.0, 0.0});
                        for (std::size_t i = begin; i < end; ++i) {
                          const Trajectory tr = draw_trajectory(rho, model, noise, ti.sorted, plan, i);
                          for (std::size_t t = 0; t < T; ++t) {
                            const double theta = advance_angle(tr.start.angle, tr.omega, ti.sorted[t],
                                                               c * tr.noise[t]);
                            const auto g = G(tr.start.action, theta);
                            acc[t][0] += g.real();
                            acc[t][1] += g.imag();
                            acc[t][2] += g.real() * g.real();
                            acc[t][3] += g.imag() * g.imag();
                          }
                        }
                      });

  std::vector<std::array<double, 4>> total(T, {0.0, 0.0, 0.0, 0.0});
  for (const auto& blk : partial) {
    for (std::size_t t = 0; t < T; ++t) {
      for (int q = 0; q < 4; ++q) total[t][q] += blk[t][q];
    }
  }

  EnsembleReport rep;
  rep.sample_count = M;
  rep.j_values.assign(j_values.begin(), j_values.end());
  const double m = static_cast<double>(M);
  std::vector<std::complex<double>> sorted_mean(T);
  std::vector<double> se_re(T), se_im(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double mr = total[t][0] / m, mi = total[t][1] / m;
    sorted_mean[t] = {mr, mi};
    if (M > 1) {
      const double vr = std::max(0.0, (total[t][2] - m * mr * mr) / (m - 1.0));
      const double vi = std::max(0.0, (total[t][3] - m * mi * mi) / (m - 1.0));
      se_re[t] = std::sqrt(vr / m);
      se_im[t] = std::sqrt(vi / m);
    }
  }
  for (std::size_t slot : ti.slot) {
    rep.mean.push_back(sorted_mean[slot]);
    rep.stderr_re.push_back(se_re[slot]);
    rep.stderr_im.push_back(se_im[slot]);
  }

  // Running Cesaro averages when the j list is a full range.
  const bool contiguous = ti.sorted.back() - ti.sorted.front() + 1 == static_cast<std::int64_t>(T) &&
                          ti.sorted.front() <= 1 && ti.sorted.back() >= 1;
  if (contiguous) {
    std::complex<double> acc = 0.0;
    std::int64_t count = 0;
    rep.cesaro.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      if (ti.sorted[t] == 0) continue;
      acc += sorted_mean[t];
      ++count;
      rep.cesaro[t] = acc / static_cast<double>(count);
    }
  }
  return rep;
}

std::vector<std::vector<PhasePoint>> ensemble_snapshots(const InitialDensity& rho,
                                                        const FrequencyModel& model,
                                                        const PerturbationModel& noise,
                                                        std::size_t M,
                                                        std::span<const std::int64_t> j_values,
                                                        const SeedPlan& plan, unsigned threads) {
  if (M < 1) throw UsageError("ensemble_snapshots: M must be >= 1");
  validate(rho);
  const TimeIndex ti = index_times(j_values);
  const double c = noise.intensity();
  std::vector<std::vector<PhasePoint>> sorted(ti.sorted.size(), std::vector<PhasePoint>(M));
  parallel_for_blocks(M, kTrajectoryBlock, threads,
                      [&](std::size_t begin, std::size_t end, std::size_t) {
                        for (std::size_t i = begin; i < end; ++i) {
                          const Trajectory tr = draw_trajectory(rho, model, noise, ti.sorted, plan, i);
                          for (std::size_t t = 0; t < ti.sorted.size(); ++t) {
                            sorted[t][i] = {tr.start.action,
                                            advance_angle(tr.start.angle, tr.omega, ti.sorted[t],
                                                          c * tr.noise[t])};
                          }
                        }
                      });
  std::vector<std::vector<PhasePoint>> out;
  out.reserve(ti.slot.size());
  for (std::size_t slot : ti.slot) out.push_back(sorted[slot]);
  return out;
}

std::vector<double> centroid_norm(std::span<const std::complex<double>> means, double q0) {
  if (q0 == 0.0 || !std::isfinite(q0)) throw UsageError("centroid_norm: q0 must be nonzero");
  std::vector<double> out;
  out.reserve(means.size());
  for (const auto& m : means) out.push_back(std::abs(m) / std::abs(q0));
  return out;
}

std::vector<double> centroid_norm(const EnsembleReport& report, double q0) {
  return centroid_norm(std::span<const std::complex<double>>(report.mean), q0);
}

ReplicaSet::ReplicaSet(std::int64_t N, std::size_t R, std::vector<double> real,
                       std::vector<double> imag)
    : N_(N), R_(R), path_R_(R), real_(std::move(real)), imag_(std::move(imag)) {
  if (N < 1 || R < 1) throw UsageError("ReplicaSet: N and R must be >= 1");
  const std::size_t need = static_cast<std::size_t>(N) * R;
  if (real_.size() != need || (!imag_.empty() && imag_.size() != need)) {
    throw UsageError("ReplicaSet: data size must be N * R");
  }
}

std::span<const double> ReplicaSet::row_re(std::size_t r) const {
  return {real_.data() + r * N_, static_cast<std::size_t>(N_)};
}

std::span<const double> ReplicaSet::row_im(std::size_t r) const {
  if (imag_.empty()) return {};
  return {imag_.data() + r * N_, static_cast<std::size_t>(N_)};
}

namespace {

std::vector<double> sums_from_paths(const std::vector<double>& data, std::size_t R, std::int64_t N,
                                    std::int64_t Np) {
  std::vector<double> out(R, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(Np));
  for (std::size_t r = 0; r < R; ++r) {
    double acc = 0.0;
    for (std::int64_t j = 0; j < Np; ++j) acc += data[r * N + j];
    out[r] = acc * scale;
  }
  return out;
}

}  // namespace

std::vector<double> ReplicaSet::normalized_sums(std::int64_t Np) const {
  const auto it = std::find(ladder_.begin(), ladder_.end(), Np);
  if (it != ladder_.end()) {
    const auto idx = static_cast<std::size_t>(it - ladder_.begin());
    return {sum_real_.begin() + idx * R_, sum_real_.begin() + (idx + 1) * R_};
  }
  if (Np < 1 || Np > N_ || path_R_ != R_) {
    throw UsageError("normalized_sums: N' is not on the recorded ladder");
  }
  return sums_from_paths(real_, R_, N_, Np);
}

std::vector<double> ReplicaSet::normalized_sums_imag(std::int64_t Np) const {
  const auto it = std::find(ladder_.begin(), ladder_.end(), Np);
  if (it != ladder_.end() && !sum_imag_.empty()) {
    const auto idx = static_cast<std::size_t>(it - ladder_.begin());
    return {sum_imag_.begin() + idx * R_, sum_imag_.begin() + (idx + 1) * R_};
  }
  if (imag_.empty()) return std::vector<double>(R_, 0.0);
  if (Np < 1 || Np > N_ || path_R_ != R_) {
    throw UsageError("normalized_sums: N' is not on the recorded ladder");
  }
  return sums_from_paths(imag_, R_, N_, Np);
}

ReplicaSet simulate_replicas(const Observable& G, const InitialDensity& rho,
                             const FrequencyModel& model, const PerturbationModel& noise,
                             std::int64_t N, std::size_t R, const SeedPlan& plan,
                             std::complex<double> center, std::span<const std::int64_t> ladder,
                             std::size_t path_replicas, unsigned threads) {
  if (N < 1) throw UsageError("simulate_replicas: N must be >= 1");
  if (R < 1) throw UsageError("simulate_replicas: R must be >= 1");
  validate(rho);
  ReplicaSet set;
  set.N_ = N;
  set.R_ = R;
  set.path_R_ = std::min(path_replicas, R);
  for (auto n : ladder) {
    if (n < 1 || n > N) throw UsageError("simulate_replicas: ladder entries must lie in [1, N]");
    set.ladder_.push_back(n);
  }
  set.ladder_.push_back(N);
  std::sort(set.ladder_.begin(), set.ladder_.end());
  set.ladder_.erase(std::unique(set.ladder_.begin(), set.ladder_.end()), set.ladder_.end());

  const bool cplx = !G.real_valued();
  const std::size_t L = set.ladder_.size();
  set.real_.assign(set.path_R_ * N, 0.0);
  if (cplx) set.imag_.assign(set.path_R_ * N, 0.0);
  set.sum_real_.assign(L * R, 0.0);
  if (cplx) set.sum_imag_.assign(L * R, 0.0);
  const double c = noise.intensity();

  parallel_for_blocks(R, kReplicaBlock, threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<double> xs;
    for (std::size_t r = begin; r < end; ++r) {
      Stream s0 = plan.stream(r, kLaneInitial);
      const PhasePoint p0 = draw_initial(rho, s0);
      const double w = model.frequency(p0.action);
      const double* X = nullptr;
      NoisePath path;
      if (!noise.is_none()) {
        Stream s1 = plan.stream(r, kLaneNoise);
        path = sample_noise_path(noise, N, s1);
        X = path.cumulative.data();
      }
      const bool keep = r < set.path_R_;
      double acc_re = 0.0, acc_im = 0.0;
      std::size_t next = 0;
      for (std::int64_t j = 1; j <= N; ++j) {
        const double theta = advance_angle(p0.angle, w, j, X ? c * X[j] : 0.0);
        const auto g = G(p0.action, theta) - center;
        acc_re += g.real();
        acc_im += g.imag();
        if (keep) {
          set.real_[r * N + (j - 1)] = g.real();
          if (cplx) set.imag_[r * N + (j - 1)] = g.imag();
        }
        if (next < L && set.ladder_[next] == j) {
          const double scale = 1.0 / std::sqrt(static_cast<double>(j));
          set.sum_real_[next * R + r] = acc_re * scale;
          if (cplx) set.sum_imag_[next * R + r] = acc_im * scale;
          ++next;
        }
      }
    }
  });
  return set;
}

std::vector<double> clt_samples(const Observable& G, const InitialDensity& rho,
                                const FrequencyModel& model, const PerturbationModel& noise,
                                std::int64_t N, std::size_t R, const SeedPlan& plan,
                                std::complex<double> center, unsigned threads) {
  const ReplicaSet set = simulate_replicas(G, rho, model, noise, N, R, plan, center, {}, 0, threads);
  return set.normalized_sums(N);
}

bool CovarianceReport::all_converged() const {
  return std::all_of(converged.begin() + (converged.empty() ? 0 : 1), converged.end(),
                     [](bool b) { return b; });
}

CovarianceReport estimate_lag_covariances(const ReplicaSet& X, std::int64_t N, int H,
                                          LagProduct product, double tail_fraction,
                                          unsigned threads) {
  const std::size_t R = X.path_replicas();
  if (R < 100) throw UsageError("estimate_lag_covariances: need at least 100 replicas with paths");
  if (N < 4 || N > X.steps()) throw UsageError("estimate_lag_covariances: N outside [4, steps]");
  if (H < 1 || H > N / 4) throw UsageError("estimate_lag_covariances: need 1 <= H <= N/4");
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw UsageError("estimate_lag_covariances: tail fraction must lie in (0, 1]");
  }
  const bool cplx = X.is_complex();
  const bool herm = product == LagProduct::hermitian;
  const std::int64_t Nh = N / 2;
  const int Hh = static_cast<int>(std::min<std::int64_t>(H, Nh - 1));

  // Column means, merged in replica-block order.
  const std::size_t blocks = block_count(R, kReplicaBlock);
  std::vector<std::vector<double>> part_re(blocks), part_im(blocks);
  parallel_for_blocks(R, kReplicaBlock, threads, [&](std::size_t begin, std::size_t end, std::size_t b) {
    part_re[b].assign(N, 0.0);
    if (cplx) part_im[b].assign(N, 0.0);
    for (std::size_t r = begin; r < end; ++r) {
      for (std::int64_t j = 1; j <= N; ++j) {
        part_re[b][j - 1] += X.re(r, j);
        if (cplx) part_im[b][j - 1] += X.im(r, j);
      }
    }
  });
  std::vector<double> mean_re(N, 0.0), mean_im(N, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::int64_t j = 0; j < N; ++j) {
      mean_re[j] += part_re[b][j];
      if (cplx) mean_im[j] += part_im[b][j];
    }
  }
  for (std::int64_t j = 0; j < N; ++j) {
    mean_re[j] /= static_cast<double>(R);
    mean_im[j] /= static_cast<double>(R);
  }

  // Per-replica lag averages L_r(h) at N and N/2, plus the tail variance sum.
  // Layout of a block accumulator: for each of the 2(H+1) lag slots the sums
  // of Re L, Im L, (Re L)^2, (Im L)^2; then the variance-tail sum.
  const std::int64_t tail_start =
      N - std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(tail_fraction * N))) + 1;
  const std::size_t slots = 2 * static_cast<std::size_t>(H + 1);
  std::vector<std::vector<double>> acc(blocks);
  parallel_for_blocks(R, kReplicaBlock, threads, [&](std::size_t begin, std::size_t end, std::size_t b) {
    auto& a = acc[b];
    a.assign(4 * slots + 1, 0.0);
    std::vector<double> yr(N), yi(cplx ? N : 0);
    for (std::size_t r = begin; r < end; ++r) {
      for (std::int64_t j = 0; j < N; ++j) {
        yr[j] = X.re(r, j + 1) - mean_re[j];
        if (cplx) yi[j] = X.im(r, j + 1) - mean_im[j];
      }
      for (std::int64_t j = tail_start - 1; j < N; ++j) {
        a[4 * slots] += yr[j] * yr[j] + (cplx ? (herm ? 1.0 : -1.0) * yi[j] * yi[j] : 0.0);
      }
      auto lag_sum = [&](int h, std::int64_t len, std::size_t slot) {
        double sr = 0.0, si = 0.0;
        const std::int64_t terms = len - h;
        for (std::int64_t j = 0; j < terms; ++j) sr += yr[j] * yr[j + h];
        if (cplx) {
          // bilinear: (a+ib)(c+id); hermitian: (a+ib)(c-id)
          const double sgn = herm ? 1.0 : -1.0;
          for (std::int64_t j = 0; j < terms; ++j) {
            sr += sgn * yi[j] * yi[j + h];
            si += yi[j] * yr[j + h] - sgn * yr[j] * yi[j + h];
          }
        }
        sr /= static_cast<double>(terms);
        si /= static_cast<double>(terms);
        a[4 * slot + 0] += sr;
        a[4 * slot + 1] += si;
        a[4 * slot + 2] += sr * sr;
        a[4 * slot + 3] += si * si;
      };
      for (int h = 0; h <= H; ++h) lag_sum(h, N, h);
      for (int h = 0; h <= Hh; ++h) lag_sum(h, Nh, H + 1 + h);
    }
  });
  std::vector<double> tot(4 * slots + 1, 0.0);
  for (const auto& a : acc) {
    for (std::size_t q = 0; q < tot.size(); ++q) tot[q] += a[q];
  }

  const double Rd = static_cast<double>(R);
  const double bessel = Rd / (Rd - 1.0);
  auto summarize = [&](std::size_t slot, std::complex<double>& value, double& se) {
    const double mr = tot[4 * slot] / Rd, mi = tot[4 * slot + 1] / Rd;
    const double vr = std::max(0.0, tot[4 * slot + 2] / Rd - mr * mr) * bessel;
    const double vi = std::max(0.0, tot[4 * slot + 3] / Rd - mi * mi) * bessel;
    value = std::complex<double>(mr, mi) * bessel;
    se = std::sqrt((vr + vi) / Rd) * bessel;
  };

  CovarianceReport rep;
  rep.N = N;
  rep.R = R;
  rep.H = H;
  rep.quartile_fraction = tail_fraction;
  rep.A_N.resize(H + 1);
  rep.A_N_stderr.resize(H + 1);
  rep.A_half.assign(H + 1, std::complex<double>(std::nan(""), std::nan("")));
  rep.A_half_stderr.assign(H + 1, std::nan(""));
  rep.converged.assign(H + 1, false);
  rep.c.resize(H + 1);
  rep.c_halfwidth.resize(H + 1);
  for (int h = 0; h <= H; ++h) {
    summarize(h, rep.A_N[h], rep.A_N_stderr[h]);
    if (h <= Hh) {
      summarize(H + 1 + h, rep.A_half[h], rep.A_half_stderr[h]);
      const double width = 2.0 * 1.96 * std::hypot(rep.A_N_stderr[h], rep.A_half_stderr[h]);
      rep.converged[h] = std::abs(rep.A_N[h] - rep.A_half[h]) < width;
    }
    rep.c[h] = rep.A_N[h];
    rep.c_halfwidth[h] = 1.96 * rep.A_N_stderr[h];
  }

  const double tail_terms = static_cast<double>(N - tail_start + 1);
  rep.sigma2 = tot[4 * slots] / tail_terms / (Rd - 1.0);
  double lag_sum = 0.0;
  for (int h = 1; h <= H; ++h) lag_sum += rep.c[h].real();
  rep.sigma_star2 = rep.sigma2 + 2.0 * lag_sum;

  // Tail fit on the leading lags that stand out of the noise.
  std::vector<double> xs, ys;
  for (int h = 1; h <= H; ++h) {
    if (std::abs(rep.A_N[h]) <= 2.0 * rep.A_N_stderr[h]) break;
    xs.push_back(h);
    ys.push_back(std::abs(rep.A_N[h]));
  }
  try {
    const DecayFit fit = fit_decay(xs, ys, DecayModel::exponential);
    rep.tail_rate = fit.rate;
    if (fit.rate > 0.0) {
      rep.remainder_bound =
          2.0 * fit.prefactor * std::exp(-fit.rate * (H + 1)) / (1.0 - std::exp(-fit.rate));
      rep.remainder_valid = true;
    }
  } catch (const UsageError&) {
    rep.remainder_valid = false;
  }
  return rep;
}

KsResult ks_normality_test(std::span<const double> samples, double sigma, double threshold) {
  if (!(sigma > 0.0)) throw UsageError("ks_normality_test: sigma must be > 0");
  if (samples.empty()) throw UsageError("ks_normality_test: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double D = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = normal_cdf(s[i] / sigma);
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  return {D, D < threshold, threshold};
}

std::vector<LindebergPoint> lindeberg_diagnostic(const ReplicaSet& X, std::int64_t N,
                                                 std::span<const double> eps_grid,
                                                 double G_bound) {
  if (N < 1 || N > X.steps()) throw UsageError("lindeberg_diagnostic: N outside [1, steps]");
  if (X.path_replicas() < 2) throw UsageError("lindeberg_diagnostic: need replica paths");
  for (double e : eps_grid) {
    if (!(e > 0.0)) throw UsageError("lindeberg_diagnostic: eps must be > 0");
  }
  const std::size_t R = X.path_replicas();
  const double rootN = std::sqrt(static_cast<double>(N));
  std::vector<LindebergPoint> out;
  for (double eps : eps_grid) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
      double v = 0.0;
      for (std::int64_t j = 1; j <= N; ++j) {
        const double y2 = (X.re(r, j) * X.re(r, j) + X.im(r, j) * X.im(r, j)) / N;
        if (std::sqrt(y2) > eps) v += y2;
      }
      s1 += v;
      s2 += v * v;
    }
    LindebergPoint p;
    p.eps = eps;
    const double Rd = static_cast<double>(R);
    p.value = s1 / Rd;
    p.standard_error = std::sqrt(std::max(0.0, s2 / Rd - p.value * p.value) / (Rd - 1.0));
    p.bound = std::pow(2.0 * G_bound, 3) / (eps * rootN);
    p.within_bound = p.value <= p.bound + 3.0 * p.standard_error;
    out.push_back(p);
  }
  return out;
}

DecayFit fit_decay(std::span<const double> x, std::span<const double> y, DecayModel model) {
  if (x.size() != y.size()) throw UsageError("fit_decay: x and y differ in length");
  std::vector<double> u, v;
  DecayFit fit;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool ok = y[i] > 0.0 && std::isfinite(y[i]) && std::isfinite(x[i]) &&
                    (model == DecayModel::exponential || x[i] > 0.0);
    if (!ok) {
      ++fit.dropped;
      continue;
    }
    u.push_back(model == DecayModel::exponential ? x[i] : std::log(x[i]));
    v.push_back(std::log(y[i]));
  }
  fit.used = u.size();
  if (u.size() < 4) throw UsageError("fit_decay: fewer than 4 usable points");
  const double n = static_cast<double>(u.size());
  const double mu = std::accumulate(u.begin(), u.end(), 0.0) / n;
  const double mv = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double suu = 0.0, suv = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    suu += (u[i] - mu) * (u[i] - mu);
    suv += (u[i] - mu) * (v[i] - mv);
    svv += (v[i] - mv) * (v[i] - mv);
  }
  if (suu == 0.0) throw UsageError("fit_decay: abscissae are all equal");
  const double slope = suv / suu;
  const double intercept = mv - slope * mu;
  fit.rate = model == DecayModel::exponential ? -slope : slope;
  fit.prefactor = std::exp(intercept);
  fit.r_squared = svv == 0.0 ? 1.0 : (suv * suv) / (suu * svv);
  return fit;
}

DecayFit fit_decay(std::span<const double> series, DecayModel model) {
  std::vector<double> x(series.size());
  std::iota(x.begin(), x.end(), 0.0);
  return fit_decay(x, series, model);
}

std::vector<double> rolling_max_envelope(std::span<const double> values, std::size_t window) {
  if (window == 0) throw UsageError("rolling_max_envelope: window must be >= 1");
  const std::size_t half = window / 2;
  std::vector<double> out(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size(), i + half + 1);
    double m = 0.0;
    for (std::size_t k = lo; k < hi; ++k) m = std::max(m, std::abs(values[k]));
    out[i] = m;
  }
  return out;
}

std::vector<std::complex<double>> empirical_log_characteristic(std::span<const double> samples,
                                                               std::span<const double> u_grid) {
  if (samples.empty()) throw UsageError("empirical_log_characteristic: no samples");
  std::vector<std::complex<double>> out;
  for (double u : u_grid) {
    std::complex<double> acc = 0.0;
    for (double s : samples) acc += std::complex<double>(std::cos(u * s), std::sin(u * s));
    out.push_back(std::log(acc / static_cast<double>(samples.size())));
  }
  return out;
}

double third_moment_ratio(std::span<const double> sums) {
  if (sums.empty()) throw UsageError("third_moment_ratio: no samples");
  double acc = 0.0;
  for (double s : sums) acc += std::abs(s) * s * s;
  return acc / static_cast<double>(sums.size());
}

SampleMoments sample_moments(std::span<const double> v) {
  if (v.empty()) throw UsageError("sample_moments: no samples");
  SampleMoments m;
  const double n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.variance = ss / (n - 1.0);
  }
  return m;
}

}  // namespace twist
