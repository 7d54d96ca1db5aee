#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "pfgp/error.hpp"
#include "pfgp/experiment.hpp"
#include "pfgp/gaussian_divergences.hpp"
#include "pfgp/random.hpp"

namespace pfgp {

namespace {

void report(std::ostream& out, TheoryCheckResult& res, bool ok, const std::string& name, const std::string& detail) {
  (ok ? res.passed : res.failed) += 1;
  out << (ok ? "[PASS] " : "[FAIL] ") << name << ": " << detail << '\n';
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

// Random SPD matrix with eigenvalues drawn log-uniformly from [lo, hi].
MatrixXd random_spd(Index d, double lo, double hi, Rng& rng) {
  const MatrixXd g = standard_normal(d, d, rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  const MatrixXd q = qr.householderQ();
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  VectorXd eig(d);
  for (Index i = 0; i < d; ++i) eig(i) = std::exp(u(rng));
  return symmetrize(q * eig.asDiagonal() * q.transpose());
}

GaussianNd random_gaussian(Index d, double lo, double hi, double mean_scale, Rng& rng) {
  GaussianNd g;
  g.mean = mean_scale * standard_normal(d, 1, rng).col(0);
  g.cov = random_spd(d, lo, hi, rng);
  return g;
}

}  // namespace

TheoryCheckResult theory_check(std::ostream& out, std::uint64_t seed) {
  TheoryCheckResult res;
  Rng rng(derive_seed(seed, 0x7e0));

  {
    const GaussianNd nu_t = GaussianNd::scalar(0.0, 1.0);
    const GaussianNd eta = prop1_construct(5.0, 0.0, 1.0);
    const double kl = kl_gaussian(nu_t, eta);
    const double off = std::abs(eta.mean(0) - nu_t.mean(0)) / std::sqrt(nu_t.cov(0, 0));
    report(out, res, std::abs(kl - 5.0) <= 1e-10, "kl-pathology/kl", fmt("KL = %.12f (target 5)", kl));
    report(out, res, off > 148.0, "kl-pathology/mean-offset", fmt("|mu - mu~| / s~ = %.6f (> 148)", off));
  }

  {
    std::uniform_real_distribution<double> mu(-3.0, 3.0);
    std::uniform_real_distribution<double> ls(std::log(0.05), std::log(5.0));
    int violations = 0;
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const double m1 = mu(rng), m2 = mu(rng);
      const double s1 = std::exp(ls(rng)), s2 = std::exp(ls(rng));
      const double w2 = w2_gaussian(GaussianNd::scalar(m1, s1 * s1), GaussianNd::scalar(m2, s2 * s2));
      const double slack = 1e-12 * (1.0 + w2);
      if (std::abs(m1 - m2) > w2 + slack || std::abs(s1 - s2) > 2.0 * w2 + slack) ++violations;
      if (w2 > 0) worst = std::max(worst, std::max(std::abs(m1 - m2), std::abs(s1 - s2) / 2.0) / w2);
    }
    report(out, res, violations == 0, "w2-moments", fmt("500 pairs, %.0f violations, max ratio %.6f", violations, worst));
  }

  {
    // the inequality as stated, on covariances with spectrum in (0, 1]
    int violations = 0;
    double worst = 0.0;
    std::uniform_int_distribution<int> dim(1, 4);
    for (int i = 0; i < 100; ++i) {
      const Index d = dim(rng);
      const GaussianNd a = random_gaussian(d, 0.05, 1.0, 1.0, rng);
      const GaussianNd b = random_gaussian(d, 0.05, 1.0, 1.0, rng);
      const Prop3Check c = prop3_bound_check(a, b, 2.0);
      if (c.lhs > c.rhs * (1 + 1e-12)) ++violations;
      if (c.rhs > 0) worst = std::max(worst, c.lhs / c.rhs);
    }
    report(out, res, violations == 0, "fisher-w2/stated",
           fmt("100 triples, spectra in (0,1], %.0f violations, max lhs/rhs %.6f", violations, worst));
  }
  {
    // constant lambda_max(cov_b), spectra across four decades
    int violations = 0;
    double worst = 0.0;
    std::uniform_int_distribution<int> dim(1, 4);
    for (int i = 0; i < 100; ++i) {
      const Index d = dim(rng);
      const GaussianNd a = random_gaussian(d, 0.01, 100.0, 3.0, rng);
      const GaussianNd b = random_gaussian(d, 0.01, 100.0, 3.0, rng);
      const Prop3Check c = prop3_bound_check(a, b, 2.0);
      if (c.lhs > c.rhs_lambda_max * (1 + 1e-12)) ++violations;
      if (c.rhs_lambda_max > 0) worst = std::max(worst, c.lhs / c.rhs_lambda_max);
    }
    report(out, res, violations == 0, "fisher-w2/lambda-max",
           fmt("100 triples, spectra in [0.01,100], %.0f violations, max lhs/rhs %.6f", violations, worst));
  }

  {
    int mismatches = 0;
    double worst = 0.0;
    const double ts[] = {-1.5, 0.3, 2.0};
    const double tts[] = {-0.7, 0.3, 1.1};
    const double s2s[] = {1.0, 0.1, 0.01};
    for (double t : ts)
      for (double tt : tts)
        for (double s2 : s2s) {
          const Example1Forms f = example1_closed_forms(t, tt, s2, std::exp(-0.5));
          const double err = f.w2 == 0.0 ? std::abs(f.pf) : std::abs(f.pf - f.w2) / f.w2;
          worst = std::max(worst, err);
          if (err > 1e-10) ++mismatches;
        }
    report(out, res, mismatches == 0, "single-datum/pf-equals-w2",
           fmt("27 grid points, %.0f mismatches, max rel err %.3g", mismatches, worst));
    const double r1 = example1_closed_forms(1.0, 0.0, 1.0, 1.0).fisher_over_w2;
    const double r2 = example1_closed_forms(1.0, 0.0, 0.1, 1.0).fisher_over_w2;
    const double r3 = example1_closed_forms(1.0, 0.0, 0.01, 1.0).fisher_over_w2;
    const double e2 = std::abs(r2 / r1 - 11.0 / 2.0) / (11.0 / 2.0);
    const double e3 = std::abs(r3 / r1 - 101.0 / 2.0) / (101.0 / 2.0);
    report(out, res, e2 <= 1e-8 && e3 <= 1e-8, "single-datum/fisher-ratio",
           fmt("fisher/w2 = %.10g : %.10g : %.10g", r1, r2, r3));
  }

  {
    int negatives = 0;
    double self = 0.0;
    for (int i = 0; i < 200; ++i) {
      const Index d = 1 + i % 4;
      const GaussianNd a = random_gaussian(d, 0.1, 10.0, 1.0, rng);
      const GaussianNd b = random_gaussian(d, 0.1, 10.0, 1.0, rng);
      if (kl_gaussian(a, b) < 0.0) ++negatives;
      self = std::max(self, std::abs(kl_gaussian(a, a)));
    }
    report(out, res, negatives == 0 && self <= 1e-12, "kl-nonnegative",
           fmt("200 pairs, %.0f negative, max |KL(a,a)| %.3g", negatives, self));
  }
  out << res.passed << " passed, " << res.failed << " failed\n";
  return res;
}

double loglog_slope(const std::vector<Index>& n, const std::vector<double>& t) {
  if (n.size() != t.size() || n.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "loglog_slope needs at least two matched points");
  }
  const std::size_t k = n.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (n[i] <= 0 || !(t[i] > 0)) throw Error(ErrorCode::kInvalidArgument, "loglog_slope needs positive data");
    mx += std::log(static_cast<double>(n[i]));
    my += std::log(t[i]);
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(static_cast<double>(n[i])) - mx;
    sxy += dx * (std::log(t[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorCode::kInvalidArgument, "loglog_slope needs distinct N");
  return sxy / sxx;
}

BenchResult bench_scaling(const BenchConfig& config, std::uint64_t seed, std::ostream* log) {
  if (config.n_values.size() < 2 || config.m < 1 || config.aux_size < 1 || config.repeats < 1) {
    throw Error(ErrorCode::kConfigError, "bench needs >= 2 sizes, m >= 1, aux_size >= 1, repeats >= 1");
  }
  BenchResult res;
  const KernelParams p = KernelParams::isotropic(1, 0.5, 1.0, 0.05);
  for (Index n : config.n_values) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::normal_distribution<double> noise(0.0, std::sqrt(p.noise_variance));
    MatrixXd pts(n, 1);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
      pts(i, 0) = u(rng);
      y(i) = std::sin(2.0 * pts(i, 0)) + noise(rng);
    }
    const InputSet x(pts);
    const auto aux_rows = random_subset(n, std::min(config.aux_size, n), derive_seed(seed, 0xa0c5));
    const AuxiliaryDistribution aux = build_aux_sor(x, y, aux_rows, p);
    const auto ind = random_subset(n, std::min(config.m, n), derive_seed(seed, 0x1d));
    const InducingSet xt(x.subset(ind).points());
    std::vector<double> times;
    double sink = pf_dtc_evaluate(build_nystrom(x, xt, p), y, aux, p, true).terms.relative_objective;  // warm-up
    for (int r = 0; r < config.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const NystromCache cache = build_nystrom(x, xt, p);
      const PfEvaluation ev = pf_dtc_evaluate(cache, y, aux, p, true);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      sink += ev.terms.relative_objective + ev.gradient(0, 0);
    }
    std::sort(times.begin(), times.end());
    const double med = times[times.size() / 2];
    res.n_values.push_back(n);
    res.seconds.push_back(med);
    if (log) *log << "N=" << n << " median_seconds=" << med << (std::isfinite(sink) ? "" : " (non-finite)") << '\n';
  }
  res.slope = loglog_slope(res.n_values, res.seconds);
  if (log) *log << "log-log slope " << res.slope << '\n';
  return res;
}

}  // namespace pfgp
