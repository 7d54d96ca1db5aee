#include <doctest.h>

#include <cmath>

#include "pfgp/error.hpp"
#include "pfgp/optimizer.hpp"
#include "pfgp/pf_objective.hpp"
#include "test_util.hpp"

using namespace pfgp;
using namespace pfgp::testing;

namespace {

struct Instance {
  InputSet x;
  VectorXd y;
  KernelParams p;
};

Instance make_instance(Index n, Index d, std::uint64_t seed) {
  Rng rng(seed);
  Instance in{InputSet(uniform_points(n, d, -2.0, 2.0, rng)), VectorXd(), random_params(d, rng)};
  in.y = noisy_targets(in.x.points(), rng);
  return in;
}

AuxiliaryDistribution make_aux(const Instance& in, AuxKind kind, Index m_aux, std::uint64_t seed) {
  const auto rows = random_subset(in.x.size(), m_aux, seed);
  return kind == AuxKind::kSubsetOfData ? build_aux_subset(in.x, in.y, rows, in.p)
                                        : build_aux_sor(in.x, in.y, rows, in.p);
}

double relative(const Instance& in, const AuxiliaryDistribution& aux, const MatrixXd& xt) {
  return pf_dtc_objective(build_nystrom(in.x, InducingSet(xt), in.p), in.y, aux, in.p).relative_objective;
}

// Dense N x N reference of Khat for the aux structure, straight from its definition.
MatrixXd dense_khat(const Instance& in, const AuxiliaryDistribution& aux) {
  const MatrixXd& x = in.x.points();
  const MatrixXd xh = aux.aux_points();
  const MatrixXd kxh = detail::kernel_cross(x, xh, in.p);
  const MatrixXd khh = detail::kernel_self(xh, in.p);
  if (aux.kind() == AuxKind::kSubsetOfData) {
    MatrixXd c = khh;
    c.diagonal().array() += in.p.noise_variance;
    return detail::kernel_self(x, in.p) - kxh * c.inverse() * kxh.transpose();
  }
  const MatrixXd g = khh + kxh.transpose() * kxh / in.p.noise_variance;
  return kxh * g.inverse() * kxh.transpose();
}

}  // namespace

TEST_CASE("aux subset mean matches the explicit solve") {
  const Instance in = make_instance(30, 2, 11);
  const auto aux = make_aux(in, AuxKind::kSubsetOfData, 8, 3);
  MatrixXd c = detail::kernel_self(aux.aux_points(), in.p);
  c.diagonal().array() += in.p.noise_variance;
  const VectorXd ref = detail::kernel_cross(in.x.points(), aux.aux_points(), in.p) * c.inverse() * aux.aux_targets();
  CHECK((aux.mu_x() - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("aux with a single point uses the scalar formula") {
  const Instance in = make_instance(12, 1, 5);
  const auto aux = build_aux_subset(in.x, in.y, {4}, in.p);
  const double xh = in.x.points()(4, 0);
  for (Index i = 0; i < in.x.size(); ++i) {
    const double r = in.x.points()(i, 0) - xh;
    const double k = in.p.signal_variance * std::exp(-0.5 * r * r / (in.p.lengthscales(0) * in.p.lengthscales(0)));
    CHECK(aux.mu_x()(i) == doctest::Approx(k * in.y(4) / (in.p.signal_variance + in.p.noise_variance)).epsilon(1e-12));
  }
  const auto sor = build_aux_sor(in.x, in.y, {4}, in.p);
  const MatrixXd kxh = detail::kernel_cross(in.x.points(), sor.aux_points(), in.p);
  const double g = in.p.signal_variance + kxh.squaredNorm() / in.p.noise_variance;
  const MatrixXd ref = kxh * kxh.transpose() / g;
  CHECK((sor.dense_cov_train() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aux mean vanishes for zero targets") {
  Instance in = make_instance(15, 2, 6);
  in.y.setZero();
  for (AuxKind k : {AuxKind::kSubsetOfData, AuxKind::kSorLowRank}) {
    const auto aux = make_aux(in, k, 5, 1);
    CHECK(aux.mu_x().cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("aux over every row reproduces the exact posterior") {
  const Instance in = make_instance(25, 2, 8);
  const GaussianPosterior exact = predict_exact(fit_exact(in.x, in.y, in.p), in.x);
  const auto sub = build_aux_subset(in.x, in.y, all_rows(25), in.p);
  const auto sor = build_aux_sor(in.x, in.y, all_rows(25), in.p);
  CHECK((sub.mu_x() - exact.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sor.mu_x() - exact.mean).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sub.dense_cov_train() - exact.cov).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sor.dense_cov_train() - exact.cov).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("structured Khat products agree with the dense matrix") {
  for (AuxKind k : {AuxKind::kSubsetOfData, AuxKind::kSorLowRank}) {
    const Instance in = make_instance(150, 3, 21);
    const auto aux = make_aux(in, k, 15, 2);
    Rng rng(4);
    const MatrixXd v = standard_normal(150, 6, rng);
    const MatrixXd dense = dense_khat(in, aux);
    CHECK((aux.cov_times(v) - dense * v).cwiseAbs().maxCoeff() < 1e-8);
    const MatrixXd xt = in.x.points().topRows(5);
    CHECK((aux.cov_train_cross(xt) - dense.leftCols(5)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((aux.cov_cross(xt, xt) - dense.topLeftCorner(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("aux builders reject bad subsets") {
  const Instance in = make_instance(10, 1, 1);
  CHECK_THROWS_AS(build_aux_sor(in.x, in.y, {0, 10}, in.p), Error);
  try {
    build_aux_subset(in.x, in.y, {11}, in.p);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIndexOutOfRange);
  }
  try {
    build_aux_subset(in.x, in.y, {1, 2}, in.p, 5);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidationModeRequired);
  }
}

TEST_CASE("relative objective differences match the dense formula") {
  for (AuxKind k : {AuxKind::kSubsetOfData, AuxKind::kSorLowRank}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Instance in = make_instance(20, 2, 100 + s);
      const auto aux = make_aux(in, k, 6, s);
      Rng rng(s + 7);
      const MatrixXd x1 = uniform_points(4, 2, -2.0, 2.0, rng);
      const MatrixXd x2 = uniform_points(4, 2, -2.0, 2.0, rng);
      const double d_rel = relative(in, aux, x1) - relative(in, aux, x2);
      const double d_full = pf_dtc_objective_full(in.x, in.y, InducingSet(x1), aux, in.p) -
                            pf_dtc_objective_full(in.x, in.y, InducingSet(x2), aux, in.p);
      CHECK(std::abs(d_rel - d_full) <= 1e-8 * std::max(1.0, std::abs(d_full)));
    }
  }
}

TEST_CASE("relative objective plus the constant equals the dense formula") {
  for (AuxKind k : {AuxKind::kSubsetOfData, AuxKind::kSorLowRank}) {
    const Instance in = make_instance(30, 2, 77);
    const auto aux = make_aux(in, k, 8, 1);
    Rng rng(3);
    const MatrixXd xt = uniform_points(5, 2, -2.0, 2.0, rng);
    const double full = pf_dtc_objective_full(in.x, in.y, InducingSet(xt), aux, in.p);
    CHECK(relative(in, aux, xt) + pf_constant_term(in.y, aux, in.p) == doctest::Approx(full).epsilon(1e-9));
  }
}

TEST_CASE("terms respect their sign constraints") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Instance in = make_instance(40, 2, 300 + s);
    const auto aux = make_aux(in, AuxKind::kSorLowRank, 10, s);
    Rng rng(s);
    const PfTerms t = pf_dtc_objective(build_nystrom(in.x, InducingSet(uniform_points(6, 2, -2, 2, rng)), in.p),
                                       in.y, aux, in.p);
    CHECK(t.term_III >= -1e-10);
    CHECK(t.term_IIa + t.term_IIb >= -1e-8 * (std::abs(t.term_IIa) + 1.0));
    CHECK(t.relative_objective == doctest::Approx(t.term_I + t.term_IIa + t.term_IIb + t.term_III));
  }
}

TEST_CASE("full objective vanishes when inducing points equal the data") {
  for (AuxKind k : {AuxKind::kSubsetOfData, AuxKind::kSorLowRank}) {
    for (Index n : {5, 20, 50}) {
      const Instance in = make_instance(n, 2, 500 + static_cast<std::uint64_t>(n));
      const auto aux = make_aux(in, k, std::max<Index>(2, n / 5), 9);
      CHECK(std::abs(pf_dtc_objective_full(in.x, in.y, InducingSet(in.x.points()), aux, in.p)) < 1e-8);
    }
  }
}

TEST_CASE("single datum at the origin has zero divergence") {
  const InputSet x(MatrixXd::Zero(1, 1));
  VectorXd y(1);
  y << 0.7;
  const KernelParams p = KernelParams::isotropic(1, 1.0, 1.0, 0.3);
  const auto aux = build_aux_subset(x, y, {0}, p);
  CHECK(std::abs(pf_dtc_objective_full(x, y, InducingSet(MatrixXd::Zero(1, 1)), aux, p)) < 1e-12);
}

TEST_CASE("moving inducing points off the data increases the full objective") {
  const Instance in = make_instance(10, 1, 42);
  const auto aux = make_aux(in, AuxKind::kSubsetOfData, 4, 1);
  const double at_data = pf_dtc_objective_full(in.x, in.y, InducingSet(in.x.points()), aux, in.p);
  for (double shift : {0.05, 0.2, 0.5}) {
    MatrixXd moved = in.x.points();
    moved(3, 0) += shift;
    CHECK(pf_dtc_objective_full(in.x, in.y, InducingSet(moved), aux, in.p) > at_data);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  double worst = 0.0;
  for (AuxKind k : {AuxKind::kSubsetOfData, AuxKind::kSorLowRank}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const Instance in = make_instance(15, 2, 900 + s);
      const auto aux = make_aux(in, k, 5, s);
      Rng rng(s + 1);
      const MatrixXd xt = uniform_points(3, 2, -2.0, 2.0, rng);
      const MatrixXd g = pf_dtc_gradient(build_nystrom(in.x, InducingSet(xt), in.p), in.y, aux, in.p);
      const MatrixXd fd = finite_diff_gradient(
          [&](const MatrixXd& z) { return relative(in, aux, z); }, xt, 1e-5 * in.p.lengthscales.minCoeff());
      const double err = (g - fd).cwiseAbs().maxCoeff() / std::max(1e-3, fd.cwiseAbs().maxCoeff());
      worst = std::max(worst, err);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("gradient vanishes when inducing points equal the data") {
  const Instance in = make_instance(8, 1, 17);
  const auto aux = make_aux(in, AuxKind::kSubsetOfData, 3, 2);
  const MatrixXd g = pf_dtc_gradient(build_nystrom(in.x, InducingSet(in.x.points()), in.p), in.y, aux, in.p);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("duplicated inducing points give a finite gradient") {
  const Instance in = make_instance(12, 2, 23);
  const auto aux = make_aux(in, AuxKind::kSorLowRank, 4, 2);
  MatrixXd xt = in.x.points().topRows(3);
  xt.row(2) = xt.row(1);
  const MatrixXd g = pf_dtc_gradient(build_nystrom(in.x, InducingSet(xt), in.p), in.y, aux, in.p);
  CHECK(g.allFinite());
}

TEST_CASE("eps bound reduces to the divergence when the aux keeps every row") {
  const Instance in = make_instance(20, 1, 31);
  const auto aux = build_aux_subset(in.x, in.y, all_rows(20), in.p);
  const EpsBound b = eps_bound(in.x, in.y, aux, in.p, 0.37);
  CHECK(b.log_density_ratio_bound == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(b.eps == doctest::Approx(0.37).epsilon(1e-8));
  CHECK(eps_bound(in.x, in.y, aux, in.p, 0.0).eps == 0.0);
}

TEST_CASE("eps bound factor is at least one when the aux drops rows") {
  const Instance in = make_instance(30, 1, 32);
  const auto aux = make_aux(in, AuxKind::kSubsetOfData, 6, 3);
  Rng rng(2);
  const MatrixXd xt = uniform_points(4, 1, -2.0, 2.0, rng);
  const double pf = pf_divergence_from_scaled(pf_dtc_objective_full(in.x, in.y, InducingSet(xt), aux, in.p),
                                              in.p.noise_variance);
  const EpsBound b = eps_bound(in.x, in.y, aux, in.p, pf);
  CHECK(std::isfinite(b.eps));
  CHECK(b.eps > 0.0);
  CHECK(b.log_density_ratio_bound >= 0.0);
  CHECK_THROWS_AS(eps_bound(in.x, in.y, make_aux(in, AuxKind::kSorLowRank, 6, 3), in.p, pf), Error);
}

TEST_CASE("pointwise bounds") {
  VectorXd k = VectorXd::Ones(3);
  VectorXd under = VectorXd::Constant(3, 0.5);
  const PointwiseBounds zero = pointwise_bounds(0.0, k, under);
  CHECK(zero.mean_bound.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.var_bound.cwiseAbs().maxCoeff() == 0.0);
  const PointwiseBounds one = pointwise_bounds(1.0, k, under);
  CHECK(one.mean_bound(0) == doctest::Approx(1.0));
  CHECK(one.std_bound(0) == doctest::Approx(2.449).epsilon(1e-3));
  CHECK(one.var_bound(0) == doctest::Approx(8.121).epsilon(1e-3));
  const PointwiseBounds two = pointwise_bounds(2.0, k, under);
  CHECK(two.mean_bound(1) == 2.0 * one.mean_bound(1));
  CHECK(two.std_bound(1) == 2.0 * one.std_bound(1));
  const double lin = 3.0 * std::sqrt(0.5);
  CHECK(two.var_bound(2) == doctest::Approx(2.0 * lin + 4.0 * 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(pointwise_bounds(-1e-3, k, under), Error);
}

TEST_CASE("importance estimate is zero when inducing points equal the data") {
  const Instance in = make_instance(8, 1, 51);
  const auto aux = make_aux(in, AuxKind::kSubsetOfData, 4, 1);
  const ImportanceEstimate est = eps_importance_estimate(in.x, in.y, InducingSet(in.x.points()), aux, in.p, 2000, 3);
  CHECK(std::abs(est.scaled_squared) < 1e-8);
  CHECK(est.std_error < 1e-8);
}

TEST_CASE("importance estimate matches the dense formula under the exact posterior") {
  const Instance in = make_instance(10, 1, 52);
  const auto aux = build_aux_subset(in.x, in.y, all_rows(10), in.p);
  Rng rng(9);
  const MatrixXd xt = uniform_points(3, 1, -2.0, 2.0, rng);
  const double full = pf_dtc_objective_full(in.x, in.y, InducingSet(xt), aux, in.p);
  const ImportanceEstimate est = eps_importance_estimate(in.x, in.y, InducingSet(xt), aux, in.p, 100000, 4);
  CHECK(est.scaled_squared >= -3.0 * est.std_error);
  CHECK(std::abs(est.scaled_squared - full) / full < 0.05);
}
