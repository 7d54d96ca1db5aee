#include <doctest.h>

#include <cmath>

#include "pfgp/error.hpp"
#include "pfgp/psd_linalg.hpp"
#include "pfgp/random.hpp"

using namespace pfgp;

namespace {

MatrixXd random_spd(Index n, Rng& rng, double ridge = 0.5) {
  const MatrixXd w = standard_normal(n + 3, n, rng);
  MatrixXd a = w.transpose() * w;
  a.diagonal().array() += ridge;
  return symmetrize(a);
}

MatrixXd reconstruct(const CholFactor& f) { return f.lower * f.lower.transpose(); }

}  // namespace

TEST_SUITE("psd_linalg") {
  TEST_CASE("identity factors to itself") {
    const CholFactor f = chol_psd(MatrixXd::Identity(3, 3));
    CHECK(f.jitter_used == 0.0);
    CHECK((f.lower - MatrixXd::Identity(3, 3)).norm() == 0.0);
  }

  TEST_CASE("2x2 factor by hand") {
    MatrixXd a(2, 2);
    a << 4, 2, 2, 3;
    const CholFactor f = chol_psd(a);
    CHECK(f.lower(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.lower(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.lower(0, 1) == 0.0);
    CHECK(f.lower(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK((reconstruct(f) - a).norm() < 1e-12);
  }

  TEST_CASE("rank one input needs jitter") {
    MatrixXd a = MatrixXd::Ones(2, 2);
    const CholFactor f = chol_psd(a);
    CHECK(f.jitter_used > 0.0);
    CHECK(f.jitter_used <= 1e-4);
    MatrixXd shifted = a;
    shifted.diagonal().array() += f.jitter_used;
    CHECK((reconstruct(f) - shifted).norm() < 1e-12);
    CHECK(f.lower.diagonal().minCoeff() > 0.0);
  }

  TEST_CASE("errors") {
    MatrixXd asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(chol_psd(asym), Error);
    try {
      chol_psd(asym);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNotSymmetric);
    }
    MatrixXd indef(2, 2);
    indef << 1, 0, 0, -1;
    try {
      chol_psd(indef);
      FAIL("expected JitterCapExceeded");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kJitterCapExceeded);
    }
    const CholFactor f = chol_psd(MatrixXd::Identity(3, 3));
    try {
      solve_psd(f, MatrixXd(MatrixXd::Ones(2, 1)));
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
    try {
      trace_product(MatrixXd::Ones(2, 3), MatrixXd::Ones(2, 3));
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDimensionMismatch);
    }
  }

  TEST_CASE("solves") {
    MatrixXd b = MatrixXd::Random(3, 2);
    CHECK((solve_psd(chol_psd(MatrixXd::Identity(3, 3)), b) - b).norm() == 0.0);

    MatrixXd a(2, 2);
    a << 4, 2, 2, 3;
    VectorXd rhs(2);
    rhs << 1, 0;
    const VectorXd x = solve_psd(chol_psd(a), rhs);
    CHECK(x(0) == doctest::Approx(3.0 / 8.0).epsilon(1e-14));
    CHECK(x(1) == doctest::Approx(-0.25).epsilon(1e-14));

    MatrixXd d = MatrixXd::Zero(2, 2);
    d.diagonal() << 2, 5;
    const MatrixXd inv = solve_psd(chol_psd(d), MatrixXd(MatrixXd::Identity(2, 2)));
    CHECK(inv(0, 0) == doctest::Approx(0.5));
    CHECK(inv(1, 1) == doctest::Approx(0.2));
    CHECK(inv(0, 1) == 0.0);
  }

  TEST_CASE("solve round trip on random SPD matrices") {
    Rng rng(11);
    for (Index n : {1, 2, 5, 17, 50}) {
      const MatrixXd a = random_spd(n, rng);
      const MatrixXd x0 = standard_normal(n, 3, rng);
      const CholFactor f = chol_psd(a);
      CHECK((reconstruct(f) - a).norm() / a.norm() < 1e-10);
      const MatrixXd x = solve_psd(f, MatrixXd(a * x0));
      CHECK((x - x0).norm() / x0.norm() < 1e-8);
      CHECK((inverse_psd(f) * a - MatrixXd::Identity(n, n)).norm() < 1e-8);
      const MatrixXd lx = solve_lower(f, a);
      CHECK((f.lower * lx - a).norm() / a.norm() < 1e-10);
      CHECK(log_det(f) == doctest::Approx(std::log(a.determinant())).epsilon(1e-8));
    }
  }

  TEST_CASE("trace product") {
    CHECK(trace_product(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)) == 2.0);
    MatrixXd a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 0, 1, 1, 0;
    CHECK(trace_product(a, b) == 5.0);
    CHECK(trace_product(MatrixXd::Random(4, 3), MatrixXd::Zero(3, 4)) == 0.0);
    Rng rng(3);
    std::uniform_int_distribution<int> u(-5, 5);
    for (int rep = 0; rep < 20; ++rep) {
      MatrixXd p(4, 6), q(6, 4);
      for (Index i = 0; i < p.size(); ++i) p(i) = u(rng);
      for (Index i = 0; i < q.size(); ++i) q(i) = u(rng);
      CHECK(trace_product(p, q) == (p * q).trace());
    }
  }

  TEST_CASE("matrix square root") {
    MatrixXd d = MatrixXd::Zero(2, 2);
    d.diagonal() << 4, 9;
    const MatrixXd s = sqrtm_psd(d);
    CHECK(s(0, 0) == doctest::Approx(2.0));
    CHECK(s(1, 1) == doctest::Approx(3.0));
    CHECK(std::abs(s(0, 1)) < 1e-14);
    CHECK((sqrtm_psd(MatrixXd::Identity(3, 3)) - MatrixXd::Identity(3, 3)).norm() < 1e-14);
    Rng rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      const MatrixXd w = standard_normal(3, 3, rng);
      const MatrixXd a = symmetrize(w.transpose() * w);
      const MatrixXd r = sqrtm_psd(a);
      CHECK((r * r - a).norm() / a.norm() < 1e-8);
      CHECK((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, r.norm()));
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * a.norm());
    }
    MatrixXd asym(2, 2);
    asym << 1, 2, 0, 1;
    CHECK_THROWS_AS(sqrtm_psd(asym), Error);
  }
}

TEST_CASE("ill-conditioned inputs that plain LLT accepts get jitter") {
  // rank-deficient Gram matrix that plain LLT accepts with a noise-sized pivot
  MatrixXd v(3, 2);
  v << 0.68037543430941905, 0.59688006695214657, -0.21123414636181392, 0.82329471587356862, 0.56619844751721171,
      -0.60489726141323208;
  const MatrixXd vvt = v * v.transpose();
  const MatrixXd a = 0.5 * (vvt + vvt.transpose());
  REQUIRE(Eigen::LLT<MatrixXd>(a).info() == Eigen::Success);
  const CholFactor f = chol_psd(a);
  CHECK(f.jitter_used > 0.0);
  const MatrixXd rec = f.lower * f.lower.transpose();
  CHECK((rec - a - f.jitter_used * MatrixXd::Identity(3, 3)).norm() <= 1e-10 * a.norm());
  CHECK(f.lower.diagonal().minCoeff() * f.lower.diagonal().minCoeff() >= 0.5 * f.jitter_used);
}

TEST_CASE("near-duplicate kernel inputs get jitter despite healthy pivots") {
  Rng rng(21);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  VectorXd t(20);
  for (Index i = 0; i < 20; ++i) t(i) = u(rng);
  t(19) = t(18) + 7e-5;
  MatrixXd k(20, 20);
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 20; ++j) k(i, j) = std::exp(-0.5 * std::pow((t(i) - t(j)) / 0.31, 2));
  const CholFactor f = chol_psd(k);
  CHECK(f.jitter_used > 0.0);
  // solves stay accurate on the regularized system
  const MatrixXd b = MatrixXd::Ones(20, 1);
  MatrixXd shifted = k;
  shifted.diagonal().array() += f.jitter_used;
  CHECK((shifted * solve_psd(f, b) - b).norm() < 1e-4);
}
