#include <doctest.h>

#include <cmath>

#include "pfgp/error.hpp"
#include "pfgp/kernels.hpp"
#include "pfgp/psd_linalg.hpp"
#include "test_util.hpp"

using namespace pfgp;
using namespace pfgp::testing;

TEST_SUITE("kernels") {
  TEST_CASE("unit values") {
    const KernelParams p = KernelParams::isotropic(1, 1.0, 1.0, 1.0);
    const InputSet zero(MatrixXd::Zero(1, 1));
    CHECK(kernel_matrix(zero, zero, p)(0, 0) == 1.0);
    const InputSet one(MatrixXd::Ones(1, 1));
    CHECK(kernel_matrix(zero, one, p)(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
    CHECK(kernel_matrix(zero, one, p)(0, 0) == doctest::Approx(0.60653).epsilon(1e-5));
  }

  TEST_CASE("ARD formula against a direct loop") {
    Rng rng(2);
    KernelParams p;
    p.lengthscales = VectorXd(3);
    p.lengthscales << 0.5, 1.5, 3.0;
    p.signal_variance = 1.7;
    p.noise_variance = 0.1;
    const MatrixXd a = uniform_points(5, 3, -2, 2, rng);
    const MatrixXd b = uniform_points(4, 3, -2, 2, rng);
    const MatrixXd k = kernel_matrix(InputSet(a), InputSet(b), p);
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 4; ++j) {
        double s = 0;
        for (Index c = 0; c < 3; ++c) s += std::pow((a(i, c) - b(j, c)) / p.lengthscales(c), 2);
        CHECK(k(i, j) == doctest::Approx(1.7 * std::exp(-0.5 * s)).epsilon(1e-13));
      }
  }

  TEST_CASE("long lengthscale gives a constant kernel") {
    const KernelParams p = KernelParams::isotropic(2, 1e8, 2.0, 1.0);
    Rng rng(1);
    const InputSet a(uniform_points(6, 2, -5, 5, rng));
    const MatrixXd k = kernel_matrix(a, a, p);
    CHECK((k.array() - 2.0).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("diagonal") {
    Rng rng(4);
    const InputSet a(uniform_points(7, 2, -1, 1, rng));
    CHECK((kernel_diag(a, KernelParams::isotropic(2, 0.7, 1.0, 1.0)).array() == 1.0).all());
    const KernelParams p = KernelParams::isotropic(2, 0.7, 2.5, 1.0);
    CHECK((kernel_diag(a, p).array() == 2.5).all());
    CHECK((kernel_diag(a, p) - kernel_matrix(a, a, p).diagonal()).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("symmetry, PSD and stationarity") {
    Rng rng(9);
    for (int rep = 0; rep < 5; ++rep) {
      const KernelParams p = random_params(3, rng);
      const MatrixXd pa = uniform_points(200, 3, -3, 3, rng);
      const MatrixXd pb = uniform_points(30, 3, -3, 3, rng);
      const InputSet a(pa), b(pb);
      const MatrixXd kaa = kernel_matrix(a, a, p);
      CHECK((kaa - kaa.transpose()).norm() == 0.0);
      const CholFactor f = chol_psd(kaa, JitterPolicy{1e-10, 1e-6, 10.0, 1e-12});
      CHECK(f.jitter_used <= 1e-6 * p.signal_variance);
      const MatrixXd kab = kernel_matrix(a, b, p);
      CHECK((kab - MatrixXd(kernel_matrix(b, a, p).transpose())).norm() == 0.0);
      const Eigen::RowVectorXd shift = Eigen::RowVectorXd::Random(3) * 4.0;
      const MatrixXd shifted = kernel_matrix(InputSet(pa.rowwise() + shift), InputSet(pb.rowwise() + shift), p);
      CHECK((shifted - kab).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("validation") {
    const KernelParams p = KernelParams::isotropic(2, 1.0, 1.0, 1.0);
    const InputSet one_d(MatrixXd::Zero(3, 1));
    CHECK_THROWS_AS(kernel_matrix(one_d, one_d, p), Error);
    MatrixXd bad = MatrixXd::Zero(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(InputSet{bad}, Error);
    KernelParams q = p;
    q.lengthscales(0) = -1.0;
    CHECK_THROWS_AS(q.validate(), Error);
    q = p;
    q.noise_variance = 0.0;
    CHECK_THROWS_AS(q.validate(), Error);
    CHECK_THROWS_AS(InputSet(MatrixXd::Zero(3, 2)).subset({0, 3}), Error);
  }
}
