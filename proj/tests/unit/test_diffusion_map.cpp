#include <doctest.h>

#include <cmath>
#include <random>

#include "snapdm/diffusion_map.hpp"
#include "snapdm/error.hpp"
#include "support/oracles.hpp"

using namespace snapdm;
using doctest::Approx;

namespace {

// Gaussian kernel of random points in R^3: positive definite, so every
// non-trivial eigenvalue of the Markov matrix is positive.
Eigen::MatrixXd random_kernel(std::mt19937_64& rng, Eigen::Index n, double eps = 1.0) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, 3);
  for (auto& v : x.reshaped()) v = g(rng);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = std::exp(-(x.row(i) - x.row(j)).squaredNorm() / eps);
  return k;
}

Eigen::VectorXd linear_parameters(Eigen::Index n) { return Eigen::VectorXd::LinSpaced(n, 0.0, 1.0); }

}  // namespace

TEST_SUITE("diffusion map") {
  TEST_CASE("alpha = 0 leaves the kernel unchanged") {
    std::mt19937_64 rng(1);
    const auto k = random_kernel(rng, 5);
    CHECK(normalize_kernel(k, 0.0) == k);
    CHECK_THROWS_AS(normalize_kernel(k, 1.5), Error);
    CHECK_THROWS_AS(normalize_kernel(k, -0.1), Error);
  }

  TEST_CASE("two points") {
    const double k = 0.3;
    Eigen::Matrix2d kernel;
    kernel << 1, k, k, 1;
    const auto normalized = normalize_kernel(kernel, 1.0);
    CHECK(normalized(0, 1) == Approx(k / ((1 + k) * (1 + k))));
    for (double alpha : {0.0, 0.5, 1.0}) {
      const auto emb = markov_and_eigs(normalize_kernel(kernel, alpha), 1, 1.0, Eigen::Vector2d(0, 1));
      REQUIRE(emb.dims() == 1);
      CHECK(emb.eigenvalues[0] == Approx((1 - k) / (1 + k)).epsilon(1e-12));
      CHECK(emb.coordinates(1, 0) > 0.0);
      CHECK(emb.coordinates(0, 0) == Approx(-emb.coordinates(1, 0)));
    }
  }

  TEST_CASE("eigenvalues of a 3-point chain match the cubic formula") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const auto k = random_kernel(rng, 3, 2.0);
      for (double alpha : {0.0, 1.0}) {
        const auto normalized = normalize_kernel(k, alpha);
        const Eigen::Vector3d d = normalized.rowwise().sum();
        const Eigen::Matrix3d s = d.cwiseSqrt().cwiseInverse().asDiagonal() * normalized *
                                  d.cwiseSqrt().cwiseInverse().asDiagonal();
        const auto roots = oracle::symmetric3_eigenvalues(s);
        CHECK(roots[2] == Approx(1.0).epsilon(1e-9));
        const auto emb = markov_and_eigs(normalized, 2, 1.0);
        REQUIRE(emb.dims() == 2);
        CHECK(emb.eigenvalues[0] == Approx(roots[1]).epsilon(1e-9));
        CHECK(emb.eigenvalues[1] == Approx(roots[0]).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("two well separated blocks") {
    Eigen::MatrixXd k = Eigen::MatrixXd::Constant(6, 6, 1e-6);
    k.topLeftCorner(3, 3).setOnes();
    k.bottomRightCorner(3, 3).setOnes();
    const auto emb = markov_and_eigs(normalize_kernel(k, 1.0), 1, 1.0, linear_parameters(6));
    CHECK(emb.eigenvalues[0] > 0.99999);
    for (int i = 0; i < 3; ++i) {
      CHECK(emb.coordinates(i, 0) < 0.0);
      CHECK(emb.coordinates(i + 3, 0) > 0.0);
      CHECK(emb.coordinates(i, 0) == Approx(emb.coordinates(0, 0)));
    }
  }

  TEST_CASE("diffusion time scales each coordinate by mu^t") {
    std::mt19937_64 rng(3);
    const auto normalized = normalize_kernel(random_kernel(rng, 8), 1.0);
    const auto e0 = markov_and_eigs(normalized, 3, 0.0, linear_parameters(8));
    const auto e2 = markov_and_eigs(normalized, 3, 2.0, linear_parameters(8));
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double mu = e0.eigenvalues[c];
      CHECK((e2.coordinates.col(c) - mu * mu * e0.coordinates.col(c)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(e0.coordinates.col(c).norm() == Approx(1.0));
    }
  }

  TEST_CASE("Markov and spectral invariants on random kernels") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
      const Eigen::Index n = 3 + trial % 10;
      const double alpha = (trial % 3) / 2.0;
      const auto normalized = normalize_kernel(random_kernel(rng, n), alpha);
      const auto p = markov_matrix(normalized);
      CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(p.minCoeff() >= 0.0);

      const auto emb = markov_and_eigs(normalized, static_cast<int>(n - 1), 1.0, linear_parameters(n));
      CHECK(emb.stationary.sum() == Approx(1.0));
      // pi is stationary: pi^T P = pi^T.
      CHECK((emb.stationary.transpose() * p - emb.stationary.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      for (Eigen::Index k = 0; k < emb.dims(); ++k) {
        CHECK(emb.eigenvalues[k] > 0.0);
        CHECK(emb.eigenvalues[k] < 1.0);
        if (k > 0) CHECK(emb.eigenvalues[k] <= emb.eigenvalues[k - 1]);
        // Right eigenvector of P, orthogonal to constants in L2(pi).
        const Eigen::VectorXd psi = emb.coordinates.col(k) / emb.eigenvalues[k];
        CHECK((p * psi - emb.eigenvalues[k] * psi).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(std::abs(emb.stationary.dot(psi)) < 1e-9);
        CHECK(psi.norm() == Approx(1.0));
        CHECK(psi.dot((linear_parameters(n).array() - 0.5).matrix()) >= -1e-12);
      }
    }
  }

  TEST_CASE("diffusion distance equals distance between diffusion coordinates") {
    std::mt19937_64 rng(5);
    for (Eigen::Index n = 3; n <= 8; ++n) {
      const auto normalized = normalize_kernel(random_kernel(rng, n), 1.0);
      const auto p = markov_matrix(normalized);
      for (int t : {1, 2}) {
        const auto emb = markov_and_eigs(normalized, static_cast<int>(n - 1), t);
        REQUIRE(emb.dims() == n - 1);
        const auto oracle_d = oracle::diffusion_distances(p, t, emb.stationary);
        const auto coords = emb.diffusion_coordinates();
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j)
            CHECK((coords.row(i) - coords.row(j)).squaredNorm() ==
                  Approx(oracle_d(i, j)).epsilon(1e-8).scale(1e-10));
      }
    }
  }

  TEST_CASE("relabelling points permutes the embedding") {
    std::mt19937_64 rng(6);
    const Eigen::Index n = 7;
    const auto k = random_kernel(rng, n);
    Eigen::VectorXd params(n);
    params << 0.1, 0.9, 0.4, 0.3, 0.7, 0.2, 0.5;
    const auto base = markov_and_eigs(normalize_kernel(k, 1.0), 3, 1.0, params);

    Eigen::VectorXi perm(n);
    perm << 4, 2, 6, 0, 5, 1, 3;
    Eigen::PermutationMatrix<Eigen::Dynamic> pm(perm);
    const Eigen::MatrixXd kp = pm.transpose() * k * pm;
    const Eigen::VectorXd pp = pm.transpose() * params;
    const auto moved = markov_and_eigs(normalize_kernel(kp, 1.0), 3, 1.0, pp);
    CHECK((moved.eigenvalues - base.eigenvalues).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((moved.coordinates - pm.transpose() * base.coordinates).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("orientation is deterministic") {
    std::mt19937_64 rng(7);
    const auto normalized = normalize_kernel(random_kernel(rng, 9), 1.0);
    const auto a = markov_and_eigs(normalized, 3, 1.0, linear_parameters(9));
    const auto b = markov_and_eigs(normalized, 3, 1.0, linear_parameters(9));
    CHECK(a.coordinates == b.coordinates);
    // Without parameters the largest-magnitude entry is positive.
    const auto c = markov_and_eigs(normalized, 3, 1.0);
    for (Eigen::Index k = 0; k < c.dims(); ++k) {
      Eigen::Index at = 0;
      c.coordinates.col(k).cwiseAbs().maxCoeff(&at);
      CHECK(c.coordinates(at, k) > 0.0);
    }
  }

  TEST_CASE("configuration and degenerate input errors") {
    std::mt19937_64 rng(8);
    const auto k = random_kernel(rng, 4);
    CHECK_THROWS_AS(markov_and_eigs(k, 0, 1.0), Error);
    CHECK_THROWS_AS(markov_and_eigs(k, 4, 1.0), Error);
    CHECK_THROWS_AS(markov_and_eigs(Eigen::MatrixXd::Ones(1, 1), 1, 1.0), Error);

    std::vector<std::int8_t> v{0, 1, 1, 0};
    SnapshotEnsemble e{0.0, "", {Snapshot(1, 4, v), Snapshot(1, 4, {1, 0, 0, 1}), Snapshot(1, 4, v)}};
    std::vector<SnapshotEnsemble> same;
    for (int i = 0; i < 4; ++i) {
      e.parameter = i;
      same.push_back(e);
    }
    try {
      embed_ensembles(same, {});
      FAIL("expected DegenerateKernel");
    } catch (const Error& err) {
      CHECK(err.kind() == ErrorKind::DegenerateKernel);
    }
  }
}
