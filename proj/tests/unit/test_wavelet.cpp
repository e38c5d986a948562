#include <doctest.h>

#include <cmath>
#include <random>

#include "snapdm/error.hpp"
#include "snapdm/wavelet.hpp"
#include "support/oracles.hpp"

using namespace snapdm;
using doctest::Approx;

namespace {

Eigen::VectorXd random_grid(std::mt19937_64& rng, Eigen::Index size) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(size);
  for (auto& x : v) x = g(rng);
  return v;
}

WaveletLayout layout_for(std::uint32_t rows, std::uint32_t cols, WaveletConfig cfg = {}) {
  return resolve_layout(rows, cols, cfg);
}

// Zero-padded copy of a rows x cols grid inside its layout.
Eigen::VectorXd padded(const Eigen::VectorXd& grid, std::uint32_t rows, std::uint32_t cols, const WaveletLayout& l) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l.coefficient_count()));
  const auto n = static_cast<Eigen::Index>(l.padded_side);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      out[(l.spatial_dim == 1 ? 0 : r * n) + c] = grid[r * cols + c];
  return out;
}

double weighted_l1(const Eigen::VectorXd& u, const Eigen::VectorXd& v, std::uint32_t rows, std::uint32_t cols,
                   const WaveletLayout& l) {
  return apply_weights(haar_transform(u, rows, cols, l) - haar_transform(v, rows, cols, l), l).lpNorm<1>();
}

}  // namespace

TEST_SUITE("wavelet") {
  TEST_CASE("constant 1D signal has a single approximation coefficient") {
    const auto l = layout_for(1, 8);
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(8, 0.75);
    const auto t = haar_transform(v, 1, 8, l);
    CHECK(t[0] == Approx(0.75 * std::sqrt(8.0)).epsilon(1e-14));
    for (Eigen::Index i = 1; i < 8; ++i) CHECK(std::abs(t[i]) < 1e-15);
  }

  TEST_CASE("four-point delta matches the hand-applied Haar matrix") {
    const auto l = layout_for(1, 4);
    const auto t = haar_transform(Eigen::Vector4d(1, 0, 0, 0), 1, 4, l);
    CHECK(t[0] == Approx(0.5).epsilon(1e-15));
    CHECK(t[1] == Approx(0.5).epsilon(1e-15));
    CHECK(t[2] == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(t[3] == 0.0);
  }

  TEST_CASE("2D 4x4 transform equals the explicit 16x16 matrix") {
    const auto l = layout_for(4, 4);
    REQUIRE(l.depth == 2);
    const Eigen::MatrixXd oracle = oracle::haar2d_matrix(4, 2);
    for (int j = 0; j < 16; ++j) {
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(16);
      delta[j] = 1.0;
      CHECK((haar_transform(delta, 4, 4, l) - oracle.col(j)).cwiseAbs().maxCoeff() < 1e-14);
    }
    // The same holds for a partial-depth 8x8 transform.
    WaveletConfig partial;
    partial.levels = 2;
    const auto l8 = layout_for(8, 8, partial);
    const Eigen::MatrixXd oracle8 = oracle::haar2d_matrix(8, 2);
    std::mt19937_64 rng(4);
    const auto g = random_grid(rng, 64);
    CHECK((haar_transform(g, 8, 8, l8) - oracle8 * g).cwiseAbs().maxCoeff() < 1e-13);
  }

  TEST_CASE("Parseval and linearity on random grids up to 64x64") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> dim(1, 64);
    for (int trial = 0; trial < 40; ++trial) {
      const auto rows = trial % 5 == 0 ? 1u : static_cast<std::uint32_t>(dim(rng));
      const auto cols = static_cast<std::uint32_t>(dim(rng));
      const auto l = layout_for(rows, cols);
      const auto u = random_grid(rng, rows * cols);
      const auto v = random_grid(rng, rows * cols);
      const auto tu = haar_transform(u, rows, cols, l);
      CHECK(std::abs(tu.norm() - padded(u, rows, cols, l).norm()) < 1e-12 * std::max(1.0, u.norm()));
      const double a = 1.7, b = -0.4;
      const Eigen::VectorXd lhs = haar_transform(a * u + b * v, rows, cols, l);
      const Eigen::VectorXd rhs = a * tu + b * haar_transform(v, rows, cols, l);
      CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("non-dyadic grids are zero-padded top-left") {
    const auto l = layout_for(3, 5);
    CHECK(l.padded_side == 8);
    CHECK(l.spatial_dim == 2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(15);
    const auto t = haar_transform(ones, 3, 5, l);
    CHECK(t[0] == Approx(15.0 / 8.0).epsilon(1e-14));  // sum / sqrt(64)
  }

  TEST_CASE("level weights") {
    WaveletConfig cfg;
    const auto l = layout_for(1, 4, cfg);
    REQUIRE(l.depth == 2);
    // Finest detail at depth 2 in 1D: 2^(-2 * 1.5).
    Eigen::VectorXd c = Eigen::VectorXd::Zero(4);
    c[3] = 1.0;
    CHECK(apply_weights(c, l)[3] == Approx(std::pow(2.0, -3.0)).epsilon(1e-15));
    c.setZero();
    c[1] = 1.0;  // coarsest detail, level 1
    CHECK(apply_weights(c, l)[1] == Approx(std::pow(2.0, -1.5)).epsilon(1e-15));
    c.setZero();
    c[0] = 2.0;  // approximation untouched
    CHECK(apply_weights(c, l)[0] == 2.0);

    cfg.weight_exponent = 0.0;
    const auto flat = layout_for(1, 4, cfg);
    const Eigen::Vector4d x(0.3, -1.0, 2.0, 5.5);
    CHECK(apply_weights(x, flat) == x);
    CHECK(apply_weights(Eigen::VectorXd::Zero(4), l) == Eigen::VectorXd::Zero(4));

    const auto l2 = layout_for(4, 4);
    CHECK(l2.exponent == 2.0);
    CHECK(l2.level_weight(0) == Approx(std::pow(2.0, -4.0)));
  }

  TEST_CASE("configuration errors") {
    WaveletConfig cfg;
    cfg.levels = 4;
    CHECK_THROWS_AS(resolve_layout(1, 8, cfg), Error);  // log2(8) = 3
    cfg.levels = std::nullopt;
    cfg.spatial_dim = 1;
    CHECK_THROWS_AS(resolve_layout(4, 4, cfg), Error);
    const auto l = layout_for(1, 8);
    CHECK_THROWS_AS(apply_weights(Eigen::VectorXd::Zero(5), l), Error);
  }

  TEST_CASE("weighted l1 distance is a metric") {
    std::mt19937_64 rng(23);
    std::bernoulli_distribution coin(0.5);
    for (int trial = 0; trial < 200; ++trial) {
      const std::uint32_t rows = trial % 2 ? 1 : 6, cols = 6;
      const auto l = layout_for(rows, cols);
      Eigen::VectorXd u(rows * cols), v(rows * cols), w(rows * cols);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        u[i] = coin(rng);
        v[i] = coin(rng);
        w[i] = coin(rng);
      }
      const double uv = weighted_l1(u, v, rows, cols, l);
      const double vu = weighted_l1(v, u, rows, cols, l);
      const double uw = weighted_l1(u, w, rows, cols, l);
      const double wv = weighted_l1(w, v, rows, cols, l);
      CHECK(uv >= 0.0);
      CHECK(uv == Approx(vu).epsilon(1e-14));
      CHECK(uv <= uw + wv + 1e-12);
      CHECK(weighted_l1(u, u, rows, cols, l) == 0.0);
      if (u != v) CHECK(uv > 0.0);
    }
  }

  TEST_CASE("weighted l1 grows with transport distance") {
    const auto l = layout_for(1, 32);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(32);
    a[0] = 1.0;
    double previous = 0.0;
    for (int k = 1; k <= 16; ++k) {
      Eigen::VectorXd b = Eigen::VectorXd::Zero(32);
      b[k] = 1.0;
      const double d = weighted_l1(a, b, 1, 32, l);
      CHECK(d >= previous - 1e-15);
      previous = d;
    }
  }

  TEST_CASE("preprocess bypass and determinism") {
    std::mt19937_64 rng(2);
    std::bernoulli_distribution coin(0.5);
    SnapshotEnsemble e{1.0, "", {}};
    for (int k = 0; k < 5; ++k) {
      std::vector<std::int8_t> v(12);
      for (auto& x : v) x = static_cast<std::int8_t>(coin(rng));
      e.snapshots.emplace_back(3, 4, v);
    }
    WaveletConfig off;
    off.enabled = false;
    const auto raw = preprocess_ensemble(e, off);
    REQUIRE(raw.count() == 5);
    for (int k = 0; k < 5; ++k) CHECK(raw.vectors.col(k) == flatten(e.snapshots[static_cast<std::size_t>(k)]));

    const auto a = preprocess_ensemble(e, {});
    const auto b = preprocess_ensemble(e, {});
    CHECK(a.vectors == b.vectors);
    CHECK(a.dim() == 16);

    SnapshotEnsemble same{0.0, "", std::vector<Snapshot>(4, e.snapshots[0])};
    const auto s = preprocess_ensemble(same, {});
    for (int k = 1; k < 4; ++k) CHECK(s.vectors.col(k) == s.vectors.col(0));
  }

  TEST_CASE("spatial structure with equal site means shows up in coarse-band spread") {
    // Both ensembles have mean 1/2 on every site of an 8x8 grid. Clustered
    // shots fill one half of the grid; dispersed shots are checkerboards.
    // The transform is linear, so mean coefficient vectors coincide; the
    // structure lives in the second moments, concentrated in coarse bands
    // for the clustered ensemble and fine bands for the dispersed one.
    auto shot = [](auto fill) {
      std::vector<std::int8_t> v(64);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) v[static_cast<std::size_t>(r * 8 + c)] = static_cast<std::int8_t>(fill(r, c));
      return Snapshot(8, 8, v);
    };
    SnapshotEnsemble clustered{0, "", {shot([](int, int c) { return c < 4; }), shot([](int, int c) { return c >= 4; })}};
    SnapshotEnsemble dispersed{1, "", {shot([](int r, int c) { return (r + c) % 2; }),
                                       shot([](int r, int c) { return (r + c + 1) % 2; })}};
    const auto pc = preprocess_ensemble(clustered, {});
    const auto pd = preprocess_ensemble(dispersed, {});
    const Eigen::VectorXd mean_c = pc.vectors.rowwise().mean();
    const Eigen::VectorXd mean_d = pd.vectors.rowwise().mean();
    CHECK((mean_c - mean_d).cwiseAbs().maxCoeff() < 1e-14);

    const auto l = layout_for(8, 8);
    const auto levels = coefficient_levels(l);
    auto band_spread = [&](const PreprocessedEnsemble& p, int level) {
      double s = 0;
      for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == level) s += (p.vectors.row(static_cast<Eigen::Index>(i)).array() - p.vectors.row(static_cast<Eigen::Index>(i)).mean()).square().sum();
      return s;
    };
    const int coarse = l.depth - 1, fine = 0;
    CHECK(band_spread(pc, coarse) > band_spread(pd, coarse));
    CHECK(band_spread(pd, fine) > band_spread(pc, fine));
    CHECK(band_spread(pc, coarse) - band_spread(pd, coarse) > band_spread(pd, fine) - band_spread(pc, fine));
  }
}
