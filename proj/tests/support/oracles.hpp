#pragma once

// Independent reference implementations used to check the library. None of
// them call into snapdm; they trade speed for transparency.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace snapdm::oracle {

struct Svd {
  Eigen::MatrixXd u;       // m x n, unit columns where sigma > 0
  Eigen::VectorXd sigma;   // n, unsorted
  Eigen::MatrixXd v;       // n x n
};

// One-sided Jacobi SVD (Hestenes). Slow and simple.
inline Svd jacobi_svd(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd u = a;
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double alpha = 0, beta = 0, gamma = 0;
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
          const double up = u(i, p), uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    if (!rotated) break;
  }
  Svd out;
  out.sigma.resize(n);
  out.u = u;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.sigma[k] = u.col(k).norm();
    if (out.sigma[k] > 0) out.u.col(k) /= out.sigma[k];
  }
  out.v = v;
  return out;
}

// Pseudo-inverse keeping singular values >= tol * max, at most `cap` of them
// (largest first).
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a, double tol, int cap, int* rank = nullptr) {
  const Svd svd = jacobi_svd(a);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(svd.sigma.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return svd.sigma[i] > svd.sigma[j]; });
  const double smax = order.empty() ? 0.0 : svd.sigma[order.front()];
  Eigen::MatrixXd result = Eigen::MatrixXd::Zero(a.cols(), a.rows());
  int kept = 0;
  for (auto k : order) {
    if (kept >= cap || smax <= 0.0 || svd.sigma[k] < tol * smax) break;
    result += svd.v.col(k) * svd.u.col(k).transpose() / svd.sigma[k];
    ++kept;
  }
  if (rank) *rank = kept;
  return result;
}

// Columns are samples.
inline Eigen::MatrixXd two_pass_covariance(const Eigen::MatrixXd& samples) {
  const Eigen::Index d = samples.rows();
  const Eigen::Index m = samples.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < m; ++j) mean += samples.col(j);
  mean /= static_cast<double>(m);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      double s = 0;
      for (Eigen::Index j = 0; j < m; ++j) s += (samples(a, j) - mean[a]) * (samples(b, j) - mean[b]);
      c(a, b) = s / static_cast<double>(m - 1);
    }
  return c;
}

// s x s single-level orthonormal Haar analysis matrix: averages in the top
// half of the rows, differences in the bottom half.
inline Eigen::MatrixXd haar_step_matrix(Eigen::Index s) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(s, s);
  const double r = 1.0 / std::numbers::sqrt2;
  for (Eigen::Index k = 0; k < s / 2; ++k) {
    h(k, 2 * k) = r;
    h(k, 2 * k + 1) = r;
    h(s / 2 + k, 2 * k) = r;
    h(s / 2 + k, 2 * k + 1) = -r;
  }
  return h;
}

// Explicit (n*n) x (n*n) matrix of the 2D pyramid transform, columns are the
// images of delta grids. Output order: approximation block, then for each
// level from the coarsest the top-right, bottom-left and bottom-right bands,
// each row-major.
inline Eigen::MatrixXd haar2d_matrix(Eigen::Index n, int depth) {
  Eigen::MatrixXd m(n * n, n * n);
  for (Eigen::Index j = 0; j < n * n; ++j) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
    x(j / n, j % n) = 1.0;
    for (int level = 0; level < depth; ++level) {
      const Eigen::Index s = n >> level;
      const Eigen::MatrixXd h = haar_step_matrix(s);
      x.topLeftCorner(s, s) = (h * x.topLeftCorner(s, s) * h.transpose()).eval();
    }
    std::vector<double> flat;
    const Eigen::Index a = n >> depth;
    auto block = [&](Eigen::Index r0, Eigen::Index c0, Eigen::Index side) {
      for (Eigen::Index r = 0; r < side; ++r)
        for (Eigen::Index c = 0; c < side; ++c) flat.push_back(x(r0 + r, c0 + c));
    };
    block(0, 0, a);
    for (int level = depth - 1; level >= 0; --level) {
      const Eigen::Index s = n >> (level + 1);
      block(0, s, s);
      block(s, 0, s);
      block(s, s, s);
    }
    for (Eigen::Index i = 0; i < n * n; ++i) m(i, j) = flat[static_cast<std::size_t>(i)];
  }
  return m;
}

// Roots of the characteristic polynomial of a symmetric 3x3 matrix,
// ascending, by the trigonometric cubic formula.
inline Eigen::Vector3d symmetric3_eigenvalues(const Eigen::Matrix3d& a) {
  const double tr = a.trace();
  const double c1 = a(0, 0) * a(1, 1) + a(0, 0) * a(2, 2) + a(1, 1) * a(2, 2) - a(0, 1) * a(1, 0) -
                    a(0, 2) * a(2, 0) - a(1, 2) * a(2, 1);
  const double det = a.determinant();
  // lambda^3 + p2 lambda^2 + p1 lambda + p0
  const double p2 = -tr, p1 = c1, p0 = -det;
  const double q = (3.0 * p1 - p2 * p2) / 9.0;
  const double r = (9.0 * p2 * p1 - 27.0 * p0 - 2.0 * p2 * p2 * p2) / 54.0;
  const double rho = std::sqrt(std::max(0.0, -q * q * q));
  const double theta = std::acos(std::clamp(rho > 0 ? r / rho : 0.0, -1.0, 1.0));
  const double mag = 2.0 * std::sqrt(std::max(0.0, -q));
  Eigen::Vector3d out;
  for (int k = 0; k < 3; ++k) out[k] = mag * std::cos((theta + 2.0 * std::numbers::pi * k) / 3.0) - p2 / 3.0;
  std::sort(out.data(), out.data() + 3);
  return out;
}

// Dense open-chain TFIM H = -lambda sum sx sx - sum sz, bit j = 0 is up.
inline Eigen::MatrixXd tfim_hamiltonian(int length, double lambda) {
  const Eigen::Index dim = Eigen::Index{1} << length;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    for (int j = 0; j < length; ++j) h(s, s) -= ((s >> j) & 1) ? -1.0 : 1.0;
    for (int j = 0; j + 1 < length; ++j) {
      const Eigen::Index t = s ^ (Eigen::Index{3} << j);
      h(t, s) -= lambda;
    }
  }
  return h;
}

inline double tfim_ground_energy(int length, double lambda) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tfim_hamiltonian(length, lambda), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

// Energy of a periodic 2x2 Ising configuration; bit k of `state` is site k
// (row-major), 1 meaning spin -1. Bonds to the right and down neighbours,
// which on a 2x2 torus counts each neighbour pair twice.
inline int ising2x2_energy(unsigned state) {
  auto spin = [&](int r, int c) { return ((state >> (2 * (r % 2) + (c % 2))) & 1u) ? -1 : 1; };
  int e = 0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) e -= spin(r, c) * (spin(r, c + 1) + spin(r + 1, c));
  return e;
}

inline std::vector<double> ising2x2_boltzmann(double temperature) {
  std::vector<double> w(16);
  double z = 0;
  for (unsigned s = 0; s < 16; ++s) z += w[s] = std::exp(-ising2x2_energy(s) / temperature);
  for (auto& x : w) x /= z;
  return w;
}

// Squared diffusion distance sum_k (P^t_ik - P^t_jk)^2 / pi_k.
inline Eigen::MatrixXd diffusion_distances(const Eigen::MatrixXd& p, int t, const Eigen::VectorXd& pi) {
  Eigen::MatrixXd pt = Eigen::MatrixXd::Identity(p.rows(), p.cols());
  for (int k = 0; k < t; ++k) pt = pt * p;
  const Eigen::Index n = p.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0;
      for (Eigen::Index k = 0; k < n; ++k) s += (pt(i, k) - pt(j, k)) * (pt(i, k) - pt(j, k)) / pi[k];
      d(i, j) = s;
    }
  return d;
}

// Pearson chi-squared statistic of observed counts against probabilities,
// pooling cells whose expected count is below `min_expected` into one.
struct ChiSquare {
  double statistic = 0;
  int dof = 0;
};

inline ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& probabilities,
                            double total, double min_expected = 5.0) {
  ChiSquare out;
  double pooled_obs = 0, pooled_exp = 0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = probabilities[i] * total;
    if (e < min_expected) {
      pooled_obs += observed[i];
      pooled_exp += e;
      continue;
    }
    out.statistic += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  if (pooled_exp > 0) {
    out.statistic += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  out.dof = cells - 1;
  return out;
}

}  // namespace snapdm::oracle
