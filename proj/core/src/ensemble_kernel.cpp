#include "snapdm/ensemble_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "snapdm/error.hpp"
#include "snapdm/parallel.hpp"

namespace snapdm {

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Relative cut below which a direction is treated as carrying no variance at
// all, whatever the policy tolerance says. Guards against inverting pure
// round-off (e.g. the residue of averaging identical vectors).
constexpr double kVarianceFloor = 1e-13;

}  // namespace

TruncatedInverse truncated_pinv(const Eigen::MatrixXd& a, double tolerance, int rank_cap) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();  // descending
  TruncatedInverse out;
  out.pinv = Eigen::MatrixXd::Zero(a.cols(), a.rows());
  if (s.size() == 0 || s[0] <= 0.0) return out;
  const double cut = tolerance * s[0];
  const int cap = std::min<int>(rank_cap, static_cast<int>(s.size()));
  int r = 0;
  while (r < cap && s[r] > 0.0 && s[r] >= cut) ++r;
  out.rank = r;
  if (r > 0) {
    const auto v = svd.matrixV().leftCols(r);
    const auto u = svd.matrixU().leftCols(r);
    out.pinv = v * s.head(r).cwiseInverse().asDiagonal() * u.transpose();
  }
  return out;
}

TruncatedInverse truncated_pinv_symmetric(const Eigen::MatrixXd& a, double tolerance, int rank_cap,
                                          double absolute_floor) {
  const Eigen::Index n = a.rows();
  TruncatedInverse out;
  out.pinv = Eigen::MatrixXd::Zero(n, n);
  if (n == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorKind::NumericalFailure, "symmetric eigendecomposition did not converge");
  const Eigen::VectorXd& values = eig.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return std::abs(values[x]) > std::abs(values[y]);
  });
  const double smax = std::abs(values[order[0]]);
  if (smax <= 0.0) return out;
  const double cut = std::max(tolerance * smax, absolute_floor);
  const int cap = std::min<int>(rank_cap, static_cast<int>(n));
  Eigen::MatrixXd basis(n, cap);
  Eigen::VectorXd inv(cap);
  int r = 0;
  while (r < cap) {
    const Eigen::Index k = order[static_cast<std::size_t>(r)];
    const double sv = std::abs(values[k]);
    if (!(sv > 0.0) || sv < cut) break;
    basis.col(r) = eig.eigenvectors().col(k);
    inv[r] = 1.0 / values[k];
    ++r;
  }
  out.rank = r;
  if (r > 0) {
    const auto b = basis.leftCols(r);
    out.pinv = b * inv.head(r).asDiagonal() * b.transpose();
    out.pinv = 0.5 * (out.pinv + out.pinv.transpose()).eval();
  }
  return out;
}

EnsembleStats compute_stats(const PreprocessedEnsemble& pe, const RankPolicy& policy) {
  const Eigen::Index m = pe.count();
  const Eigen::Index d = pe.dim();
  if (m < 2)
    throw Error(ErrorKind::InsufficientSamples,
                "covariance needs at least 2 samples, got " + std::to_string(m));
  EnsembleStats st;
  st.parameter = pe.parameter;
  st.samples = static_cast<int>(m);
  st.mean = pe.vectors.rowwise().mean();
  const Eigen::MatrixXd centered = pe.vectors.colwise() - st.mean;
  st.covariance = Eigen::MatrixXd::Zero(d, d);
  st.covariance.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(m - 1));
  st.covariance = st.covariance.selfadjointView<Eigen::Lower>();

  int cap = static_cast<int>(std::min<Eigen::Index>(m - 1, d));
  if (policy.max_rank) cap = std::min(cap, *policy.max_rank);
  const double scale = pe.vectors.cwiseAbs2().rowwise().mean().maxCoeff();
  auto inv = truncated_pinv_symmetric(st.covariance, std::max(policy.tolerance, 0.0), cap,
                                      kVarianceFloor * scale);
  st.pinv = std::move(inv.pinv);
  st.rank_used = inv.rank;
  return st;
}

double mahalanobis_sq(const EnsembleStats& a, const EnsembleStats& b) {
  if (a.mean.size() != b.mean.size())
    throw Error(ErrorKind::DimensionMismatch, "ensemble statistics have dimensions " +
                                                  std::to_string(a.mean.size()) + " and " +
                                                  std::to_string(b.mean.size()));
  const Eigen::VectorXd delta = a.mean - b.mean;
  const double value = 0.5 * (delta.dot(a.pinv * delta) + delta.dot(b.pinv * delta));
  return std::max(value, 0.0);
}

Eigen::MatrixXd distance_matrix(std::span<const EnsembleStats> stats, unsigned threads) {
  const auto n = static_cast<Eigen::Index>(stats.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    values[k] = mahalanobis_sq(stats[static_cast<std::size_t>(pairs[k].first)],
                               stats[static_cast<std::size_t>(pairs[k].second)]);
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    d(pairs[k].first, pairs[k].second) = values[k];
    d(pairs[k].second, pairs[k].first) = values[k];
  }
  return d;
}

double select_bandwidth(const Eigen::MatrixXd& distances, const BandwidthPolicy& policy) {
  const Eigen::Index n = distances.rows();
  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) off.push_back(distances(i, j));

  double eps = 0.0;
  switch (policy.kind) {
    case BandwidthPolicy::Kind::Fixed:
      eps = policy.value;
      break;
    case BandwidthPolicy::Kind::GlobalMedian:
      eps = median_of(off);
      break;
    case BandwidthPolicy::Kind::NeighbourMedian: {
      int k = policy.neighbours;
      if (k <= 0) k = std::max(2, static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))));
      k = std::min<int>(k, static_cast<int>(n - 1));
      std::vector<double> kth;
      kth.reserve(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> row;
        row.reserve(static_cast<std::size_t>(n - 1));
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) row.push_back(distances(i, j));
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        kth.push_back(row[static_cast<std::size_t>(k - 1)]);
      }
      eps = median_of(kth);
      // Heavily duplicated settings can zero the neighbour scale.
      if (!(eps > 0.0)) eps = median_of(off);
      break;
    }
  }
  return eps * policy.scale;
}

KernelMatrix kernel_from_distances(Eigen::MatrixXd distances, const BandwidthPolicy& policy) {
  const Eigen::Index n = distances.rows();
  if (n < 2 || distances.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "distance matrix must be square with n >= 2");
  distances = distances.cwiseMax(0.0);
  distances.diagonal().setZero();
  double largest = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) largest = std::max(largest, distances(i, j));
  if (!(largest > 1e-12))
    throw Error(ErrorKind::DegenerateKernel,
                "all ensembles are statistically identical (largest d^2 = " + std::to_string(largest) +
                    ")");
  const double eps = select_bandwidth(distances, policy);
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw Error(ErrorKind::InvalidConfig, "kernel bandwidth must be positive, got " + std::to_string(eps));
  KernelMatrix k;
  k.bandwidth = eps;
  k.similarities = (-distances / eps).array().exp().matrix();
  k.similarities.diagonal().setOnes();
  k.distances = std::move(distances);
  return k;
}

KernelMatrix build_kernel(std::span<const EnsembleStats> stats, const BandwidthPolicy& policy,
                          unsigned threads) {
  if (stats.size() < 3)
    throw Error(ErrorKind::InvalidDataset,
                "a kernel needs at least 3 ensembles, got " + std::to_string(stats.size()));
  for (const auto& s : stats)
    if (s.mean.size() != stats.front().mean.size())
      throw Error(ErrorKind::DimensionMismatch, "ensemble statistics differ in dimension");
  return kernel_from_distances(distance_matrix(stats, threads), policy);
}

}  // namespace snapdm
