#pragma once

// Distribution-aware distance between snapshot ensembles.
//
// Each ensemble is summarized by its empirical mean z and covariance C
// (m - 1 normalizer). Two ensembles are compared with
//
//   d^2(i, j) = 1/2 (z_i - z_j)^T (C_i^+ + C_j^+) (z_i - z_j)
//
// where C^+ is a truncated pseudo-inverse, and turned into similarities
// with a Gaussian K_ij = exp(-d^2 / eps).

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "snapdm/wavelet.hpp"

namespace snapdm {

struct RankPolicy {
  // Keep singular values >= tolerance * sigma_max.
  double tolerance = 1e-3;
  // Optional extra cap on the retained rank (always also capped at
  // min(m - 1, D)).
  std::optional<int> max_rank;
};

struct TruncatedInverse {
  Eigen::MatrixXd pinv;
  int rank = 0;
};

// Truncated SVD pseudo-inverse of a general square or rectangular matrix.
TruncatedInverse truncated_pinv(const Eigen::MatrixXd& a, double tolerance, int rank_cap);

// Same contract for a symmetric positive-semidefinite matrix, computed
// from its eigendecomposition (singular values = |eigenvalues|). Values
// below `absolute_floor` are dropped regardless of the relative tolerance.
TruncatedInverse truncated_pinv_symmetric(const Eigen::MatrixXd& a, double tolerance, int rank_cap,
                                          double absolute_floor = 0.0);

struct EnsembleStats {
  double parameter = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd pinv;
  int rank_used = 0;
  int samples = 0;
};

EnsembleStats compute_stats(const PreprocessedEnsemble& pe, const RankPolicy& policy = {});

double mahalanobis_sq(const EnsembleStats& a, const EnsembleStats& b);

// Symmetric n x n matrix of d^2 with zero diagonal, pairs evaluated in
// parallel.
Eigen::MatrixXd distance_matrix(std::span<const EnsembleStats> stats, unsigned threads = 1);

struct BandwidthPolicy {
  enum class Kind {
    // eps = median of all off-diagonal d^2
    GlobalMedian,
    // eps = median over points of the d^2 to the k-th nearest neighbour
    NeighbourMedian,
    // eps = value
    Fixed,
  };
  Kind kind = Kind::NeighbourMedian;
  // Neighbour rank for NeighbourMedian; 0 means max(2, ceil(log2 n)).
  int neighbours = 0;
  double value = 0.0;
  // Multiplier applied after the policy picks eps.
  double scale = 1.0;
};

struct KernelMatrix {
  Eigen::MatrixXd distances;
  Eigen::MatrixXd similarities;
  double bandwidth = 0.0;

  Eigen::Index size() const noexcept { return distances.rows(); }
};

// Picks eps for a distance matrix under the policy.
double select_bandwidth(const Eigen::MatrixXd& distances, const BandwidthPolicy& policy);

KernelMatrix kernel_from_distances(Eigen::MatrixXd distances, const BandwidthPolicy& policy);

KernelMatrix build_kernel(std::span<const EnsembleStats> stats, const BandwidthPolicy& policy = {},
                          unsigned threads = 1);

}  // namespace snapdm
