#pragma once

#include <vector>

#include <Eigen/Core>

#include "snapdm/ensemble_kernel.hpp"
#include "snapdm/snapshot_store.hpp"
#include "snapdm/wavelet.hpp"

namespace snapdm {

/// Latent coordinates of every setting in a sweep.
///
/// `coordinates` column k holds mu_k^t * psi_k, where psi_k is the k-th
/// non-trivial right eigenvector of the Markov matrix scaled to unit l2
/// norm and oriented so that its inner product with the centered parameter
/// vector is non-negative.
struct EmbeddingResult {
  Eigen::VectorXd parameters;
  Eigen::MatrixXd coordinates;
  Eigen::VectorXd eigenvalues;  // descending, trivial eigenvalue excluded
  Eigen::VectorXd stationary;   // pi_i = D_ii / sum(D)
  double alpha = 1.0;
  double diffusion_time = 1.0;

  Eigen::Index size() const noexcept { return coordinates.rows(); }
  Eigen::Index dims() const noexcept { return coordinates.cols(); }

  /// Coordinates rescaled to unit norm in L2(pi). With every non-trivial
  /// eigenpair retained, squared Euclidean distances between rows equal the
  /// diffusion distance at time t.
  Eigen::MatrixXd diffusion_coordinates() const;
};

/// K~_ij = K_ij / (q_i^alpha q_j^alpha) with q_i = sum_j K_ij.
Eigen::MatrixXd normalize_kernel(const Eigen::MatrixXd& kernel, double alpha);

/// Row-normalizes `normalized` into a Markov matrix and returns the leading
/// `dims` non-trivial diffusion coordinates. Fewer columns come back when
/// the spectrum has fewer strictly positive non-trivial eigenvalues.
/// `parameters` only orients the eigenvectors; it may be empty.
EmbeddingResult markov_and_eigs(const Eigen::MatrixXd& normalized, int dims, double diffusion_time,
                                const Eigen::VectorXd& parameters = {});

/// Markov matrix P = D^{-1} K~.
Eigen::MatrixXd markov_matrix(const Eigen::MatrixXd& normalized);

struct PipelineConfig {
  WaveletConfig wavelet;
  RankPolicy rank;
  BandwidthPolicy bandwidth;
  double alpha = 1.0;
  double diffusion_time = 1.0;
  int dims = 3;
  unsigned threads = 1;
};

struct EmbedOutput {
  EmbeddingResult embedding;
  KernelMatrix kernel;
  std::vector<int> ranks;
};

/// Full chain: preprocess -> statistics -> kernel -> normalize -> spectrum.
EmbedOutput embed_ensembles(std::span<const SnapshotEnsemble> ensembles, const PipelineConfig& cfg);
EmbedOutput embed_dataset(const Dataset& ds, const PipelineConfig& cfg);

}  // namespace snapdm
