#include "snapdm/diffusion_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "snapdm/error.hpp"
#include "snapdm/parallel.hpp"

namespace snapdm {

Eigen::MatrixXd EmbeddingResult::diffusion_coordinates() const {
  Eigen::MatrixXd out = coordinates;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    const double weight = stationary.dot(coordinates.col(k).cwiseAbs2());
    const double mu_t = std::pow(eigenvalues[k], diffusion_time);
    // Norm of psi_k in L2(pi), recovered from the stored mu^t psi.
    const double psi_norm = std::sqrt(weight) / std::abs(mu_t);
    if (psi_norm > 0.0) out.col(k) /= psi_norm;
  }
  return out;
}

Eigen::MatrixXd normalize_kernel(const Eigen::MatrixXd& kernel, double alpha) {
  if (kernel.rows() != kernel.cols())
    throw Error(ErrorKind::DimensionMismatch, "kernel must be square");
  if (alpha < 0.0 || alpha > 1.0)
    throw Error(ErrorKind::InvalidConfig, "alpha must lie in [0, 1], got " + std::to_string(alpha));
  const Eigen::VectorXd q = kernel.rowwise().sum();
  if ((q.array() <= 0.0).any())
    throw Error(ErrorKind::NumericalFailure, "kernel has a non-positive row sum");
  if (alpha == 0.0) return kernel;
  const Eigen::VectorXd scale = q.array().pow(-alpha);
  Eigen::MatrixXd out = scale.asDiagonal() * kernel * scale.asDiagonal();
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd markov_matrix(const Eigen::MatrixXd& normalized) {
  const Eigen::VectorXd d = normalized.rowwise().sum();
  return d.cwiseInverse().asDiagonal() * normalized;
}

namespace {

void orient(Eigen::Ref<Eigen::VectorXd> psi, const Eigen::VectorXd& parameters) {
  double corr = 0.0;
  if (parameters.size() == psi.size() && psi.size() > 0) {
    const Eigen::VectorXd centered = parameters.array() - parameters.mean();
    corr = psi.dot(centered);
    // Treat correlations at round-off level as zero.
    if (std::abs(corr) <= 1e-12 * std::max(1.0, centered.norm())) corr = 0.0;
  }
  if (corr == 0.0) {
    Eigen::Index at = 0;
    for (Eigen::Index i = 1; i < psi.size(); ++i)
      if (std::abs(psi[i]) > std::abs(psi[at]) + 1e-12) at = i;
    corr = psi[at];
  }
  if (corr < 0.0) psi = -psi;
}

}  // namespace

EmbeddingResult markov_and_eigs(const Eigen::MatrixXd& normalized, int dims, double diffusion_time,
                                const Eigen::VectorXd& parameters) {
  const Eigen::Index n = normalized.rows();
  if (n < 2 || normalized.cols() != n)
    throw Error(ErrorKind::DimensionMismatch, "kernel must be square with n >= 2");
  if (dims < 1 || dims > n - 1)
    throw Error(ErrorKind::InvalidConfig, "embedding dimension must lie in [1, " +
                                              std::to_string(n - 1) + "], got " + std::to_string(dims));
  if ((normalized.array() < 0.0).any())
    throw Error(ErrorKind::NumericalFailure, "normalized kernel has negative entries");

  const Eigen::VectorXd degree = normalized.rowwise().sum();
  if ((degree.array() <= 0.0).any())
    throw Error(ErrorKind::NumericalFailure, "kernel has a zero row sum");
  const Eigen::VectorXd inv_sqrt = degree.cwiseSqrt().cwiseInverse();

  // Symmetric conjugate of the Markov matrix, with the trivial eigenpair
  // (eigenvalue 1, eigenvector sqrt(degree)) deflated away exactly.
  Eigen::MatrixXd sym = inv_sqrt.asDiagonal() * normalized * inv_sqrt.asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  const Eigen::VectorXd trivial = degree.cwiseSqrt().normalized();
  sym -= trivial * trivial.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure,
                "eigendecomposition failed (n = " + std::to_string(n) + ", degree range [" +
                    std::to_string(degree.minCoeff()) + ", " + std::to_string(degree.maxCoeff()) + "])");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return eig.eigenvalues()[a] > eig.eigenvalues()[b];
  });

  std::vector<double> values;
  std::vector<Eigen::VectorXd> vectors;
  for (auto k : order) {
    if (static_cast<int>(values.size()) == dims) break;
    Eigen::VectorXd v = eig.eigenvectors().col(k);
    if (std::abs(v.dot(trivial)) > 0.5) continue;  // the deflated trivial direction
    const double mu = eig.eigenvalues()[k];
    if (!(mu > 0.0)) break;
    v -= v.dot(trivial) * trivial;
    v.normalize();
    values.push_back(std::min(mu, 1.0));
    vectors.push_back(std::move(v));
  }
  if (values.empty())
    throw Error(ErrorKind::NumericalFailure, "no positive non-trivial eigenvalue in the spectrum");

  EmbeddingResult out;
  const auto d = static_cast<Eigen::Index>(values.size());
  out.parameters = parameters;
  out.eigenvalues = Eigen::Map<const Eigen::VectorXd>(values.data(), d);
  out.stationary = degree / degree.sum();
  out.diffusion_time = diffusion_time;
  out.coordinates.resize(n, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXd psi = inv_sqrt.asDiagonal() * vectors[static_cast<std::size_t>(k)];
    psi.normalize();
    orient(psi, parameters);
    out.coordinates.col(k) = std::pow(out.eigenvalues[k], diffusion_time) * psi;
  }
  return out;
}

EmbedOutput embed_ensembles(std::span<const SnapshotEnsemble> ensembles, const PipelineConfig& cfg) {
  const std::size_t n = ensembles.size();
  if (n < 3) throw Error(ErrorKind::InvalidDataset, "embedding needs at least 3 ensembles");
  std::vector<EnsembleStats> stats(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    stats[i] = compute_stats(preprocess_ensemble(ensembles[i], cfg.wavelet), cfg.rank);
  });

  EmbedOutput out;
  out.kernel = build_kernel(stats, cfg.bandwidth, cfg.threads);
  Eigen::VectorXd params(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    params[static_cast<Eigen::Index>(i)] = ensembles[i].parameter;
    out.ranks.push_back(stats[i].rank_used);
  }
  const int dims = std::min<int>(cfg.dims, static_cast<int>(n) - 1);
  out.embedding = markov_and_eigs(normalize_kernel(out.kernel.similarities, cfg.alpha), dims,
                                  cfg.diffusion_time, params);
  out.embedding.alpha = cfg.alpha;
  return out;
}

EmbedOutput embed_dataset(const Dataset& ds, const PipelineConfig& cfg) {
  return embed_ensembles(ds.ensembles(), cfg);
}

}  // namespace snapdm
