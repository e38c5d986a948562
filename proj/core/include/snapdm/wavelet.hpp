#pragma once

// Weighted Haar preprocessing.
//
// Each snapshot is zero-padded to a dyadic length (1D) or a dyadic square
// (2D, anchored top-left), transformed with the orthonormal Haar basis and
// its detail bands rescaled so coarse scales dominate. The weighted l1
// geometry of the coefficients approximates the earth mover's distance.
//
// Coefficient layout, level-major: approximation block first, then detail
// bands from the coarsest level to the finest. Level l = 0 is the finest.
// In 2D each level contributes three s x s bands in the order
// (horizontal-detail, vertical-detail, diagonal-detail), each row-major.

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "snapdm/snapshot_store.hpp"

namespace snapdm {

struct WaveletConfig {
  bool enabled = true;
  // 0 derives the dimension from the snapshot shape (rows == 1 means 1D).
  int spatial_dim = 0;
  // Unset means 1 + spatial_dim / 2.
  std::optional<double> weight_exponent;
  // Unset means full depth.
  std::optional<int> levels;
};

// Resolved transform geometry for one snapshot shape.
struct WaveletLayout {
  int spatial_dim = 1;
  std::size_t padded_side = 1;  // N (1D length or 2D side), a power of two
  int depth = 0;                // J, number of decomposition levels
  double exponent = 1.5;

  std::size_t coefficient_count() const noexcept {
    return spatial_dim == 1 ? padded_side : padded_side * padded_side;
  }
  // Side of the approximation block (its length in 1D).
  std::size_t approx_side() const noexcept { return padded_side >> depth; }
  double level_weight(int level) const;
};

std::size_t next_pow2(std::size_t n) noexcept;

WaveletLayout resolve_layout(std::uint32_t rows, std::uint32_t cols, const WaveletConfig& cfg);

// Orthonormal Haar coefficients of the zero-padded input. `grid` is the
// row-major rows x cols signal.
Eigen::VectorXd haar_transform(const Eigen::VectorXd& grid, std::uint32_t rows, std::uint32_t cols,
                               const WaveletLayout& layout);

// Multiplies detail coefficients of level l by 2^{-(J-l) * exponent}.
Eigen::VectorXd apply_weights(const Eigen::VectorXd& coeffs, const WaveletLayout& layout);

// Per-coefficient weights matching the layout (1 for the approximation block).
Eigen::VectorXd weight_vector(const WaveletLayout& layout);

// Level index (finest = 0) of each coefficient; -1 marks approximation.
std::vector<int> coefficient_levels(const WaveletLayout& layout);

struct PreprocessedEnsemble {
  double parameter = 0.0;
  // One column per snapshot, all of length D.
  Eigen::MatrixXd vectors;

  Eigen::Index count() const noexcept { return vectors.cols(); }
  Eigen::Index dim() const noexcept { return vectors.rows(); }
};

PreprocessedEnsemble preprocess_ensemble(const SnapshotEnsemble& e, const WaveletConfig& cfg);

}  // namespace snapdm
