#include "snapdm/wavelet.hpp"

#include <cmath>
#include <string>

#include "snapdm/error.hpp"

namespace snapdm {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

int log2_exact(std::size_t n) {
  int k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

// One Haar analysis step over `len` entries spaced `stride` apart, starting
// at `data`. Approximations land in the first half, details in the second.
void haar_step(double* data, std::size_t len, std::size_t stride, std::vector<double>& scratch) {
  const std::size_t half = len / 2;
  scratch.resize(len);
  for (std::size_t k = 0; k < half; ++k) {
    const double a = data[(2 * k) * stride];
    const double b = data[(2 * k + 1) * stride];
    scratch[k] = (a + b) * kInvSqrt2;
    scratch[half + k] = (a - b) * kInvSqrt2;
  }
  for (std::size_t k = 0; k < len; ++k) data[k * stride] = scratch[k];
}

}  // namespace

std::size_t next_pow2(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double WaveletLayout::level_weight(int level) const {
  return std::exp2(-static_cast<double>(depth - level) * exponent);
}

WaveletLayout resolve_layout(std::uint32_t rows, std::uint32_t cols, const WaveletConfig& cfg) {
  WaveletLayout layout;
  const int natural_dim = rows == 1 ? 1 : 2;
  layout.spatial_dim = cfg.spatial_dim == 0 ? natural_dim : cfg.spatial_dim;
  if (layout.spatial_dim != natural_dim)
    throw Error(ErrorKind::InvalidConfig,
                "spatial_dim " + std::to_string(cfg.spatial_dim) + " does not match snapshot shape " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  layout.padded_side =
      layout.spatial_dim == 1 ? next_pow2(cols) : next_pow2(std::max(rows, cols));
  const int max_depth = log2_exact(layout.padded_side);
  layout.depth = cfg.levels.value_or(max_depth);
  if (layout.depth < 0 || layout.depth > max_depth)
    throw Error(ErrorKind::InvalidConfig, "wavelet levels " + std::to_string(layout.depth) +
                                              " exceeds log2(padded side) = " +
                                              std::to_string(max_depth));
  layout.exponent = cfg.weight_exponent.value_or(1.0 + layout.spatial_dim / 2.0);
  return layout;
}

Eigen::VectorXd haar_transform(const Eigen::VectorXd& grid, std::uint32_t rows, std::uint32_t cols,
                               const WaveletLayout& layout) {
  if (grid.size() != static_cast<Eigen::Index>(std::size_t{rows} * cols))
    throw Error(ErrorKind::DimensionMismatch, "signal length does not match its declared shape");
  const std::size_t n = layout.padded_side;
  std::vector<double> scratch;

  if (layout.spatial_dim == 1) {
    if (rows != 1 || cols > n) throw Error(ErrorKind::DimensionMismatch, "1D layout needs a single row");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    out.head(cols) = grid;
    for (int level = 0; level < layout.depth; ++level)
      haar_step(out.data(), n >> level, 1, scratch);
    return out;
  }

  if (rows > n || cols > n) throw Error(ErrorKind::DimensionMismatch, "grid exceeds padded side");
  // Square work array, row-major: element (r, c) at r * n + c.
  std::vector<double> work(n * n, 0.0);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      work[std::size_t{r} * n + c] = grid[static_cast<Eigen::Index>(std::size_t{r} * cols + c)];

  for (int level = 0; level < layout.depth; ++level) {
    const std::size_t side = n >> level;
    for (std::size_t r = 0; r < side; ++r) haar_step(&work[r * n], side, 1, scratch);
    for (std::size_t c = 0; c < side; ++c) haar_step(&work[c], side, n, scratch);
  }

  Eigen::VectorXd out(static_cast<Eigen::Index>(n * n));
  Eigen::Index k = 0;
  auto emit_block = [&](std::size_t r0, std::size_t c0, std::size_t side) {
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) out[k++] = work[(r0 + r) * n + c0 + c];
  };
  emit_block(0, 0, layout.approx_side());
  for (int level = layout.depth - 1; level >= 0; --level) {
    const std::size_t s = n >> (level + 1);
    emit_block(0, s, s);  // high-pass along columns
    emit_block(s, 0, s);  // high-pass along rows
    emit_block(s, s, s);  // diagonal
  }
  return out;
}

std::vector<int> coefficient_levels(const WaveletLayout& layout) {
  std::vector<int> levels;
  levels.reserve(layout.coefficient_count());
  const std::size_t a = layout.approx_side();
  levels.insert(levels.end(), layout.spatial_dim == 1 ? a : a * a, -1);
  for (int level = layout.depth - 1; level >= 0; --level) {
    const std::size_t s = layout.padded_side >> (level + 1);
    levels.insert(levels.end(), layout.spatial_dim == 1 ? s : 3 * s * s, level);
  }
  return levels;
}

Eigen::VectorXd weight_vector(const WaveletLayout& layout) {
  const auto levels = coefficient_levels(layout);
  Eigen::VectorXd w(static_cast<Eigen::Index>(levels.size()));
  for (std::size_t i = 0; i < levels.size(); ++i)
    w[static_cast<Eigen::Index>(i)] = levels[i] < 0 ? 1.0 : layout.level_weight(levels[i]);
  return w;
}

Eigen::VectorXd apply_weights(const Eigen::VectorXd& coeffs, const WaveletLayout& layout) {
  if (coeffs.size() != static_cast<Eigen::Index>(layout.coefficient_count()))
    throw Error(ErrorKind::DimensionMismatch,
                "coefficient vector has length " + std::to_string(coeffs.size()) + ", layout expects " +
                    std::to_string(layout.coefficient_count()));
  return coeffs.cwiseProduct(weight_vector(layout));
}

PreprocessedEnsemble preprocess_ensemble(const SnapshotEnsemble& e, const WaveletConfig& cfg) {
  PreprocessedEnsemble out;
  out.parameter = e.parameter;
  if (e.snapshots.empty()) throw Error(ErrorKind::InvalidDataset, "empty ensemble");
  const auto rows = e.rows();
  const auto cols = e.cols();
  const auto m = static_cast<Eigen::Index>(e.count());

  if (!cfg.enabled) {
    out.vectors.resize(static_cast<Eigen::Index>(std::size_t{rows} * cols), m);
    for (Eigen::Index j = 0; j < m; ++j) out.vectors.col(j) = flatten(e.snapshots[j]);
    return out;
  }

  const WaveletLayout layout = resolve_layout(rows, cols, cfg);
  const Eigen::VectorXd weights = weight_vector(layout);
  out.vectors.resize(static_cast<Eigen::Index>(layout.coefficient_count()), m);
  for (Eigen::Index j = 0; j < m; ++j)
    out.vectors.col(j) =
        haar_transform(flatten(e.snapshots[j]), rows, cols, layout).cwiseProduct(weights);
  return out;
}

}  // namespace snapdm
