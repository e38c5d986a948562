#include "snapdm/observables.hpp"

#include <cmath>
#include <string>

#include "snapdm/error.hpp"

namespace snapdm {

namespace {

ObservableValue summarize(const std::vector<double>& per_shot) {
  ObservableValue out;
  const auto m = static_cast<double>(per_shot.size());
  if (per_shot.empty()) return out;
  double sum = 0.0;
  for (double v : per_shot) sum += v;
  out.value = sum / m;
  if (per_shot.size() > 1) {
    double ss = 0.0;
    for (double v : per_shot) ss += (v - out.value) * (v - out.value);
    out.stderr_of_mean = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
  }
  return out;
}

std::vector<bool> active_sites(std::size_t sites, const std::optional<std::vector<std::uint32_t>>& mask) {
  std::vector<bool> active(sites, !mask.has_value());
  if (mask)
    for (auto s : *mask)
      if (s < sites) active[s] = true;
  return active;
}

}  // namespace

Region centered_region(std::uint32_t rows, std::uint32_t cols, std::uint32_t height, std::uint32_t width) {
  if (height == 0 || width == 0 || height > rows || width > cols)
    throw Error(ErrorKind::RegionOutOfBounds, std::to_string(height) + "x" + std::to_string(width) +
                                                  " window does not fit a " + std::to_string(rows) +
                                                  "x" + std::to_string(cols) + " grid");
  return Region{(rows - height) / 2, (cols - width) / 2, height, width};
}

double mean_filling(const SnapshotEnsemble& e, const std::optional<std::vector<std::uint32_t>>& mask) {
  if (e.snapshots.empty()) return 0.0;
  const auto active = active_sites(e.snapshots.front().size(), mask);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : e.snapshots) {
    const auto v = s.values();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (active[i]) {
        sum += v[i];
        ++count;
      }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

ObservableValue brane_parity(const SnapshotEnsemble& e, const Region& region, double filling) {
  if (e.snapshots.empty()) throw Error(ErrorKind::InvalidDataset, "empty ensemble");
  if (region.height == 0 || region.width == 0 || region.row + region.height > e.rows() ||
      region.col + region.width > e.cols())
    throw Error(ErrorKind::RegionOutOfBounds, "brane region exceeds the snapshot bounds");
  // nearbyint follows the current rounding mode, round-half-even by default.
  const long reference = std::lrint(std::nearbyint(filling));
  std::vector<double> per_shot;
  per_shot.reserve(e.count());
  for (const auto& s : e.snapshots) {
    long deviation = 0;
    for (std::uint32_t r = region.row; r < region.row + region.height; ++r)
      for (std::uint32_t c = region.col; c < region.col + region.width; ++c) deviation += s.at(r, c) - reference;
    per_shot.push_back(deviation % 2 == 0 ? 1.0 : -1.0);
  }
  return summarize(per_shot);
}

ObservableValue imbalance(const SnapshotEnsemble& e, std::uint32_t edge_column) {
  if (e.snapshots.empty()) throw Error(ErrorKind::InvalidDataset, "empty ensemble");
  if (edge_column == 0 || edge_column >= e.cols())
    throw Error(ErrorKind::RegionOutOfBounds, "edge column must lie strictly inside the grid");
  std::vector<double> per_shot;
  std::size_t dropped = 0;
  for (const auto& s : e.snapshots) {
    long left = 0, right = 0;
    for (std::uint32_t r = 0; r < s.rows(); ++r)
      for (std::uint32_t c = 0; c < s.cols(); ++c) {
        const int atoms = s.at(r, c) > 0 ? s.at(r, c) : 0;
        (c < edge_column ? left : right) += atoms;
      }
    if (left + right == 0) {
      ++dropped;
      continue;
    }
    per_shot.push_back(static_cast<double>(left - right) / static_cast<double>(left + right));
  }
  if (per_shot.empty()) throw Error(ErrorKind::NoAtoms, "every shot is empty");
  auto out = summarize(per_shot);
  out.dropped = dropped;
  return out;
}

ObservableValue nn_parity_correlation(const SnapshotEnsemble& e,
                                      const std::optional<std::vector<std::uint32_t>>& mask) {
  if (e.snapshots.empty()) throw Error(ErrorKind::InvalidDataset, "empty ensemble");
  const std::uint32_t rows = e.rows();
  const std::uint32_t cols = e.cols();
  const std::size_t sites = std::size_t{rows} * cols;
  const auto active = active_sites(sites, mask);

  std::vector<std::pair<std::size_t, std::size_t>> bonds;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::size_t i = std::size_t{r} * cols + c;
      if (c + 1 < cols && active[i] && active[i + 1]) bonds.emplace_back(i, i + 1);
      if (r + 1 < rows && active[i] && active[i + cols]) bonds.emplace_back(i, i + cols);
    }
  if (bonds.empty()) return {};

  std::vector<double> means(sites, 0.0);
  for (const auto& s : e.snapshots) {
    const auto v = s.values();
    for (std::size_t i = 0; i < sites; ++i) means[i] += v[i];
  }
  for (auto& m : means) m /= static_cast<double>(e.count());

  std::vector<double> per_shot;
  per_shot.reserve(e.count());
  for (const auto& s : e.snapshots) {
    const auto v = s.values();
    double acc = 0.0;
    for (const auto& [i, j] : bonds) acc += (v[i] - means[i]) * (v[j] - means[j]);
    per_shot.push_back(acc / static_cast<double>(bonds.size()));
  }
  return summarize(per_shot);
}

}  // namespace snapdm
