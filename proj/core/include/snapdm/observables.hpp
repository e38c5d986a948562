#pragma once

// Physical comparison observables evaluated directly on snapshots.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snapdm/snapshot_store.hpp"

namespace snapdm {

struct ObservableValue {
  double value = 0.0;
  double stderr_of_mean = 0.0;  // shot-to-shot standard error
  std::size_t dropped = 0;      // shots excluded (imbalance: empty shots)
};

struct Region {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t height = 1;
  std::uint32_t width = 1;
};

// Window of the given size centred in a rows x cols grid.
Region centered_region(std::uint32_t rows, std::uint32_t cols, std::uint32_t height,
                       std::uint32_t width);

// Mean reading over every site of every shot (active sites only when a mask
// is given).
double mean_filling(const SnapshotEnsemble& e,
                    const std::optional<std::vector<std::uint32_t>>& mask = std::nullopt);

// Per shot s = (-1)^{sum_{i in region} (n_i - round(mean_filling))}, rounding
// half to even; the value is the shot average.
ObservableValue brane_parity(const SnapshotEnsemble& e, const Region& region, double mean_filling);

// Per shot (N_L - N_R) / N_total with N_L the atoms in columns < edge_column.
// Shots without atoms are dropped and counted.
ObservableValue imbalance(const SnapshotEnsemble& e, std::uint32_t edge_column);

// Average over nearest-neighbour bonds of <p_i p_j> - <p_i><p_j>, with site
// means taken across shots. Bonds touching a masked-out site are skipped.
ObservableValue nn_parity_correlation(const SnapshotEnsemble& e,
                                      const std::optional<std::vector<std::uint32_t>>& mask = std::nullopt);

struct ObservableSeries {
  std::string name;
  std::vector<double> parameters;
  std::vector<double> values;
  std::vector<double> stderrs;
};

}  // namespace snapdm
