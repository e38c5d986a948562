#pragma once

// Synthetic snapshot sources with known transitions.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "snapdm/rng.hpp"
#include "snapdm/snapshot_store.hpp"

namespace snapdm {

// ---- transverse-field Ising chain -----------------------------------------
//
// H = -sum_{j<L-1} lambda sigma^x_j sigma^x_{j+1} - sum_j sigma^z_j, open
// boundary. Basis state bit j = 0 means spin j is up (sigma^z = +1).

inline constexpr int kTfimMinLength = 2;
inline constexpr int kTfimMaxLength = 14;

struct TfimConfig {
  int length = 12;
  std::vector<double> lambdas;
  std::size_t shots = 500;
  std::uint64_t seed = 7;
};

struct GroundState {
  double energy = 0.0;
  Eigen::VectorXd amplitudes;  // length 2^L, unit norm, largest entry positive
  int iterations = 0;
};

// Applies H to a state vector.
void tfim_apply(int length, double lambda, const Eigen::VectorXd& in, Eigen::VectorXd& out);

// Dense Hamiltonian (only sensible for small L; used for checks).
Eigen::MatrixXd tfim_dense(int length, double lambda);

// Lowest eigenpair via Lanczos with full reorthogonalization, started in the
// even-parity sector that holds the ground state.
GroundState tfim_ground_state(int length, double lambda);

// m Born-rule samples in the z basis, each a 1 x L spin snapshot.
SnapshotEnsemble tfim_sample(const Eigen::VectorXd& amplitudes, int length, std::size_t shots,
                             std::uint64_t seed, double parameter = 0.0);

Dataset tfim_sweep(const TfimConfig& cfg, unsigned threads = 1);

// ---- 2D classical Ising ----------------------------------------------------

enum class IsingAlgorithm { Metropolis, Wolff };

struct IsingConfig {
  int side = 16;
  std::vector<double> temperatures;
  std::size_t shots = 500;
  int burn_in = 1000;
  int decorrelation = 5;
  std::uint64_t seed = 7;
  IsingAlgorithm algorithm = IsingAlgorithm::Wolff;
};

// Periodic square lattice, E = -sum_<ij> s_i s_j (each site bonds to its
// right and down neighbour).
class IsingLattice {
 public:
  IsingLattice(int side, double temperature);

  int side() const noexcept { return side_; }
  std::size_t sites() const noexcept { return spins_.size(); }
  std::span<const std::int8_t> spins() const noexcept { return spins_; }
  void set_spins(std::span<const std::int8_t> spins);

  double energy() const;
  double magnetization() const;  // per site
  // Energy change if site i flipped.
  int delta_energy(std::size_t site) const;

  // Metropolis acceptance probability for an energy change.
  double acceptance(int delta_e) const;

  // Single random-site Metropolis update.
  void metropolis_step(Rng& rng);
  // N single-site updates.
  void metropolis_sweep(Rng& rng);
  // Grows and flips one Wolff cluster; returns its size.
  std::size_t wolff_step(Rng& rng);
  // Cluster flips until at least N sites were flipped in total; returns the
  // number of clusters. The stopping point depends on the chain, so states
  // reached this way are biased; use it for burn-in and calibration only.
  std::size_t wolff_sweep(Rng& rng);
  // A fixed number of cluster flips. Unbiased between measurements.
  void wolff_steps(Rng& rng, std::size_t clusters);

 private:
  std::size_t neighbour(std::size_t site, int dir) const;

  int side_;
  double temperature_;
  double add_probability_;
  std::vector<std::int8_t> spins_;
  std::vector<std::size_t> stack_;
  std::vector<std::uint8_t> in_cluster_;
};

SnapshotEnsemble ising_ensemble(const IsingConfig& cfg, std::size_t temperature_index);
Dataset ising_sweep(const IsingConfig& cfg, unsigned threads = 1);

// Critical temperature of the infinite square lattice, 2 / ln(1 + sqrt 2).
double onsager_critical_temperature();

// ---- two-site toy ---------------------------------------------------------

enum class ToyKind { Anticorrelated, Uniform };

SnapshotEnsemble toy_two_site(ToyKind kind, std::size_t shots, std::uint64_t seed,
                              double parameter = 0.0);

}  // namespace snapdm
