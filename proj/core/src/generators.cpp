#include "snapdm/generators.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "snapdm/error.hpp"
#include "snapdm/parallel.hpp"

namespace snapdm {

namespace {

void check_length(int length) {
  if (length < kTfimMinLength || length > kTfimMaxLength)
    throw Error(ErrorKind::InvalidConfig, "chain length must lie in [" + std::to_string(kTfimMinLength) +
                                              ", " + std::to_string(kTfimMaxLength) + "], got " +
                                              std::to_string(length));
}

std::string format_parameter(const char* prefix, double value) {
  std::ostringstream os;
  os << prefix << value;
  return os.str();
}

}  // namespace

void tfim_apply(int length, double lambda, const Eigen::VectorXd& in, Eigen::VectorXd& out) {
  const std::size_t dim = std::size_t{1} << length;
  out.resize(static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < dim; ++s) {
    // -sum sigma^z: each up spin contributes -1, each down spin +1.
    const int down = std::popcount(s);
    double acc = static_cast<double>(2 * down - length) * in[static_cast<Eigen::Index>(s)];
    for (int j = 0; j + 1 < length; ++j) {
      const std::size_t flipped = s ^ (std::size_t{3} << j);
      acc -= lambda * in[static_cast<Eigen::Index>(flipped)];
    }
    out[static_cast<Eigen::Index>(s)] = acc;
  }
}

Eigen::MatrixXd tfim_dense(int length, double lambda) {
  check_length(length);
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << length);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    for (int j = 0; j < length; ++j) h(s, s) += ((s >> j) & 1) ? 1.0 : -1.0;
    for (int j = 0; j + 1 < length; ++j) h(s ^ (Eigen::Index{3} << j), s) -= lambda;
  }
  return h;
}

GroundState tfim_ground_state(int length, double lambda) {
  check_length(length);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidConfig, "lambda must be a finite non-negative number");
  const std::size_t dim = std::size_t{1} << length;
  const auto n = static_cast<Eigen::Index>(dim);
  const int sector_dim = static_cast<int>(dim / 2);
  const int max_steps = std::min(sector_dim, 400);

  // H preserves the parity of the number of down spins, and the ground
  // state lives in the even sector. Starting there keeps the iteration there.
  Eigen::VectorXd start = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < dim; ++s)
    if (std::popcount(s) % 2 == 0) start[static_cast<Eigen::Index>(s)] = 1.0;
  start.normalize();

  Eigen::MatrixXd basis(n, max_steps);
  std::vector<double> alpha, beta;
  basis.col(0) = start;
  Eigen::VectorXd w(n);
  double theta = 0.0;
  Eigen::VectorXd ritz;
  int steps = 0;
  bool converged = false;

  for (int k = 0; k < max_steps; ++k) {
    tfim_apply(length, lambda, basis.col(k), w);
    const double a = basis.col(k).dot(w);
    alpha.push_back(a);
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd coeffs = basis.leftCols(k + 1).transpose() * w;
      w.noalias() -= basis.leftCols(k + 1) * coeffs;
    }
    const double b = w.norm();
    steps = k + 1;

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(steps, steps);
    for (int i = 0; i < steps; ++i) {
      tri(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < steps) tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(tri);
    theta = small.eigenvalues()[0];
    const Eigen::VectorXd y = small.eigenvectors().col(0);
    const double residual = std::abs(b * y[steps - 1]);
    if (residual < 1e-11 * std::max(1.0, std::abs(theta)) || b < 1e-13 || steps == max_steps) {
      ritz = basis.leftCols(steps) * y;
      converged = residual < 1e-8 * std::max(1.0, std::abs(theta)) || b < 1e-13;
      break;
    }
    beta.push_back(b);
    basis.col(k + 1) = w / b;
  }

  if (!converged)
    throw Error(ErrorKind::NumericalFailure, "Lanczos did not converge for L = " + std::to_string(length) +
                                                 ", lambda = " + std::to_string(lambda));

  // Polish: the Rayleigh quotient of the normalized Ritz vector.
  ritz.normalize();
  Eigen::VectorXd hr;
  tfim_apply(length, lambda, ritz, hr);
  GroundState gs;
  gs.energy = ritz.dot(hr);
  gs.iterations = steps;
  Eigen::Index at = 0;
  ritz.cwiseAbs().maxCoeff(&at);
  if (ritz[at] < 0.0) ritz = -ritz;
  gs.amplitudes = std::move(ritz);
  return gs;
}

SnapshotEnsemble tfim_sample(const Eigen::VectorXd& amplitudes, int length, std::size_t shots,
                             std::uint64_t seed, double parameter) {
  check_length(length);
  const std::size_t dim = std::size_t{1} << length;
  if (amplitudes.size() != static_cast<Eigen::Index>(dim))
    throw Error(ErrorKind::DimensionMismatch, "amplitude vector length is not 2^L");
  std::vector<double> cumulative(dim);
  double total = 0.0;
  for (std::size_t s = 0; s < dim; ++s) {
    total += amplitudes[static_cast<Eigen::Index>(s)] * amplitudes[static_cast<Eigen::Index>(s)];
    cumulative[s] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidConfig, "amplitude vector is zero");

  Rng rng(seed);
  SnapshotEnsemble e;
  e.parameter = parameter;
  e.label = format_parameter("lambda=", parameter);
  e.snapshots.reserve(shots);
  for (std::size_t k = 0; k < shots; ++k) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    std::size_t state = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        it - cumulative.begin(), static_cast<std::ptrdiff_t>(dim - 1)));
    // Skip zero-probability states that share a cumulative value.
    while (state > 0 && cumulative[state] == cumulative[state - 1] && u < cumulative[state - 1]) --state;
    std::vector<std::int8_t> spins(static_cast<std::size_t>(length));
    for (int j = 0; j < length; ++j) spins[static_cast<std::size_t>(j)] = ((state >> j) & 1) ? -1 : 1;
    e.snapshots.emplace_back(1, static_cast<std::uint32_t>(length), std::move(spins));
  }
  return e;
}

Dataset tfim_sweep(const TfimConfig& cfg, unsigned threads) {
  if (cfg.length < 4 || cfg.length > kTfimMaxLength)
    throw Error(ErrorKind::InvalidConfig, "TFIM sweeps need 4 <= L <= 14");
  if (cfg.shots < 2) throw Error(ErrorKind::InvalidConfig, "need at least 2 shots per setting");
  for (std::size_t i = 1; i < cfg.lambdas.size(); ++i)
    if (!(cfg.lambdas[i] > cfg.lambdas[i - 1]))
      throw Error(ErrorKind::InvalidConfig, "lambdas must be strictly increasing");
  std::vector<SnapshotEnsemble> ensembles(cfg.lambdas.size());
  parallel_for(cfg.lambdas.size(), threads, [&](std::size_t i) {
    const auto gs = tfim_ground_state(cfg.length, cfg.lambdas[i]);
    ensembles[i] = tfim_sample(gs.amplitudes, cfg.length, cfg.shots,
                               derive_seed(cfg.seed, Stream::Tfim, {i}), cfg.lambdas[i]);
  });
  std::map<std::string, std::string> meta{{"generator", "tfim"},
                                          {"length", std::to_string(cfg.length)},
                                          {"seed", std::to_string(cfg.seed)},
                                          {"boundary", "open"}};
  return Dataset("lambda", Alphabet::SpinPm1, std::move(ensembles), std::nullopt, std::move(meta));
}

// ---- Ising -----------------------------------------------------------------

IsingLattice::IsingLattice(int side, double temperature)
    : side_(side),
      temperature_(temperature),
      add_probability_(1.0 - std::exp(-2.0 / temperature)),
      spins_(static_cast<std::size_t>(side) * static_cast<std::size_t>(side), 1),
      in_cluster_(spins_.size(), 0) {
  if (side < 2) throw Error(ErrorKind::InvalidConfig, "Ising lattice side must be >= 2");
  if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
}

void IsingLattice::set_spins(std::span<const std::int8_t> spins) {
  if (spins.size() != spins_.size()) throw Error(ErrorKind::DimensionMismatch, "spin count mismatch");
  std::copy(spins.begin(), spins.end(), spins_.begin());
}

std::size_t IsingLattice::neighbour(std::size_t site, int dir) const {
  const auto l = static_cast<std::size_t>(side_);
  const std::size_t r = site / l;
  const std::size_t c = site % l;
  switch (dir) {
    case 0: return r * l + (c + 1) % l;
    case 1: return r * l + (c + l - 1) % l;
    case 2: return ((r + 1) % l) * l + c;
    default: return ((r + l - 1) % l) * l + c;
  }
}

double IsingLattice::energy() const {
  double e = 0.0;
  for (std::size_t i = 0; i < spins_.size(); ++i)
    e -= spins_[i] * (spins_[neighbour(i, 0)] + spins_[neighbour(i, 2)]);
  return e;
}

double IsingLattice::magnetization() const {
  long sum = 0;
  for (auto s : spins_) sum += s;
  return static_cast<double>(sum) / static_cast<double>(spins_.size());
}

int IsingLattice::delta_energy(std::size_t site) const {
  int field = 0;
  for (int dir = 0; dir < 4; ++dir) field += spins_[neighbour(site, dir)];
  return 2 * spins_[site] * field;
}

double IsingLattice::acceptance(int delta_e) const {
  return delta_e <= 0 ? 1.0 : std::exp(-static_cast<double>(delta_e) / temperature_);
}

void IsingLattice::metropolis_step(Rng& rng) {
  const std::size_t site = rng.below(spins_.size());
  const int de = delta_energy(site);
  if (de <= 0 || rng.uniform() < acceptance(de)) spins_[site] = static_cast<std::int8_t>(-spins_[site]);
}

void IsingLattice::metropolis_sweep(Rng& rng) {
  for (std::size_t k = 0; k < spins_.size(); ++k) metropolis_step(rng);
}

std::size_t IsingLattice::wolff_step(Rng& rng) {
  const std::size_t seed_site = rng.below(spins_.size());
  const std::int8_t orientation = spins_[seed_site];
  stack_.clear();
  stack_.push_back(seed_site);
  in_cluster_[seed_site] = 1;
  std::size_t size = 0;
  std::vector<std::size_t> members;
  while (!stack_.empty()) {
    const std::size_t site = stack_.back();
    stack_.pop_back();
    members.push_back(site);
    ++size;
    for (int dir = 0; dir < 4; ++dir) {
      const std::size_t nb = neighbour(site, dir);
      if (!in_cluster_[nb] && spins_[nb] == orientation && rng.uniform() < add_probability_) {
        in_cluster_[nb] = 1;
        stack_.push_back(nb);
      }
    }
  }
  for (auto site : members) {
    spins_[site] = static_cast<std::int8_t>(-orientation);
    in_cluster_[site] = 0;
  }
  return size;
}

std::size_t IsingLattice::wolff_sweep(Rng& rng) {
  std::size_t flipped = 0, clusters = 0;
  for (; flipped < spins_.size(); ++clusters) flipped += wolff_step(rng);
  return clusters;
}

void IsingLattice::wolff_steps(Rng& rng, std::size_t clusters) {
  for (std::size_t k = 0; k < clusters; ++k) wolff_step(rng);
}

SnapshotEnsemble ising_ensemble(const IsingConfig& cfg, std::size_t temperature_index) {
  const double temperature = cfg.temperatures.at(temperature_index);
  IsingLattice lattice(cfg.side, temperature);
  Rng rng(derive_seed(cfg.seed, Stream::Ising, {temperature_index}));
  // Wolff "sweeps" are calibrated during burn-in to the mean number of
  // clusters that flip N sites, then frozen so that the spacing between
  // stored snapshots does not depend on the chain itself.
  std::size_t clusters_per_sweep = 1;
  if (cfg.algorithm == IsingAlgorithm::Wolff) {
    const int calibration = std::max(cfg.burn_in, 10);
    std::size_t clusters = 0;
    for (int k = 0; k < calibration; ++k) clusters += lattice.wolff_sweep(rng);
    clusters_per_sweep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(clusters) / calibration)));
  } else {
    for (int k = 0; k < cfg.burn_in; ++k) lattice.metropolis_sweep(rng);
  }
  auto sweep = [&] {
    if (cfg.algorithm == IsingAlgorithm::Wolff)
      lattice.wolff_steps(rng, clusters_per_sweep);
    else
      lattice.metropolis_sweep(rng);
  };
  SnapshotEnsemble e;
  e.parameter = temperature;
  e.label = format_parameter("T=", temperature);
  e.snapshots.reserve(cfg.shots);
  const auto side = static_cast<std::uint32_t>(cfg.side);
  for (std::size_t k = 0; k < cfg.shots; ++k) {
    if (k > 0)
      for (int d = 0; d < cfg.decorrelation; ++d) sweep();
    const auto spins = lattice.spins();
    e.snapshots.emplace_back(side, side, std::vector<std::int8_t>(spins.begin(), spins.end()));
  }
  return e;
}

Dataset ising_sweep(const IsingConfig& cfg, unsigned threads) {
  if (cfg.side < 2) throw Error(ErrorKind::InvalidConfig, "Ising side must be >= 2");
  if (cfg.shots < 2) throw Error(ErrorKind::InvalidConfig, "need at least 2 shots per setting");
  if (cfg.burn_in < 0 || cfg.decorrelation < 0)
    throw Error(ErrorKind::InvalidConfig, "sweep counts must be non-negative");
  for (std::size_t i = 0; i < cfg.temperatures.size(); ++i) {
    if (!(cfg.temperatures[i] > 0.0)) throw Error(ErrorKind::InvalidConfig, "temperatures must be positive");
    if (i > 0 && !(cfg.temperatures[i] > cfg.temperatures[i - 1]))
      throw Error(ErrorKind::InvalidConfig, "temperatures must be strictly increasing");
  }
  std::vector<SnapshotEnsemble> ensembles(cfg.temperatures.size());
  parallel_for(cfg.temperatures.size(), threads,
               [&](std::size_t i) { ensembles[i] = ising_ensemble(cfg, i); });
  std::map<std::string, std::string> meta{
      {"generator", "ising"},
      {"side", std::to_string(cfg.side)},
      {"algorithm", cfg.algorithm == IsingAlgorithm::Wolff ? "wolff" : "metropolis"},
      {"burn_in", std::to_string(cfg.burn_in)},
      {"decorrelation", std::to_string(cfg.decorrelation)},
      {"seed", std::to_string(cfg.seed)}};
  return Dataset("T", Alphabet::SpinPm1, std::move(ensembles), std::nullopt, std::move(meta));
}

double onsager_critical_temperature() { return 2.0 / std::log(1.0 + std::sqrt(2.0)); }

SnapshotEnsemble toy_two_site(ToyKind kind, std::size_t shots, std::uint64_t seed, double parameter) {
  if (shots < 2) throw Error(ErrorKind::InvalidConfig, "need at least 2 shots");
  Rng rng(seed);
  SnapshotEnsemble e;
  e.parameter = parameter;
  e.label = kind == ToyKind::Anticorrelated ? "anticorrelated" : "uniform";
  e.snapshots.reserve(shots);
  for (std::size_t k = 0; k < shots; ++k) {
    std::vector<std::int8_t> v(2);
    if (kind == ToyKind::Anticorrelated) {
      const bool left = rng.bernoulli(0.5);
      v = {static_cast<std::int8_t>(left ? 1 : 0), static_cast<std::int8_t>(left ? 0 : 1)};
    } else {
      v = {static_cast<std::int8_t>(rng.bernoulli(0.5) ? 1 : 0),
           static_cast<std::int8_t>(rng.bernoulli(0.5) ? 1 : 0)};
    }
    e.snapshots.emplace_back(1, 2, std::move(v));
  }
  return e;
}

}  // namespace snapdm
