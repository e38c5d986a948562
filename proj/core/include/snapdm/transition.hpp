#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snapdm/diffusion_map.hpp"
#include "snapdm/error.hpp"
#include "snapdm/snapshot_store.hpp"

namespace snapdm {

enum class DetectionMethod { TanhFit, ClusterGap };

std::string_view to_string(DetectionMethod m) noexcept;

// Phi_1(p) ~ amplitude * tanh((p - p_c) / width) + offset
struct TransitionReport {
  double p_c = 0.0;
  double width = 1.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double p_c_stderr = 0.0;      // bootstrap spread, 0 until bootstrapped
  double p_c_fit_stderr = 0.0;  // from the Gauss-Newton covariance
  double fit_rss = 0.0;
  DetectionMethod method = DetectionMethod::TanhFit;
  int n_bootstrap = 0;
  int bootstrap_failures = 0;
  int iterations = 0;
};

// Raised when the fit stalls; carries the best iterate found.
class FitError : public Error {
 public:
  FitError(ErrorKind kind, const std::string& message, TransitionReport best)
      : Error(kind, message), best_(best) {}
  const TransitionReport& best() const noexcept { return best_; }

 private:
  TransitionReport best_;
};

struct FitOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-10;
  // |a| below this many residual standard deviations means "no transition".
  double flatness_sigmas = 3.0;
};

double tanh_model(double p, double amplitude, double p_c, double width, double offset) noexcept;

TransitionReport fit_tanh(std::span<const double> parameters, std::span<const double> values,
                          const FitOptions& options = {});

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = 0.0;
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs. Rows of
// `points` are observations.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed);

struct ClusterOptions {
  int k = 2;
  int restarts = 50;
  // Leading embedding coordinates fed to k-means; 0 uses all of them. On a
  // one-parameter sweep the higher coordinates are mostly harmonics of the
  // first, so the default clusters on the first coordinate alone.
  int coordinates = 1;
  std::uint64_t seed = 0;
};

TransitionReport cluster_gap_detect(const EmbeddingResult& emb, const ClusterOptions& options = {});

// Point estimate from an embedding with the chosen method.
TransitionReport detect(const EmbeddingResult& emb, DetectionMethod method, std::uint64_t seed = 0);

struct BootstrapResult {
  double standard_error = 0.0;
  std::vector<double> estimates;  // sorted
  int failures = 0;
};

// Resamples snapshots within each ensemble (with replacement), re-embeds and
// re-detects B times. Replicate r draws from its own stream derived from
// (seed, r), so the result does not depend on thread count.
BootstrapResult bootstrap_pc(const Dataset& ds, const PipelineConfig& cfg, int replicates,
                             std::uint64_t seed, DetectionMethod method = DetectionMethod::TanhFit);

}  // namespace snapdm
