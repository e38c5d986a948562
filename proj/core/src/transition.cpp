#include "snapdm/transition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "snapdm/parallel.hpp"
#include "snapdm/rng.hpp"

namespace snapdm {

std::string_view to_string(DetectionMethod m) noexcept {
  return m == DetectionMethod::TanhFit ? "tanh-fit" : "cluster-gap";
}

double tanh_model(double p, double amplitude, double p_c, double width, double offset) noexcept {
  return amplitude * std::tanh((p - p_c) / width) + offset;
}

namespace {

using Vec4 = Eigen::Vector4d;  // (amplitude, p_c, width, offset)

struct Evaluation {
  Eigen::VectorXd residual;
  Eigen::Matrix<double, Eigen::Dynamic, 4> jacobian;
  double rss = 0.0;
};

Evaluation evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Vec4& theta) {
  const auto n = x.size();
  Evaluation ev;
  ev.residual.resize(n);
  ev.jacobian.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (x[i] - theta[1]) / theta[2];
    const double t = std::tanh(u);
    const double sech2 = 1.0 - t * t;
    ev.residual[i] = theta[0] * t + theta[3] - y[i];
    ev.jacobian(i, 0) = t;
    ev.jacobian(i, 1) = -theta[0] * sech2 / theta[2];
    ev.jacobian(i, 2) = -theta[0] * sech2 * u / theta[2];
    ev.jacobian(i, 3) = 1.0;
  }
  ev.rss = ev.residual.squaredNorm();
  return ev;
}

}  // namespace

TransitionReport fit_tanh(std::span<const double> parameters, std::span<const double> values,
                          const FitOptions& options) {
  const std::size_t n = parameters.size();
  if (values.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "parameters and values differ in length");
  if (n < 5) throw Error(ErrorKind::InvalidConfig, "tanh fit needs at least 5 points");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return parameters[a] < parameters[b]; });
  Eigen::VectorXd p(static_cast<Eigen::Index>(n)), y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    p[static_cast<Eigen::Index>(i)] = parameters[order[i]];
    y[static_cast<Eigen::Index>(i)] = values[order[i]];
    if (i > 0 && !(p[static_cast<Eigen::Index>(i)] > p[static_cast<Eigen::Index>(i - 1)]))
      throw Error(ErrorKind::InvalidConfig, "fit parameters must be distinct");
  }

  // Work in standardized units so tolerances are scale-free.
  const double p_center = 0.5 * (p.maxCoeff() + p.minCoeff());
  const double p_scale = 0.5 * (p.maxCoeff() - p.minCoeff());
  const double y_center = y.mean();
  const double y_scale = std::sqrt((y.array() - y_center).square().sum() / static_cast<double>(n));
  if (!(y_scale > 0.0) || !std::isfinite(y_scale))
    throw Error(ErrorKind::NoTransition, "coordinate is constant across the sweep");
  const Eigen::VectorXd x = (p.array() - p_center) / p_scale;
  const Eigen::VectorXd t = (y.array() - y_center) / y_scale;

  Vec4 theta;
  {
    const double direction = t[t.size() - 1] >= t[0] ? 1.0 : -1.0;
    theta[0] = direction * 0.5 * (t.maxCoeff() - t.minCoeff());
    theta[3] = t.mean();
    theta[1] = 0.0;
    bool found = false;
    for (Eigen::Index i = 0; i + 1 < t.size() && !found; ++i) {
      const double a = t[i] - theta[3];
      const double b = t[i + 1] - theta[3];
      if (a == 0.0) {
        theta[1] = x[i];
        found = true;
      } else if (a * b < 0.0) {
        theta[1] = x[i] + (x[i + 1] - x[i]) * a / (a - b);
        found = true;
      }
    }
    theta[2] = 0.25 * (x.maxCoeff() - x.minCoeff());
  }

  Evaluation current = evaluate(x, t, theta);
  double lambda = 1e-3;
  int iterations = 0;
  bool converged = false;
  for (; iterations < options.max_iterations; ++iterations) {
    const Eigen::Vector4d gradient = current.jacobian.transpose() * current.residual;
    if (gradient.norm() < options.gradient_tolerance) {
      converged = true;
      break;
    }
    const Eigen::Matrix4d jtj = current.jacobian.transpose() * current.jacobian;
    bool improved = false;
    while (!improved) {
      Eigen::Matrix4d damped = jtj;
      for (int k = 0; k < 4; ++k) damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      const Eigen::Vector4d step = damped.ldlt().solve(-gradient);
      const Vec4 trial = theta + step;
      if (trial.allFinite() && trial[2] != 0.0) {
        Evaluation next = evaluate(x, t, trial);
        if (next.rss < current.rss) {
          theta = trial;
          current = std::move(next);
          lambda = std::max(lambda * 0.3, 1e-15);
          improved = true;
          continue;
        }
      }
      lambda *= 10.0;
      if (lambda > 1e16) break;
    }
    if (!improved) {
      // No descent direction left at working precision: a numerical minimum.
      converged = true;
      break;
    }
  }

  if (theta[2] < 0.0) {
    theta[2] = -theta[2];
    theta[0] = -theta[0];
  }

  TransitionReport report;
  report.method = DetectionMethod::TanhFit;
  report.amplitude = theta[0] * y_scale;
  report.p_c = theta[1] * p_scale + p_center;
  report.width = theta[2] * p_scale;
  report.offset = theta[3] * y_scale + y_center;
  report.fit_rss = current.rss * y_scale * y_scale;
  report.iterations = iterations;

  const double dof = static_cast<double>(n) - 4.0;
  const double sigma2 = dof > 0.0 ? current.rss / dof : 0.0;
  {
    Evaluation at = evaluate(x, t, theta);
    const Eigen::Matrix4d jtj = at.jacobian.transpose() * at.jacobian;
    Eigen::FullPivLU<Eigen::Matrix4d> lu(jtj);
    if (lu.isInvertible()) {
      const double var = sigma2 * lu.inverse()(1, 1);
      report.p_c_fit_stderr = var > 0.0 ? std::sqrt(var) * p_scale : 0.0;
    }
  }

  if (!converged)
    throw FitError(ErrorKind::NonConvergence,
                   "tanh fit did not converge in " + std::to_string(options.max_iterations) +
                       " iterations",
                   report);

  const double resid_sd = std::sqrt(sigma2) * y_scale;
  if (!(std::abs(report.amplitude) > options.flatness_sigmas * resid_sd))
    throw FitError(ErrorKind::NoTransition,
                   "fitted amplitude " + std::to_string(report.amplitude) + " is within " +
                       std::to_string(options.flatness_sigmas) + " residual sd (" +
                       std::to_string(resid_sd) + ")",
                   report);
  const double lo = p.minCoeff() - report.width;
  const double hi = p.maxCoeff() + report.width;
  if (!(report.p_c >= lo && report.p_c <= hi))
    throw FitError(ErrorKind::NoTransition,
                   "fitted p_c = " + std::to_string(report.p_c) + " lies outside the sweep", report);
  return report;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 1 || n < k) throw Error(ErrorKind::InvalidConfig, "k-means needs at least k points");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int run = 0; run < std::max(1, restarts); ++run) {
    Rng rng(derive_seed(seed, Stream::KMeans, {static_cast<std::uint64_t>(run)}));
    Eigen::MatrixXd centroids(k, points.cols());
    centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd nearest(n);
    for (int c = 1; c < k; ++c) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) d = std::min(d, (points.row(i) - centroids.row(j)).squaredNorm());
        nearest[i] = d;
      }
      const double total = nearest.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        double target = rng.uniform() * total;
        for (pick = 0; pick < n - 1; ++pick) {
          target -= nearest[pick];
          if (target < 0.0) break;
        }
      } else {
        pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      }
      centroids.row(c) = points.row(pick);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    double inertia = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
          const double dj = (points.row(i) - centroids.row(j)).squaredNorm();
          if (dj < d) {
            d = dj;
            arg = j;
          }
        }
        inertia += d;
        if (labels[static_cast<std::size_t>(i)] != arg) {
          labels[static_cast<std::size_t>(i)] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      for (int j = 0; j < k; ++j) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(points.cols());
        int count = 0;
        for (Eigen::Index i = 0; i < n; ++i)
          if (labels[static_cast<std::size_t>(i)] == j) {
            sum += points.row(i);
            ++count;
          }
        if (count > 0) {
          centroids.row(j) = sum / count;
        } else {
          // Re-seed an empty cluster at the point farthest from its centroid.
          Eigen::Index far = 0;
          double far_d = -1.0;
          for (Eigen::Index i = 0; i < n; ++i) {
            const double di =
                (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
            if (di > far_d) {
              far_d = di;
              far = i;
            }
          }
          centroids.row(j) = points.row(far);
        }
      }
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
      best.centroids = centroids;
    }
  }
  return best;
}

TransitionReport cluster_gap_detect(const EmbeddingResult& emb, const ClusterOptions& options) {
  const int k = options.k;
  const Eigen::Index n = emb.size();
  if (options.coordinates < 0 || options.coordinates > emb.dims())
    throw Error(ErrorKind::InvalidConfig, "cluster coordinates must lie in [0, dims]");
  const Eigen::Index used = options.coordinates == 0 ? emb.dims() : options.coordinates;
  if (n < 2 * k) throw Error(ErrorKind::InvalidConfig, "cluster detection needs at least 2k settings");
  if (emb.parameters.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "embedding has no parameter for every row");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return emb.parameters[a] < emb.parameters[b];
  });
  Eigen::MatrixXd points(n, used);
  Eigen::VectorXd params(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    points.row(i) = emb.coordinates.row(order[static_cast<std::size_t>(i)]).head(used);
    params[i] = emb.parameters[order[static_cast<std::size_t>(i)]];
  }

  const KMeansResult km = kmeans(points, k, options.restarts, options.seed);
  std::vector<Eigen::Index> crossings;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (km.labels[static_cast<std::size_t>(i)] != km.labels[static_cast<std::size_t>(i + 1)])
      crossings.push_back(i);
  if (crossings.empty() || crossings.size() > 2)
    throw Error(ErrorKind::AmbiguousClustering,
                std::to_string(crossings.size()) + " cluster boundaries along the sweep");

  // With two crossings one cluster is an island; take the boundary with the
  // larger jump in embedded space.
  Eigen::Index at = crossings.front();
  double jump = -1.0;
  for (auto c : crossings) {
    const double d = (points.row(c + 1) - points.row(c)).squaredNorm();
    if (d > jump) {
      jump = d;
      at = c;
    }
  }

  const int low_label = km.labels[static_cast<std::size_t>(at)];
  double low_sum = 0.0, high_sum = 0.0;
  int low_count = 0, high_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (km.labels[static_cast<std::size_t>(i)] == low_label) {
      low_sum += points(i, 0);
      ++low_count;
    } else {
      high_sum += points(i, 0);
      ++high_count;
    }
  }
  const double low_mean = low_sum / low_count;
  const double high_mean = high_sum / high_count;

  TransitionReport report;
  report.method = DetectionMethod::ClusterGap;
  report.p_c = 0.5 * (params[at] + params[at + 1]);
  report.width = 0.5 * (params[at + 1] - params[at]);
  report.amplitude = 0.5 * (high_mean - low_mean);
  report.offset = 0.5 * (high_mean + low_mean);
  report.fit_rss = km.inertia;
  return report;
}

TransitionReport detect(const EmbeddingResult& emb, DetectionMethod method, std::uint64_t seed) {
  if (method == DetectionMethod::ClusterGap) {
    ClusterOptions options;
    options.seed = seed;
    return cluster_gap_detect(emb, options);
  }
  const Eigen::VectorXd phi = emb.coordinates.col(0);
  return fit_tanh(std::span(emb.parameters.data(), static_cast<std::size_t>(emb.parameters.size())),
                  std::span(phi.data(), static_cast<std::size_t>(phi.size())));
}

BootstrapResult bootstrap_pc(const Dataset& ds, const PipelineConfig& cfg, int replicates,
                             std::uint64_t seed, DetectionMethod method) {
  if (replicates < 20)
    throw Error(ErrorKind::InvalidConfig, "bootstrap needs at least 20 replicates");
  PipelineConfig inner = cfg;
  inner.threads = 1;

  const auto count = static_cast<std::size_t>(replicates);
  std::vector<double> estimates(count, std::numeric_limits<double>::quiet_NaN());
  parallel_for(count, cfg.threads, [&](std::size_t r) {
    const std::uint64_t replicate_seed = derive_seed(seed, Stream::Bootstrap, {r});
    std::vector<SnapshotEnsemble> resampled;
    resampled.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& src = ds[i];
      Rng rng(derive_seed(replicate_seed, Stream::Bootstrap, {i}));
      SnapshotEnsemble e{src.parameter, src.label, {}};
      e.snapshots.reserve(src.count());
      for (std::size_t j = 0; j < src.count(); ++j)
        e.snapshots.push_back(src.snapshots[rng.below(src.count())]);
      resampled.push_back(std::move(e));
    }
    try {
      const auto out = embed_ensembles(resampled, inner);
      estimates[r] = detect(out.embedding, method, replicate_seed).p_c;
    } catch (const Error&) {
      // counted below
    }
  });

  BootstrapResult result;
  for (double e : estimates) {
    if (std::isnan(e))
      ++result.failures;
    else
      result.estimates.push_back(e);
  }
  if (result.failures * 2 > replicates)
    throw Error(ErrorKind::UnstableDetection, std::to_string(result.failures) + " of " +
                                                  std::to_string(replicates) + " replicates failed");
  std::sort(result.estimates.begin(), result.estimates.end());
  const auto m = static_cast<double>(result.estimates.size());
  if (result.estimates.size() >= 2) {
    const double mean = std::accumulate(result.estimates.begin(), result.estimates.end(), 0.0) / m;
    double ss = 0.0;
    for (double e : result.estimates) ss += (e - mean) * (e - mean);
    result.standard_error = std::sqrt(ss / (m - 1.0));
  }
  return result;
}

}  // namespace snapdm
