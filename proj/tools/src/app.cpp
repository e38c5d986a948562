#include "app.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "plot.hpp"
#include "snapdm/diffusion_map.hpp"
#include "snapdm/generators.hpp"
#include "snapdm/observables.hpp"
#include "snapdm/parallel.hpp"
#include "snapdm/snapshot_store.hpp"
#include "snapdm/transition.hpp"
#include "snapdm/version.hpp"
#include "text_io.hpp"

namespace snapdm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 7;
  unsigned threads = default_threads();
  std::string out = "snapdm-out";
  bool no_timestamp = false;
};

struct GenTfimOptions {
  int length = 12;
  std::string lambdas = "0.2:2.0:0.1";
  std::size_t shots = 500;
};

struct GenIsingOptions {
  int side = 16;
  std::string temperatures = "1.5:3.2:0.1";
  std::size_t shots = 500;
  std::string algorithm = "wolff";
  int burn_in = 1000;
  int decorrelation = 5;
};

struct GenToyOptions {
  std::string kind = "anticorrelated";
  std::size_t shots = 500;
  int replicas = 3;
};

struct AnalysisOptions {
  std::string in;
  std::string wavelet = "on";
  std::optional<double> wavelet_exponent;
  std::string wavelet_levels = "full";
  double svd_tol = 1e-3;
  std::optional<int> svd_max_rank;
  std::string epsilon_policy = "knn";
  int epsilon_neighbours = 0;
  std::optional<double> epsilon;
  double epsilon_scale = 1.0;
  double alpha = 1.0;
  double time = 1.0;
  int dims = 3;
  bool dump_matrices = false;
  bool plot = false;
  std::string method = "tanh";
  int bootstrap = 50;
  std::string brane;
  std::optional<std::uint32_t> edge;
  bool nnparity = false;
  std::optional<double> filling;
};

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc{} || result.ptr != end || !std::isfinite(value))
    throw Error(ErrorKind::InvalidConfig, "'" + std::string(text) + "' is not a finite number");
  return value;
}

// Snaps a grid value onto 12 decimals so 0.2 + 3 * 0.1 prints as 0.5.
double snap(double v) { return std::round(v * 1e12) / 1e12; }

PipelineConfig pipeline_config(const AnalysisOptions& o, unsigned threads) {
  PipelineConfig cfg;
  if (o.wavelet != "on" && o.wavelet != "off")
    throw Error(ErrorKind::InvalidConfig, "--wavelet must be on or off");
  cfg.wavelet.enabled = o.wavelet == "on";
  cfg.wavelet.weight_exponent = o.wavelet_exponent;
  if (o.wavelet_levels != "full") {
    const double levels = parse_double(o.wavelet_levels);
    if (levels < 0 || levels != std::floor(levels))
      throw Error(ErrorKind::InvalidConfig, "--wavelet-levels must be a non-negative integer or 'full'");
    cfg.wavelet.levels = static_cast<int>(levels);
  }
  if (!(o.svd_tol > 0.0 && o.svd_tol < 1.0)) throw Error(ErrorKind::InvalidConfig, "--svd-tol must lie in (0, 1)");
  cfg.rank.tolerance = o.svd_tol;
  if (o.svd_max_rank && *o.svd_max_rank < 1) throw Error(ErrorKind::InvalidConfig, "--svd-max-rank must be >= 1");
  cfg.rank.max_rank = o.svd_max_rank;
  if (o.epsilon) {
    if (!(*o.epsilon > 0.0)) throw Error(ErrorKind::InvalidConfig, "--epsilon must be positive");
    cfg.bandwidth.kind = BandwidthPolicy::Kind::Fixed;
    cfg.bandwidth.value = *o.epsilon;
  } else if (o.epsilon_policy == "median") {
    cfg.bandwidth.kind = BandwidthPolicy::Kind::GlobalMedian;
  } else if (o.epsilon_policy == "knn") {
    cfg.bandwidth.kind = BandwidthPolicy::Kind::NeighbourMedian;
  } else {
    throw Error(ErrorKind::InvalidConfig, "--epsilon-policy must be knn or median");
  }
  if (o.epsilon_neighbours < 0) throw Error(ErrorKind::InvalidConfig, "--epsilon-neighbours must be >= 0");
  cfg.bandwidth.neighbours = o.epsilon_neighbours;
  if (!(o.epsilon_scale > 0.0)) throw Error(ErrorKind::InvalidConfig, "--epsilon-scale must be positive");
  cfg.bandwidth.scale = o.epsilon_scale;
  if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw Error(ErrorKind::InvalidConfig, "--alpha must lie in [0, 1]");
  cfg.alpha = o.alpha;
  if (!(o.time >= 0.0)) throw Error(ErrorKind::InvalidConfig, "--time must be non-negative");
  cfg.diffusion_time = o.time;
  if (o.dims < 1) throw Error(ErrorKind::InvalidConfig, "--dims must be >= 1");
  cfg.dims = o.dims;
  cfg.threads = threads;
  return cfg;
}

json describe(const PipelineConfig& cfg, std::size_t settings) {
  json j;
  j["wavelet"] = cfg.wavelet.enabled ? "on" : "off";
  j["wavelet_exponent"] = cfg.wavelet.weight_exponent ? json(*cfg.wavelet.weight_exponent) : json("auto");
  j["wavelet_levels"] = cfg.wavelet.levels ? json(*cfg.wavelet.levels) : json("full");
  j["svd_tol"] = cfg.rank.tolerance;
  j["svd_max_rank"] = cfg.rank.max_rank ? json(*cfg.rank.max_rank) : json(nullptr);
  switch (cfg.bandwidth.kind) {
    case BandwidthPolicy::Kind::GlobalMedian: j["epsilon_policy"] = "median"; break;
    case BandwidthPolicy::Kind::NeighbourMedian: j["epsilon_policy"] = "knn"; break;
    case BandwidthPolicy::Kind::Fixed: j["epsilon_policy"] = "fixed"; break;
  }
  int k = cfg.bandwidth.neighbours;
  if (k == 0 && settings > 0)
    k = std::max(2, static_cast<int>(std::ceil(std::log2(static_cast<double>(settings)))));
  j["epsilon_neighbours"] = k;
  j["epsilon"] = cfg.bandwidth.kind == BandwidthPolicy::Kind::Fixed ? json(cfg.bandwidth.value) : json(nullptr);
  j["epsilon_scale"] = cfg.bandwidth.scale;
  j["alpha"] = cfg.alpha;
  j["time"] = cfg.diffusion_time;
  j["dims"] = cfg.dims;
  return j;
}

json digest_dataset(const fs::path& dir) {
  json digests = json::object();
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() &&
        (entry.path().filename() == kManifestName || entry.path().extension() == ".qsnp"))
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) digests[f.filename().string()] = sha256_file(f);
  return digests;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const Eigen::VectorXd& parameters) {
  std::string csv = "parameter";
  for (Eigen::Index j = 0; j < parameters.size(); ++j) csv += "," + format_number(parameters[j]);
  csv += "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    csv += format_number(parameters[i]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) csv += "," + format_number(m(i, j));
    csv += "\n";
  }
  return csv;
}

std::string embedding_csv(const EmbedOutput& result) {
  const auto& emb = result.embedding;
  std::string csv = "# eigenvalues:";
  for (Eigen::Index k = 0; k < emb.eigenvalues.size(); ++k) csv += " " + format_number(emb.eigenvalues[k]);
  csv += "\n# epsilon: " + format_number(result.kernel.bandwidth) + "\nparameter";
  for (Eigen::Index k = 0; k < emb.dims(); ++k) csv += ",phi" + std::to_string(k + 1);
  csv += "\n";
  for (Eigen::Index i = 0; i < emb.size(); ++i) {
    csv += format_number(emb.parameters[i]);
    for (Eigen::Index k = 0; k < emb.dims(); ++k) csv += "," + format_number(emb.coordinates(i, k));
    csv += "\n";
  }
  return csv;
}

json report_json(const TransitionReport& r) {
  return json{{"method", std::string(to_string(r.method))},
              {"p_c", r.p_c},
              {"width", r.width},
              {"amplitude", r.amplitude},
              {"offset", r.offset},
              {"p_c_stderr", r.p_c_stderr},
              {"p_c_fit_stderr", r.p_c_fit_stderr},
              {"fit_rss", r.fit_rss},
              {"n_bootstrap", r.n_bootstrap},
              {"bootstrap_failures", r.bootstrap_failures},
              {"iterations", r.iterations}};
}

std::vector<DetectionMethod> parse_methods(const std::string& method) {
  if (method == "tanh") return {DetectionMethod::TanhFit};
  if (method == "cluster") return {DetectionMethod::ClusterGap};
  if (method == "both") return {DetectionMethod::TanhFit, DetectionMethod::ClusterGap};
  throw Error(ErrorKind::InvalidConfig, "--method must be tanh, cluster or both");
}

PlotSeries phi1_series(const Dataset& ds, const EmbeddingResult& emb) {
  PlotSeries s;
  s.title = "leading diffusion coordinate";
  s.x_label = ds.parameter_name();
  s.y_label = "phi1";
  for (Eigen::Index i = 0; i < emb.size(); ++i) {
    s.x.push_back(emb.parameters[i]);
    s.y.push_back(emb.dims() > 0 ? emb.coordinates(i, 0) : 0.0);
  }
  return s;
}

// Mutable state of one invocation, serialized to run.json at the end.
class Session {
 public:
  Session(std::string subcommand, const GlobalOptions& g, std::ostream& err)
      : global_(g), err_(err), start_(std::chrono::steady_clock::now()) {
    manifest_["subcommand"] = std::move(subcommand);
    manifest_["version"] = kVersion;
    manifest_["seed"] = g.seed;
    manifest_["threads"] = g.threads;
    manifest_["config"] = json::object();
    manifest_["inputs"] = json::object();
    manifest_["outputs"] = json::object();
  }

  const GlobalOptions& global() const noexcept { return global_; }
  json& manifest() noexcept { return manifest_; }
  fs::path out_dir() const { return global_.out; }

  void prepare_output() { fs::create_directories(global_.out); }

  void write(const std::string& name, const std::string& content, bool digest = true) {
    write_text_file(out_dir() / name, content);
    manifest_["outputs"][name] = digest ? json(sha256_hex(std::span(
                                               reinterpret_cast<const std::uint8_t*>(content.data()), content.size())))
                                        : json(nullptr);
  }

  void plot(const std::string& stem, const PlotSeries& series, std::optional<TransitionReport> report) {
    PlotOptions options;
    options.timestamp = !global_.no_timestamp;
    options.report = std::move(report);
    emit_plot(series, out_dir() / (stem + ".svg"), options);
    manifest_["outputs"][stem + ".svg"] = nullptr;
    manifest_["outputs"][stem + ".csv"] = sha256_file(out_dir() / (stem + ".csv"));
  }

  void progress(const std::string& message) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    err_ << "[" << format_number(std::round(s * 100) / 100) << "s] " << message << '\n';
  }

  void record_error(std::string_view kind, const std::string& message) {
    manifest_["error"] = json{{"kind", std::string(kind)}, {"message", message}};
  }
  void record_error(ErrorKind kind, const std::string& message) { record_error(to_string(kind), message); }

  void finish(int code) {
    manifest_["status"] = code == kExitOk ? "ok" : "error";
    manifest_["exit_code"] = code;
    manifest_["duration_seconds"] =
        global_.no_timestamp ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::error_code ec;
    fs::create_directories(global_.out, ec);
    try {
      write_text_file(out_dir() / "run.json", manifest_.dump(2) + "\n");
    } catch (const std::exception& e) {
      err_ << "snapdm: could not write run.json: " << e.what() << '\n';
    }
  }

 private:
  GlobalOptions global_;
  std::ostream& err_;
  std::chrono::steady_clock::time_point start_;
  json manifest_;
};

Dataset load(Session& s, const AnalysisOptions& o) {
  if (o.in.empty()) throw Error(ErrorKind::InvalidConfig, "--in <dataset dir> is required");
  const fs::path dir = o.in;
  if (!fs::exists(dir / kManifestName))
    throw Error(ErrorKind::MissingFile, (dir / kManifestName).string() + " does not exist");
  s.manifest()["inputs"] = digest_dataset(dir);
  Dataset ds = read_dataset(dir);
  s.progress("loaded " + std::to_string(ds.size()) + " settings of " + std::to_string(ds.rows()) + "x" +
             std::to_string(ds.cols()) + " snapshots from " + dir.string());
  return ds;
}

EmbedOutput do_embed(Session& s, const Dataset& ds, const PipelineConfig& cfg, const AnalysisOptions& o) {
  EmbedOutput result = embed_dataset(ds, cfg);
  s.progress("embedded with epsilon " + format_number(result.kernel.bandwidth));
  s.manifest()["epsilon_used"] = result.kernel.bandwidth;
  s.manifest()["ranks"] = result.ranks;
  s.write("embedding.csv", embedding_csv(result));
  if (o.dump_matrices) {
    s.write("distances.csv", matrix_csv(result.kernel.distances, result.embedding.parameters));
    s.write("kernel.csv", matrix_csv(result.kernel.similarities, result.embedding.parameters));
  }
  return result;
}

struct DetectOutcome {
  std::optional<TransitionReport> primary;  // first successful report
  std::optional<ErrorKind> failure;
};

DetectOutcome do_detect(Session& s, const Dataset& ds, const EmbedOutput& embedded, const PipelineConfig& cfg,
                        const AnalysisOptions& o) {
  const auto methods = parse_methods(o.method);
  if (o.bootstrap != 0 && o.bootstrap < 20)
    throw Error(ErrorKind::InvalidConfig, "--bootstrap must be 0 or at least 20");

  json doc;
  doc["parameter_name"] = ds.parameter_name();
  doc["reports"] = json::array();
  doc["errors"] = json::array();
  DetectOutcome outcome;
  std::vector<TransitionReport> reports;
  for (auto method : methods) {
    try {
      TransitionReport r = detect(embedded.embedding, method, s.global().seed);
      if (o.bootstrap > 0) {
        const auto boot = bootstrap_pc(ds, cfg, o.bootstrap, s.global().seed, method);
        r.p_c_stderr = boot.standard_error;
        r.n_bootstrap = o.bootstrap;
        r.bootstrap_failures = boot.failures;
      }
      s.progress(std::string(to_string(method)) + ": p_c = " + format_number(r.p_c) + " +/- " +
                 format_number(r.p_c_stderr));
      doc["reports"].push_back(report_json(r));
      reports.push_back(r);
      if (!outcome.primary) outcome.primary = r;
    } catch (const Error& e) {
      if (!is_numerical(e.kind())) throw;
      s.progress(std::string(to_string(method)) + " failed: " + e.what());
      doc["errors"].push_back(
          json{{"method", std::string(to_string(method))}, {"kind", std::string(to_string(e.kind()))}, {"message", e.what()}});
      if (!outcome.failure) outcome.failure = e.kind();
      s.record_error(e.kind(), e.what());
    }
  }
  if (reports.size() == 2) {
    const double diff = std::abs(reports[0].p_c - reports[1].p_c);
    const double se = reports[0].p_c_stderr;
    doc["agreement"] = json{{"difference", diff}, {"stderr", se}, {"within_two_stderr", se > 0 && diff <= 2 * se}};
  }
  s.write("transition.json", doc.dump(2) + "\n");
  return outcome;
}

void do_observables(Session& s, const Dataset& ds, const AnalysisOptions& o, bool default_nnparity) {
  std::optional<Region> region;
  if (!o.brane.empty()) {
    if (ds.alphabet() != Alphabet::Parity01)
      throw Error(ErrorKind::InvalidConfig, "--brane needs parity01 data");
    const auto dims = split(o.brane, 'x');
    if (dims.size() > 2) throw Error(ErrorKind::InvalidConfig, "--brane expects LxL or L");
    const double h = parse_double(dims[0]);
    const double w = dims.size() == 2 ? parse_double(dims[1]) : h;
    if (h < 1 || w < 1 || h != std::floor(h) || w != std::floor(w))
      throw Error(ErrorKind::InvalidConfig, "--brane sides must be positive integers");
    region = centered_region(ds.rows(), ds.cols(), static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w));
  }
  const bool nn = o.nnparity || (default_nnparity && !region && !o.edge);
  if (!region && !o.edge && !nn)
    throw Error(ErrorKind::InvalidConfig, "select at least one of --brane, --edge, --nnparity");

  double filling = 0.0;
  if (region) {
    if (o.filling) {
      filling = *o.filling;
    } else {
      double sum = 0.0;
      std::size_t shots = 0;
      for (const auto& e : ds.ensembles()) {
        sum += mean_filling(e, ds.mask()) * static_cast<double>(e.count());
        shots += e.count();
      }
      filling = sum / static_cast<double>(shots);
    }
  }

  std::vector<ObservableSeries> series;
  std::vector<std::vector<std::size_t>> dropped;
  auto add = [&](const std::string& name, auto&& eval, bool track_dropped) {
    ObservableSeries os;
    os.name = name;
    std::vector<std::size_t> drops;
    for (const auto& e : ds.ensembles()) {
      const ObservableValue v = eval(e);
      os.parameters.push_back(e.parameter);
      os.values.push_back(v.value);
      os.stderrs.push_back(v.stderr_of_mean);
      drops.push_back(v.dropped);
    }
    series.push_back(std::move(os));
    dropped.push_back(track_dropped ? std::move(drops) : std::vector<std::size_t>{});
  };
  if (region) add("brane_parity", [&](const SnapshotEnsemble& e) { return brane_parity(e, *region, filling); }, false);
  if (o.edge) add("imbalance", [&](const SnapshotEnsemble& e) { return imbalance(e, *o.edge); }, true);
  if (nn) add("nn_parity", [&](const SnapshotEnsemble& e) { return nn_parity_correlation(e, ds.mask()); }, false);

  std::string csv = "parameter";
  for (std::size_t k = 0; k < series.size(); ++k) {
    csv += "," + series[k].name + "," + series[k].name + "_stderr";
    if (!dropped[k].empty()) csv += "," + series[k].name + "_dropped";
  }
  csv += "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    csv += format_number(ds[i].parameter);
    for (std::size_t k = 0; k < series.size(); ++k) {
      csv += "," + format_number(series[k].values[i]) + "," + format_number(series[k].stderrs[i]);
      if (!dropped[k].empty()) csv += "," + std::to_string(dropped[k][i]);
    }
    csv += "\n";
  }
  s.write("observables.csv", csv);
  if (region) s.manifest()["brane_filling_reference"] = filling;
  s.progress("wrote " + std::to_string(series.size()) + " observable series");

  if (o.plot)
    for (const auto& os : series) {
      PlotSeries ps{os.name, ds.parameter_name(), os.name, os.parameters, os.values};
      s.plot(os.name, ps, std::nullopt);
    }
}

json analysis_config(const AnalysisOptions& o, const PipelineConfig& cfg, std::size_t settings) {
  json j = describe(cfg, settings);
  j["in"] = o.in;
  j["dump_matrices"] = o.dump_matrices;
  j["plot"] = o.plot;
  return j;
}

void add_global(CLI::App& app, GlobalOptions& g) {
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit wall-clock data for byte-identical reruns");
}

void add_embed_options(CLI::App* sub, AnalysisOptions& o) {
  sub->add_option("--in", o.in, "Dataset directory")->required();
  sub->add_option("--wavelet", o.wavelet, "Weighted Haar preprocessing")->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  sub->add_option("--wavelet-exponent", o.wavelet_exponent, "Level weight exponent (default 1 + dim/2)");
  sub->add_option("--wavelet-levels", o.wavelet_levels, "Decomposition depth or 'full'")->capture_default_str();
  sub->add_option("--svd-tol", o.svd_tol, "Relative singular value cutoff")->capture_default_str();
  sub->add_option("--svd-max-rank", o.svd_max_rank, "Cap on the retained rank");
  sub->add_option("--epsilon-policy", o.epsilon_policy, "Kernel width rule: knn or median")
      ->check(CLI::IsMember({"knn", "median"}))
      ->capture_default_str();
  sub->add_option("--epsilon-neighbours", o.epsilon_neighbours, "Neighbour rank for knn (0: max(2, ceil log2 n))")
      ->capture_default_str();
  sub->add_option("--epsilon", o.epsilon, "Fixed kernel width");
  sub->add_option("--epsilon-scale", o.epsilon_scale, "Multiplier on the kernel width")->capture_default_str();
  sub->add_option("--alpha", o.alpha, "Density normalization exponent")->capture_default_str();
  sub->add_option("--time", o.time, "Diffusion time")->capture_default_str();
  sub->add_option("--dims", o.dims, "Embedding dimension")->capture_default_str();
  sub->add_flag("--dump-matrices", o.dump_matrices, "Write distances.csv and kernel.csv");
  sub->add_flag("--plot", o.plot, "Write SVG plots");
}

void add_detect_options(CLI::App* sub, AnalysisOptions& o) {
  sub->add_option("--method", o.method, "Detector")->check(CLI::IsMember({"tanh", "cluster", "both"}))
      ->capture_default_str();
  sub->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates (0 disables)")->capture_default_str();
}

void add_observable_options(CLI::App* sub, AnalysisOptions& o, bool require_in) {
  if (require_in) sub->add_option("--in", o.in, "Dataset directory")->required();
  sub->add_option("--brane", o.brane, "Brane parity over a centred LxL window");
  sub->add_option("--edge", o.edge, "Imbalance across this column");
  sub->add_flag("--nnparity", o.nnparity, "Nearest-neighbour parity correlation");
  sub->add_option("--filling", o.filling, "Reference filling for the brane parity (default: dataset mean)");
}

std::optional<std::string> prescan_out(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--out=", 0) == 0) return args[i].substr(6);
  }
  return std::nullopt;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  if (kind == ErrorKind::InvalidConfig) return kExitUsage;
  if (is_numerical(kind)) return kExitNumerical;
  return kExitData;
}

std::vector<double> parse_sweep(std::string_view text) {
  std::vector<double> values;
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw Error(ErrorKind::InvalidConfig, "sweep must be start:stop:step");
    const double a = parse_double(parts[0]);
    const double b = parse_double(parts[1]);
    const double step = parse_double(parts[2]);
    if (!(step > 0.0) || b < a) throw Error(ErrorKind::InvalidConfig, "sweep needs step > 0 and stop >= start");
    const double span = (b - a) / step;
    if (span > 1e5) throw Error(ErrorKind::InvalidConfig, "sweep has too many points");
    const auto n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) values.push_back(snap(a + static_cast<double>(i) * step));
  } else {
    for (const auto& part : split(text, ',')) values.push_back(parse_double(part));
  }
  if (values.empty()) throw Error(ErrorKind::InvalidConfig, "empty sweep");
  return values;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion-map phase detection from snapshot ensembles", "snapdm"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  GlobalOptions global;
  add_global(app, global);

  GenTfimOptions tfim;
  auto* gen_tfim = app.add_subcommand("gen-tfim", "Sample the transverse-field Ising chain ground state");
  gen_tfim->add_option("--L", tfim.length, "Chain length (4..14)")->capture_default_str();
  gen_tfim->add_option("--lambda", tfim.lambdas, "Coupling sweep start:stop:step")->capture_default_str();
  gen_tfim->add_option("--shots", tfim.shots, "Snapshots per setting")->capture_default_str();

  GenIsingOptions ising;
  auto* gen_ising = app.add_subcommand("gen-ising", "Monte Carlo snapshots of the 2D Ising model");
  gen_ising->add_option("--side", ising.side, "Lattice side")->capture_default_str();
  gen_ising->add_option("--temp", ising.temperatures, "Temperature sweep start:stop:step")->capture_default_str();
  gen_ising->add_option("--shots", ising.shots, "Snapshots per temperature")->capture_default_str();
  gen_ising->add_option("--algo", ising.algorithm, "Update rule")
      ->check(CLI::IsMember({"wolff", "metropolis"}))
      ->capture_default_str();
  gen_ising->add_option("--burn-in", ising.burn_in, "Burn-in sweeps")->capture_default_str();
  gen_ising->add_option("--decorrelation", ising.decorrelation, "Sweeps between stored snapshots")
      ->capture_default_str();

  GenToyOptions toy;
  auto* gen_toy = app.add_subcommand("gen-toy", "Two-site parity toy ensembles");
  gen_toy->add_option("--kind", toy.kind, "Correlation structure")
      ->check(CLI::IsMember({"anticorrelated", "uniform"}))
      ->capture_default_str();
  gen_toy->add_option("--shots", toy.shots, "Snapshots per replica")->capture_default_str();
  gen_toy->add_option("--replicas", toy.replicas, "Independent replicas (one setting each)")->capture_default_str();

  AnalysisOptions analysis;
  auto* embed = app.add_subcommand("embed", "Diffusion-map embedding of a dataset");
  add_embed_options(embed, analysis);
  auto* detect_cmd = app.add_subcommand("detect", "Locate the transition along the sweep");
  add_embed_options(detect_cmd, analysis);
  add_detect_options(detect_cmd, analysis);
  auto* observables = app.add_subcommand("observables", "Physical baseline observables per setting");
  add_observable_options(observables, analysis, true);
  observables->add_flag("--plot", analysis.plot, "Write SVG plots");
  auto* pipeline = app.add_subcommand("pipeline", "embed, detect and observables in one run");
  add_embed_options(pipeline, analysis);
  add_detect_options(pipeline, analysis);
  add_observable_options(pipeline, analysis, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const CLI::App* active = &app;
    for (const auto* sub : app.get_subcommands()) active = sub;
    err << "snapdm: " << e.what() << "\n\n" << active->help();
    if (const auto dir = prescan_out(args)) {
      GlobalOptions g = global;
      g.out = *dir;
      Session s(args.empty() ? std::string() : args.front(), g, err);
      s.manifest()["argv"] = args;
      s.manifest()["error"] = json{{"kind", "UsageError"}, {"message", e.what()}};
      s.finish(kExitUsage);
    }
    return kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  Session session(sub->get_name(), global, err);
  session.manifest()["argv"] = args;
  int code = kExitOk;
  try {
    session.prepare_output();
    auto& config = session.manifest()["config"];
    if (sub == gen_tfim) {
      TfimConfig cfg;
      cfg.length = tfim.length;
      cfg.lambdas = parse_sweep(tfim.lambdas);
      cfg.shots = tfim.shots;
      cfg.seed = global.seed;
      config = json{{"L", cfg.length}, {"lambda", cfg.lambdas}, {"shots", cfg.shots}};
      const Dataset ds = tfim_sweep(cfg, global.threads);
      write_dataset(ds, session.out_dir());
      session.manifest()["outputs"] = digest_dataset(session.out_dir());
      session.progress("wrote " + std::to_string(ds.size()) + " TFIM settings to " + global.out);
    } else if (sub == gen_ising) {
      IsingConfig cfg;
      cfg.side = ising.side;
      cfg.temperatures = parse_sweep(ising.temperatures);
      cfg.shots = ising.shots;
      cfg.burn_in = ising.burn_in;
      cfg.decorrelation = ising.decorrelation;
      cfg.seed = global.seed;
      cfg.algorithm = ising.algorithm == "wolff" ? IsingAlgorithm::Wolff : IsingAlgorithm::Metropolis;
      config = json{{"side", cfg.side},           {"temperatures", cfg.temperatures},
                    {"shots", cfg.shots},         {"algorithm", ising.algorithm},
                    {"burn_in", cfg.burn_in},     {"decorrelation", cfg.decorrelation}};
      const Dataset ds = ising_sweep(cfg, global.threads);
      write_dataset(ds, session.out_dir());
      session.manifest()["outputs"] = digest_dataset(session.out_dir());
      session.progress("wrote " + std::to_string(ds.size()) + " Ising temperatures to " + global.out);
    } else if (sub == gen_toy) {
      if (toy.replicas < 3) throw Error(ErrorKind::InvalidConfig, "--replicas must be at least 3");
      config = json{{"kind", toy.kind}, {"shots", toy.shots}, {"replicas", toy.replicas}};
      const ToyKind kind = toy.kind == "uniform" ? ToyKind::Uniform : ToyKind::Anticorrelated;
      std::vector<SnapshotEnsemble> ensembles;
      for (int r = 0; r < toy.replicas; ++r) {
        auto e = toy_two_site(kind, toy.shots, derive_seed(global.seed, Stream::Toy, {static_cast<std::uint64_t>(r)}),
                              static_cast<double>(r));
        e.label = toy.kind + "-" + std::to_string(r);
        ensembles.push_back(std::move(e));
      }
      const Dataset ds("replica", Alphabet::Parity01, std::move(ensembles), std::nullopt, {{"generator", "toy"}, {"kind", toy.kind}});
      write_dataset(ds, session.out_dir());
      session.manifest()["outputs"] = digest_dataset(session.out_dir());
    } else if (sub == embed || sub == detect_cmd || sub == pipeline) {
      const PipelineConfig cfg = pipeline_config(analysis, global.threads);
      if (sub != embed) parse_methods(analysis.method);
      const Dataset ds = load(session, analysis);
      config = analysis_config(analysis, cfg, ds.size());
      if (sub != embed) {
        config["method"] = analysis.method;
        config["bootstrap"] = analysis.bootstrap;
      }
      const EmbedOutput embedded = do_embed(session, ds, cfg, analysis);
      std::optional<TransitionReport> report;
      if (sub != embed) {
        const auto outcome = do_detect(session, ds, embedded, cfg, analysis);
        report = outcome.primary;
        if (outcome.failure) code = exit_code_for(*outcome.failure);
      }
      if (sub == pipeline) {
        config["brane"] = analysis.brane;
        config["edge"] = analysis.edge ? json(*analysis.edge) : json(nullptr);
        config["nnparity"] = analysis.nnparity || (analysis.brane.empty() && !analysis.edge);
        do_observables(session, ds, analysis, true);
      }
      if (analysis.plot || sub == pipeline) session.plot("phi1", phi1_series(ds, embedded.embedding), report);
    } else if (sub == observables) {
      const Dataset ds = load(session, analysis);
      config = json{{"in", analysis.in},
                    {"brane", analysis.brane},
                    {"edge", analysis.edge ? json(*analysis.edge) : json(nullptr)},
                    {"nnparity", analysis.nnparity},
                    {"filling", analysis.filling ? json(*analysis.filling) : json(nullptr)},
                    {"plot", analysis.plot}};
      do_observables(session, ds, analysis, false);
    }
  } catch (const Error& e) {
    err << "snapdm: " << e.what() << '\n';
    session.record_error(e.kind(), e.what());
    code = exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "snapdm: " << e.what() << '\n';
    session.record_error(ErrorKind::Io, e.what());
    code = kExitData;
  } catch (const std::exception& e) {
    err << "snapdm: " << e.what() << '\n';
    session.record_error("InternalError", e.what());
    code = kExitData;
  }
  session.finish(code);
  return code;
}

}  // namespace snapdm::cli
