#include "snapdm/snapshot_store.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "snapdm/error.hpp"

namespace snapdm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Alphabet a) noexcept {
  return a == Alphabet::Parity01 ? "parity01" : "spin_pm1";
}

Alphabet parse_alphabet(std::string_view name) {
  if (name == "parity01") return Alphabet::Parity01;
  if (name == "spin_pm1") return Alphabet::SpinPm1;
  throw Error(ErrorKind::AlphabetViolation, "unknown alphabet '" + std::string(name) + "'");
}

bool in_alphabet(Alphabet a, int value) noexcept {
  if (a == Alphabet::Parity01) return value == 0 || value == 1;
  return value == -1 || value == 1;
}

Snapshot::Snapshot(std::uint32_t rows, std::uint32_t cols, std::vector<std::int8_t> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ == 0 || cols_ == 0)
    throw Error(ErrorKind::InvalidDataset, "snapshot dimensions must be positive");
  if (values_.size() != std::size_t{rows_} * cols_)
    throw Error(ErrorKind::ShapeMismatch, "snapshot has " + std::to_string(values_.size()) +
                                              " values, expected " +
                                              std::to_string(std::size_t{rows_} * cols_));
}

Eigen::VectorXd flatten(const Snapshot& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
  const auto vals = s.values();
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

void validate_ensemble(const SnapshotEnsemble& e, Alphabet alphabet,
                       const std::optional<std::vector<std::uint32_t>>& mask) {
  if (e.snapshots.empty())
    throw Error(ErrorKind::InvalidDataset, "ensemble '" + e.label + "' has no snapshots");
  if (e.snapshots.size() < 2)
    throw Error(ErrorKind::InvalidDataset,
                "ensemble '" + e.label + "' needs at least 2 snapshots for a covariance");
  const auto rows = e.rows();
  const auto cols = e.cols();
  std::vector<bool> active(std::size_t{rows} * cols, !mask.has_value());
  if (mask) {
    for (auto site : *mask) {
      if (site >= active.size())
        throw Error(ErrorKind::InvalidDataset, "mask site " + std::to_string(site) + " out of range");
      active[site] = true;
    }
  }
  for (std::size_t k = 0; k < e.snapshots.size(); ++k) {
    const auto& s = e.snapshots[k];
    if (s.rows() != rows || s.cols() != cols)
      throw Error(ErrorKind::ShapeMismatch, "ensemble '" + e.label + "' snapshot " +
                                                std::to_string(k) + " differs in shape");
    const auto vals = s.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const int v = vals[i];
      const bool ok = active[i] ? in_alphabet(alphabet, v) : v == 0;
      if (!ok)
        throw Error(ErrorKind::AlphabetViolation,
                    "ensemble '" + e.label + "' snapshot " + std::to_string(k) + " site " +
                        std::to_string(i) + " reads " + std::to_string(v) + " (alphabet " +
                        std::string(to_string(alphabet)) + ") at blob offset " +
                        std::to_string(kBlobHeaderSize + k * vals.size() + i));
    }
  }
}

Dataset::Dataset(std::string parameter_name, Alphabet alphabet,
                 std::vector<SnapshotEnsemble> ensembles,
                 std::optional<std::vector<std::uint32_t>> mask,
                 std::map<std::string, std::string> metadata)
    : parameter_name_(std::move(parameter_name)),
      alphabet_(alphabet),
      ensembles_(std::move(ensembles)),
      mask_(std::move(mask)),
      metadata_(std::move(metadata)) {
  if (ensembles_.size() < 3)
    throw Error(ErrorKind::InvalidDataset,
                "a sweep needs at least 3 ensembles, got " + std::to_string(ensembles_.size()));
  std::stable_sort(ensembles_.begin(), ensembles_.end(),
                   [](const auto& a, const auto& b) { return a.parameter < b.parameter; });
  if (mask_) {
    std::sort(mask_->begin(), mask_->end());
    mask_->erase(std::unique(mask_->begin(), mask_->end()), mask_->end());
  }
  for (std::size_t i = 0; i < ensembles_.size(); ++i) {
    validate_ensemble(ensembles_[i], alphabet_, mask_);
    if (ensembles_[i].rows() != ensembles_[0].rows() || ensembles_[i].cols() != ensembles_[0].cols())
      throw Error(ErrorKind::ShapeMismatch, "ensemble '" + ensembles_[i].label +
                                                "' differs in snapshot shape from the first");
    if (i > 0 && !(ensembles_[i].parameter > ensembles_[i - 1].parameter))
      throw Error(ErrorKind::InvalidDataset,
                  "duplicate parameter value " + std::to_string(ensembles_[i].parameter));
  }
}

std::vector<double> Dataset::parameters() const {
  std::vector<double> p;
  p.reserve(ensembles_.size());
  for (const auto& e : ensembles_) p.push_back(e.parameter);
  return p;
}

std::string blob_name(std::size_t index) {
  std::ostringstream os;
  os << "ensemble_" << std::setw(4) << std::setfill('0') << index << ".qsnp";
  return os.str();
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((v >> (8 * k)) & 0xff));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
         (std::uint32_t{b[at + 3]} << 24);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_blob(const SnapshotEnsemble& e) {
  const std::uint32_t rows = e.rows();
  const std::uint32_t cols = e.cols();
  std::vector<std::uint8_t> out;
  out.reserve(kBlobHeaderSize + e.count() * rows * cols);
  for (char c : {'Q', 'S', 'N', 'P'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kFormatVersion);
  put_u32(out, rows);
  put_u32(out, cols);
  put_u32(out, static_cast<std::uint32_t>(e.count()));
  for (const auto& s : e.snapshots)
    for (auto v : s.values()) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

DecodedBlob decode_blob(std::span<const std::uint8_t> bytes, std::string_view origin) {
  const std::string where(origin);
  if (bytes.size() < 4 || bytes[0] != 'Q' || bytes[1] != 'S' || bytes[2] != 'N' || bytes[3] != 'P')
    throw Error(ErrorKind::MagicMismatch, where + " at offset 0: expected magic 'QSNP'");
  if (bytes.size() < kBlobHeaderSize)
    throw Error(ErrorKind::TruncatedBlob, where + " at offset " + std::to_string(bytes.size()) +
                                              ": header needs " + std::to_string(kBlobHeaderSize) +
                                              " bytes");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kFormatVersion)
    throw Error(ErrorKind::VersionUnsupported,
                where + " at offset 4: version " + std::to_string(version));
  DecodedBlob blob;
  blob.rows = get_u32(bytes, 6);
  blob.cols = get_u32(bytes, 10);
  const std::uint32_t count = get_u32(bytes, 14);
  if (blob.rows == 0 || blob.cols == 0)
    throw Error(ErrorKind::ShapeMismatch, where + " at offset 6: zero-sized snapshot shape");
  const std::size_t per = std::size_t{blob.rows} * blob.cols;
  const std::size_t need = kBlobHeaderSize + per * count;
  if (bytes.size() < need)
    throw Error(ErrorKind::TruncatedBlob, where + " at offset " + std::to_string(bytes.size()) +
                                              ": payload needs " + std::to_string(need) + " bytes");
  if (bytes.size() > need)
    throw Error(ErrorKind::ShapeMismatch, where + " at offset " + std::to_string(need) + ": " +
                                              std::to_string(bytes.size() - need) +
                                              " trailing bytes");
  blob.snapshots.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto* first = bytes.data() + kBlobHeaderSize + per * k;
    std::vector<std::int8_t> values(per);
    std::transform(first, first + per, values.begin(),
                   [](std::uint8_t b) { return static_cast<std::int8_t>(b); });
    blob.snapshots.emplace_back(blob.rows, blob.cols, std::move(values));
  }
  return blob;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Io, "SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

void write_dataset(const Dataset& ds, const fs::path& dir) {
  // Dataset construction already enforced every invariant, so nothing below
  // can fail on content, only on IO.
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["parameter_name"] = ds.parameter_name();
  manifest["alphabet"] = std::string(to_string(ds.alphabet()));
  manifest["rows"] = ds.rows();
  manifest["cols"] = ds.cols();
  manifest["mask"] = ds.mask() ? json(*ds.mask()) : json(nullptr);
  manifest["metadata"] = json(ds.metadata());
  json ensembles = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& e = ds[i];
    const auto bytes = encode_blob(e);
    const auto name = blob_name(i);
    write_bytes(dir / name, bytes);
    ensembles.push_back({{"parameter", e.parameter},
                         {"label", e.label},
                         {"blob", name},
                         {"count", e.count()},
                         {"sha256", sha256_hex(bytes)}});
  }
  manifest["ensembles"] = std::move(ensembles);

  const std::string text = manifest.dump(2) + "\n";
  write_bytes(dir / kManifestName,
              std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / kManifestName;
  if (!fs::exists(manifest_path))
    throw Error(ErrorKind::MissingFile, "missing manifest " + manifest_path.string());
  json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidDataset, manifest_path.string() + ": " + ex.what());
  }

  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kFormatVersion)
      throw Error(ErrorKind::VersionUnsupported,
                  manifest_path.string() + ": format_version " + std::to_string(version));
    const Alphabet alphabet = parse_alphabet(manifest.at("alphabet").get<std::string>());
    const auto rows = manifest.at("rows").get<std::uint32_t>();
    const auto cols = manifest.at("cols").get<std::uint32_t>();
    std::optional<std::vector<std::uint32_t>> mask;
    if (manifest.contains("mask") && !manifest["mask"].is_null())
      mask = manifest["mask"].get<std::vector<std::uint32_t>>();
    std::map<std::string, std::string> metadata;
    if (manifest.contains("metadata") && manifest["metadata"].is_object())
      metadata = manifest["metadata"].get<std::map<std::string, std::string>>();

    std::vector<SnapshotEnsemble> ensembles;
    for (const auto& entry : manifest.at("ensembles")) {
      const auto name = entry.at("blob").get<std::string>();
      const fs::path blob_path = dir / name;
      if (!fs::exists(blob_path))
        throw Error(ErrorKind::MissingFile, "missing blob " + blob_path.string());
      const auto bytes = read_bytes(blob_path);
      auto blob = decode_blob(bytes, blob_path.string());
      if (blob.rows != rows || blob.cols != cols)
        throw Error(ErrorKind::ShapeMismatch,
                    blob_path.string() + " at offset 6: shape " + std::to_string(blob.rows) + "x" +
                        std::to_string(blob.cols) + " but manifest declares " +
                        std::to_string(rows) + "x" + std::to_string(cols));
      if (entry.contains("count") && entry["count"].get<std::size_t>() != blob.snapshots.size())
        throw Error(ErrorKind::ShapeMismatch,
                    blob_path.string() + " at offset 14: count " +
                        std::to_string(blob.snapshots.size()) + " but manifest declares " +
                        std::to_string(entry["count"].get<std::size_t>()));
      if (entry.contains("sha256") && entry["sha256"].get<std::string>() != sha256_hex(bytes))
        throw Error(ErrorKind::DigestMismatch, blob_path.string() + ": SHA-256 differs from manifest");
      SnapshotEnsemble e{entry.at("parameter").get<double>(), entry.value("label", std::string{}),
                         std::move(blob.snapshots)};
      try {
        validate_ensemble(e, alphabet, mask);
      } catch (const Error& ex) {
        throw Error(ex.kind(), blob_path.string() + ": " + ex.what());
      }
      ensembles.push_back(std::move(e));
    }
    if (ensembles.empty())
      throw Error(ErrorKind::InvalidDataset, manifest_path.string() + ": no ensembles listed");
    return Dataset(manifest.at("parameter_name").get<std::string>(), alphabet, std::move(ensembles),
                   std::move(mask), std::move(metadata));
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidDataset, manifest_path.string() + ": " + ex.what());
  }
}

}  // namespace snapdm
