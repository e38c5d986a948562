#pragma once

// Snapshot data model and the on-disk dataset format.
//
// A dataset directory holds `dataset.json` plus one binary blob per
// ensemble:
//
//   offset  size  field
//   0       4     magic "QSNP"
//   4       2     version (u16 LE) = 1
//   6       4     rows  (u32 LE)
//   10      4     cols  (u32 LE)
//   14      4     count (u32 LE)
//   18      ...   count*rows*cols signed bytes, snapshot-major, row-major

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace snapdm {

enum class Alphabet { Parity01, SpinPm1 };

std::string_view to_string(Alphabet a) noexcept;
Alphabet parse_alphabet(std::string_view name);
bool in_alphabet(Alphabet a, int value) noexcept;

// One projective measurement on a rows x cols grid.
class Snapshot {
 public:
  Snapshot(std::uint32_t rows, std::uint32_t cols, std::vector<std::int8_t> values);

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const std::int8_t> values() const noexcept { return values_; }
  int at(std::uint32_t r, std::uint32_t c) const { return values_[std::size_t{r} * cols_ + c]; }

  friend bool operator==(const Snapshot&, const Snapshot&) = default;

 private:
  std::uint32_t rows_;
  std::uint32_t cols_;
  std::vector<std::int8_t> values_;
};

// Row-major real vector of the site readings.
Eigen::VectorXd flatten(const Snapshot& s);

// All snapshots taken at one value of the control parameter.
struct SnapshotEnsemble {
  double parameter = 0.0;
  std::string label;
  std::vector<Snapshot> snapshots;

  std::size_t count() const noexcept { return snapshots.size(); }
  std::uint32_t rows() const { return snapshots.front().rows(); }
  std::uint32_t cols() const { return snapshots.front().cols(); }

  friend bool operator==(const SnapshotEnsemble&, const SnapshotEnsemble&) = default;
};

// Throws InvalidDataset unless the ensemble is non-empty, has >= 2 shots of
// one shape, and every active reading is in the alphabet (masked sites must
// read 0).
void validate_ensemble(const SnapshotEnsemble& e, Alphabet alphabet,
                       const std::optional<std::vector<std::uint32_t>>& mask = std::nullopt);

// A parameter sweep. Construction validates and sorts by parameter.
class Dataset {
 public:
  Dataset(std::string parameter_name, Alphabet alphabet, std::vector<SnapshotEnsemble> ensembles,
          std::optional<std::vector<std::uint32_t>> mask = std::nullopt,
          std::map<std::string, std::string> metadata = {});

  const std::string& parameter_name() const noexcept { return parameter_name_; }
  Alphabet alphabet() const noexcept { return alphabet_; }
  const std::vector<SnapshotEnsemble>& ensembles() const noexcept { return ensembles_; }
  const SnapshotEnsemble& operator[](std::size_t i) const { return ensembles_[i]; }
  std::size_t size() const noexcept { return ensembles_.size(); }
  std::uint32_t rows() const { return ensembles_.front().rows(); }
  std::uint32_t cols() const { return ensembles_.front().cols(); }
  const std::optional<std::vector<std::uint32_t>>& mask() const noexcept { return mask_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
  std::vector<double> parameters() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::string parameter_name_;
  Alphabet alphabet_;
  std::vector<SnapshotEnsemble> ensembles_;
  std::optional<std::vector<std::uint32_t>> mask_;
  std::map<std::string, std::string> metadata_;
};

inline constexpr std::string_view kManifestName = "dataset.json";
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kBlobHeaderSize = 18;

std::string blob_name(std::size_t index);

// Encodes one ensemble as a blob (header + payload).
std::vector<std::uint8_t> encode_blob(const SnapshotEnsemble& e);

struct DecodedBlob {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<Snapshot> snapshots;
};

// `origin` names the file in error messages.
DecodedBlob decode_blob(std::span<const std::uint8_t> bytes, std::string_view origin);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace snapdm
