#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace simal {

using RowId = std::uint32_t;
using IdSet = std::set<RowId>;

// Read-only view of one bit-packed row. Bits past `n_cols` in the last word
// are always zero.
class RowView {
 public:
  RowView(std::span<const std::uint64_t> words, std::size_t n_cols)
      : words_(words), n_cols_(n_cols) {}

  std::size_t size() const noexcept { return n_cols_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool operator[](std::size_t col) const noexcept {
    return (words_[col >> 6] >> (col & 63)) & 1u;
  }

  std::size_t popcount() const noexcept;

  // Indices of the 1 bits, ascending.
  std::vector<std::uint32_t> active() const;

  std::vector<double> to_dense() const;

 private:
  std::span<const std::uint64_t> words_;
  std::size_t n_cols_;
};

// n x m matrix over {0,1}, stored row-major in 64-bit words.
class BinaryMatrix {
 public:
  BinaryMatrix(std::size_t n_rows, std::size_t n_cols);

  std::size_t rows() const noexcept { return n_rows_; }
  std::size_t cols() const noexcept { return n_cols_; }
  std::size_t words_per_row() const noexcept { return words_per_row_; }

  bool get(std::size_t row, std::size_t col) const;
  void set(std::size_t row, std::size_t col, bool value);

  RowView row(std::size_t r) const;

  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  // Empty, or exactly cols() entries.
  void set_feature_names(std::vector<std::string> names);

  bool operator==(const BinaryMatrix& other) const = default;

 private:
  std::size_t n_rows_;
  std::size_t n_cols_;
  std::size_t words_per_row_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::string> feature_names_;
};

struct GroundTruth {
  IdSet anomaly_ids;
  std::size_t total = 0;

  bool is_anomaly(RowId id) const { return anomaly_ids.contains(id); }
};

// Comma-separated 0/1 cells, LF or CRLF line endings. With `has_header` the
// first line holds feature names. Blank lines are skipped.
BinaryMatrix load_csv(const std::filesystem::path& path, bool has_header);
BinaryMatrix parse_csv(std::string_view text, bool has_header);
// Writes a header line only when the matrix has feature names.
void save_csv(const BinaryMatrix& matrix, const std::filesystem::path& path);
std::string to_csv(const BinaryMatrix& matrix);

// Accepts an index list (one row id per line) or per-row flags (exactly
// `n_rows` lines, each 0 or 1). The flag form is chosen when both readings
// are possible.
GroundTruth load_labels(const std::filesystem::path& path, std::size_t n_rows);
GroundTruth parse_labels(std::string_view text, std::size_t n_rows);
// Index form.
void save_labels(const GroundTruth& truth, const std::filesystem::path& path);

struct SynthConfig {
  std::size_t n_rows = 1000;
  std::size_t n_cols = 64;
  double anomaly_fraction = 0.01;
  double normal_density = 0.1;
  std::size_t anomaly_signature_size = 12;
  double noise_flip_prob = 0.02;
  std::uint64_t seed = 0;

  // Throws ConfigError describing the first violated bound.
  void validate() const;
};

struct SyntheticData {
  BinaryMatrix matrix;
  GroundTruth truth;
  // Feature indices co-activated by every planted anomaly, ascending.
  std::vector<std::uint32_t> signature;
};

// round(anomaly_fraction * n_rows) anomalies (at least one), placed at seeded
// random rows. Normal rows are Bernoulli(normal_density) per bit. Anomaly rows
// get the same background plus the shared signature; then every anomaly bit
// is flipped with probability noise_flip_prob.
SyntheticData generate_synthetic(const SynthConfig& cfg);

}  // namespace simal
