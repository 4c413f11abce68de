#include "simal/binary_matrix.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include "simal/errors.h"

namespace simal {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Splits on LF, strips a trailing CR from each line.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

std::size_t RowView::popcount() const noexcept {
  std::size_t n = 0;
  for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::uint32_t> RowView::active() const {
  std::vector<std::uint32_t> out;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t word = words_[w];
    while (word) {
      const int bit = std::countr_zero(word);
      out.push_back(static_cast<std::uint32_t>(w * 64 + bit));
      word &= word - 1;
    }
  }
  return out;
}

std::vector<double> RowView::to_dense() const {
  std::vector<double> out(n_cols_, 0.0);
  for (std::uint32_t j : active()) out[j] = 1.0;
  return out;
}

BinaryMatrix::BinaryMatrix(std::size_t n_rows, std::size_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), words_per_row_((n_cols + 63) / 64) {
  if (n_rows == 0 || n_cols == 0) {
    throw DimensionError("binary matrix needs at least one row and one column");
  }
  bits_.assign(n_rows_ * words_per_row_, 0);
}

bool BinaryMatrix::get(std::size_t row, std::size_t col) const {
  if (row >= n_rows_ || col >= n_cols_) throw RangeError("cell out of range");
  return (bits_[row * words_per_row_ + (col >> 6)] >> (col & 63)) & 1u;
}

void BinaryMatrix::set(std::size_t row, std::size_t col, bool value) {
  if (row >= n_rows_ || col >= n_cols_) throw RangeError("cell out of range");
  std::uint64_t& word = bits_[row * words_per_row_ + (col >> 6)];
  const std::uint64_t mask = std::uint64_t{1} << (col & 63);
  word = value ? (word | mask) : (word & ~mask);
}

RowView BinaryMatrix::row(std::size_t r) const {
  if (r >= n_rows_) throw RangeError("row " + std::to_string(r) + " out of range");
  return RowView({bits_.data() + r * words_per_row_, words_per_row_}, n_cols_);
}

void BinaryMatrix::set_feature_names(std::vector<std::string> names) {
  if (!names.empty() && names.size() != n_cols_) {
    throw DimensionError("expected " + std::to_string(n_cols_) + " feature names, got " +
                         std::to_string(names.size()));
  }
  feature_names_ = std::move(names);
}

BinaryMatrix parse_csv(std::string_view text, bool has_header) {
  const auto lines = split_lines(text);
  std::vector<std::string> names;
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
  bool header_pending = has_header;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    auto cells = split_cells(lines[i]);
    if (header_pending) {
      for (auto c : cells) names.emplace_back(trim(c));
      header_pending = false;
      continue;
    }
    rows.emplace_back(i + 1, std::move(cells));
  }
  if (rows.empty()) throw ParseError("no data rows");

  const std::size_t n_cols = rows.front().second.size();
  if (!names.empty() && names.size() != n_cols) {
    throw DimensionError("header has " + std::to_string(names.size()) + " names but data has " +
                         std::to_string(n_cols) + " columns");
  }
  BinaryMatrix matrix(rows.size(), n_cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& [line_no, cells] = rows[r];
    if (cells.size() != n_cols) {
      throw DimensionError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(n_cols) + " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string_view cell = trim(cells[c]);
      if (cell == "1") {
        matrix.set(r, c, true);
      } else if (cell != "0") {
        throw ParseError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                             ": expected 0 or 1, got '" + std::string(cell) + "'",
                         line_no, c + 1);
      }
    }
  }
  matrix.set_feature_names(std::move(names));
  return matrix;
}

BinaryMatrix load_csv(const std::filesystem::path& path, bool has_header) {
  return parse_csv(read_file(path), has_header);
}

std::string to_csv(const BinaryMatrix& matrix) {
  std::string out;
  out.reserve(matrix.rows() * (matrix.cols() * 2 + 1));
  const auto& names = matrix.feature_names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c) out += ',';
    out += names[c];
  }
  if (!names.empty()) out += '\n';
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    const RowView row = matrix.row(r);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      if (c) out += ',';
      out += row[c] ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

void save_csv(const BinaryMatrix& matrix, const std::filesystem::path& path) {
  write_file(path, to_csv(matrix));
}

GroundTruth parse_labels(std::string_view text, std::size_t n_rows) {
  std::vector<std::pair<std::size_t, std::uint64_t>> values;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw ParseError("line " + std::to_string(i + 1) + ": expected a non-negative integer, got '" +
                           std::string(line) + "'",
                       i + 1, 1);
    }
    values.emplace_back(i + 1, v);
  }

  GroundTruth truth;
  truth.total = n_rows;
  const bool flag_form = n_rows > 0 && values.size() == n_rows &&
                         std::all_of(values.begin(), values.end(),
                                     [](const auto& lv) { return lv.second <= 1; });
  if (flag_form) {
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (values[r].second == 1) truth.anomaly_ids.insert(static_cast<RowId>(r));
    }
    return truth;
  }
  for (const auto& [line_no, v] : values) {
    if (v >= n_rows) {
      throw RangeError("line " + std::to_string(line_no) + ": row index " + std::to_string(v) +
                       " out of range for " + std::to_string(n_rows) + " rows");
    }
    truth.anomaly_ids.insert(static_cast<RowId>(v));
  }
  return truth;
}

GroundTruth load_labels(const std::filesystem::path& path, std::size_t n_rows) {
  return parse_labels(read_file(path), n_rows);
}

void save_labels(const GroundTruth& truth, const std::filesystem::path& path) {
  std::string out;
  for (RowId id : truth.anomaly_ids) {
    out += std::to_string(id);
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace simal
