#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cpcca/matrix_core.hpp"

namespace cpcca {

enum class MatrixFormat { MatrixMarket, Csv };

struct LoadOptions {
  /// Row-normalize the raw entries before validation.
  bool raw = false;
  double tolerance = kRowSumTolerance;
};

/// ".csv" maps to Csv, everything else to MatrixMarket.
inline MatrixFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? MatrixFormat::Csv : MatrixFormat::MatrixMarket;
}

namespace detail {

/// Shortest representation that parses back to the identical double.
inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline bool parse_double(std::string_view token, double& out) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

inline bool parse_index(std::string_view token, long long& out) {
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

[[noreturn]] inline void parse_error(long long line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what, {line});
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline SparseRowMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  long long line_no = 0;
  if (!std::getline(in, line)) parse_error(1, "empty file");
  ++line_no;
  {
    auto header = split_ws(line);
    auto lower = [](std::string_view s) {
      std::string r(s);
      std::transform(r.begin(), r.end(), r.begin(), [](unsigned char c) { return std::tolower(c); });
      return r;
    };
    if (header.size() < 5 || header[0] != "%%MatrixMarket" || lower(header[1]) != "matrix" ||
        lower(header[2]) != "coordinate" || (lower(header[3]) != "real" && lower(header[3]) != "integer") ||
        lower(header[4]) != "general") {
      parse_error(line_no, "expected '%%MatrixMarket matrix coordinate real general'");
    }
  }
  long long rows = -1;
  long long cols = -1;
  long long nnz = -1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    const auto tok = split_ws(t);
    if (tok.size() != 3 || !parse_index(tok[0], rows) || !parse_index(tok[1], cols) ||
        !parse_index(tok[2], nnz) || rows < 1 || cols < 1 || nnz < 0) {
      parse_error(line_no, "expected size line 'rows cols nnz'");
    }
    break;
  }
  if (rows < 0) parse_error(line_no, "missing size line");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  std::vector<std::pair<long long, long long>> seen;
  seen.reserve(static_cast<std::size_t>(nnz));
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '%') continue;
    const auto tok = split_ws(t);
    long long i = 0;
    long long j = 0;
    double v = 0.0;
    if (tok.size() != 3 || !parse_index(tok[0], i) || !parse_index(tok[1], j) || !parse_double(tok[2], v)) {
      parse_error(line_no, "expected entry 'row col value'");
    }
    if (i < 1 || i > rows || j < 1 || j > cols) parse_error(line_no, "index out of range");
    if (static_cast<long long>(triplets.size()) == nnz) parse_error(line_no, "more entries than declared");
    triplets.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), v);
    seen.emplace_back(i, j);
  }
  if (static_cast<long long>(triplets.size()) != nnz) {
    parse_error(line_no, "declared " + std::to_string(nnz) + " entries, found " + std::to_string(triplets.size()));
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) parse_error(line_no, "duplicate entry");

  SparseRowMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

inline Eigen::MatrixXd parse_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<long long> line_of_row;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = t.find(',', start);
      const auto token = t.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      double v = 0.0;
      if (!parse_double(token, v)) parse_error(line_no, "malformed number '" + std::string(trim(token)) + "'");
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
    line_of_row.push_back(line_no);
  }
  if (rows.empty()) parse_error(1, "empty file");
  const auto n = rows.size();
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r].size() != n) {
      parse_error(line_of_row[r], std::to_string(rows[r].size()) + " columns in a " + std::to_string(n) + "-row matrix");
    }
  }
  Eigen::MatrixXd m(static_cast<Index>(n), static_cast<Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace detail

/// Matrix Market input keeps coordinate-sparse storage, explicit zeros included.
/// CSV input is dense.
inline StochasticMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format,
                                    const LoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) throw Error(ErrorCode::FileNotFound, path.string());
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  if (format == MatrixFormat::MatrixMarket) {
    auto m = detail::parse_matrix_market(in);
    return options.raw ? row_normalize(std::move(m), options.tolerance) : validate(std::move(m), options.tolerance);
  }
  auto m = detail::parse_csv(in);
  return options.raw ? row_normalize(std::move(m), options.tolerance) : validate(std::move(m), options.tolerance);
}

inline StochasticMatrix load_matrix(const std::filesystem::path& path, const LoadOptions& options = {}) {
  return load_matrix(path, format_from_path(path), options);
}

/// Plain rectangular CSV, shortest round-trip formatting.
inline void write_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << detail::shortest(m(i, j));
    }
    out << '\n';
  }
}

inline void save_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_csv(out, m);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline void write_matrix(std::ostream& out, const StochasticMatrix& matrix, MatrixFormat format) {
  const Index n = matrix.dim();
  if (format == MatrixFormat::Csv) {
    write_csv(out, matrix.dense());
    return;
  }
  out << "%%MatrixMarket matrix coordinate real general\n";
  if (const auto* s = matrix.sparse_ptr()) {
    out << n << ' ' << n << ' ' << s->nonZeros() << '\n';
    for (Index i = 0; i < s->outerSize(); ++i) {
      for (SparseRowMatrix::InnerIterator it(*s, i); it; ++it) {
        out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << detail::shortest(it.value()) << '\n';
      }
    }
    return;
  }
  const Eigen::MatrixXd& d = *matrix.dense_ptr();
  const Index nnz = (d.array() != 0.0).count();
  out << n << ' ' << n << ' ' << nnz << '\n';
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (d(i, j) != 0.0) out << i + 1 << ' ' << j + 1 << ' ' << detail::shortest(d(i, j)) << '\n';
    }
  }
}

inline void save_matrix(const StochasticMatrix& matrix, const std::filesystem::path& path, MatrixFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_matrix(out, matrix, format);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline void save_matrix(const StochasticMatrix& matrix, const std::filesystem::path& path) {
  save_matrix(matrix, path, format_from_path(path));
}

}  // namespace cpcca
