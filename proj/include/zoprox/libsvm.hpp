#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "zoprox/error.hpp"

namespace zoprox {

struct SparseEntry {
  std::uint32_t index = 0;  // 1-based
  double value = 0.0;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

struct SparseRow {
  int label = 0;  // -1 or +1
  std::vector<SparseEntry> features;
  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

struct SparseDataset {
  std::vector<SparseRow> rows;
  std::size_t n_features = 0;

  std::size_t n_samples() const noexcept { return rows.size(); }
  friend bool operator==(const SparseDataset&, const SparseDataset&) = default;
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') {
    tok.remove_prefix(1);
    if (!tok.empty() && (tok.front() == '+' || tok.front() == '-')) return false;
  }
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

inline bool parse_index(std::string_view tok, std::uint32_t& out) {
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline void parse_line(std::string_view line, std::size_t line_no, SparseDataset& out,
                       std::size_t& max_index) {
  if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    if (end > pos) tokens.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  if (tokens.empty()) return;

  SparseRow row;
  double raw_label = 0.0;
  if (!parse_double(tokens[0], raw_label))
    throw ParseError("malformed label '" + std::string(tokens[0]) + "'", line_no);
  if (raw_label == 1.0) {
    row.label = 1;
  } else if (raw_label == -1.0 || raw_label == 0.0) {
    row.label = -1;
  } else {
    throw ParseError("label '" + std::string(tokens[0]) + "' is not in {-1, 0, +1}", line_no);
  }

  std::uint32_t last = 0;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    const std::string_view tok = tokens[t];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos)
      throw ParseError("malformed feature '" + std::string(tok) + "'", line_no);
    SparseEntry e;
    if (!parse_index(tok.substr(0, colon), e.index) || e.index == 0)
      throw ParseError("malformed feature index in '" + std::string(tok) + "'", line_no);
    if (!parse_double(tok.substr(colon + 1), e.value))
      throw ParseError("malformed feature value in '" + std::string(tok) + "'", line_no);
    if (e.index <= last)
      throw ParseError("feature indices must be strictly increasing", line_no);
    last = e.index;
    row.features.push_back(e);
  }
  max_index = std::max<std::size_t>(max_index, last);
  out.rows.push_back(std::move(row));
}

}  // namespace detail

/// Parses LIBSVM text: one "label idx:val idx:val ..." sample per line,
/// 1-based strictly increasing indices, '#' starts a comment, blank lines
/// are skipped. Labels 1/+1 map to +1 and -1/0 map to -1. n_features is the
/// largest index seen unless `n_features` overrides it.
inline SparseDataset parse_libsvm(std::istream& in,
                                  std::optional<std::size_t> n_features = std::nullopt) {
  SparseDataset ds;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::parse_line(line, line_no, ds, max_index);
  }
  if (n_features) {
    if (*n_features < max_index)
      throw InvalidParameter("n_features override " + std::to_string(*n_features) +
                             " is below the largest index " + std::to_string(max_index));
    ds.n_features = *n_features;
  } else {
    ds.n_features = max_index;
  }
  return ds;
}

inline SparseDataset parse_libsvm(std::string_view text,
                                  std::optional<std::size_t> n_features = std::nullopt) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, n_features);
}

/// Canonical text form: "+1"/"-1" labels, shortest round-trip values, LF endings.
inline std::string serialize_libsvm(const SparseDataset& ds) {
  std::string out;
  char buf[64];
  for (const auto& row : ds.rows) {
    out += row.label > 0 ? "+1" : "-1";
    for (const auto& e : row.features) {
      out += ' ';
      out += std::to_string(e.index);
      out += ':';
      const auto res = std::to_chars(buf, buf + sizeof buf, e.value);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace zoprox
