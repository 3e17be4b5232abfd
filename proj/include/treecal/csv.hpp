#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "treecal/dataset.hpp"
#include "treecal/error.hpp"

namespace treecal {

// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Parses a full field as a double; returns false on trailing garbage.
inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// Dataset CSV: header x1,...,xd,label[,true_prob].
inline void write_dataset_csv(std::ostream& os, const Dataset& data) {
  for (std::size_t j = 0; j < data.n_features; ++j) os << 'x' << (j + 1) << ',';
  os << "label";
  if (data.true_probs) os << ",true_prob";
  os << '\n';
  std::string line;
  for (std::size_t i = 0; i < data.size(); ++i) {
    line.clear();
    for (double v : data.row(i)) {
      line += format_double(v);
      line += ',';
    }
    line += data.labels[i] ? '1' : '0';
    if (data.true_probs) {
      line += ',';
      line += format_double((*data.true_probs)[i]);
    }
    line += '\n';
    os << line;
  }
}

inline Dataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw parse_error("dataset csv: missing header (line 1)");
  const auto header = split_fields(line);
  Dataset data;
  std::size_t label_col = header.size();
  std::size_t prob_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (name == "label") {
      label_col = c;
    } else if (name == "true_prob") {
      prob_col = c;
    } else if (name == "x" + std::to_string(data.n_features + 1) && label_col == header.size()) {
      ++data.n_features;
    } else {
      throw parse_error("dataset csv: unexpected header column '" + std::string(name) +
                        "' (line 1)");
    }
  }
  if (label_col == header.size()) throw parse_error("dataset csv: no label column (line 1)");
  if (data.n_features == 0) throw parse_error("dataset csv: no feature columns (line 1)");
  if (prob_col != header.size()) data.true_probs.emplace();

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw parse_error("dataset csv: expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()) + " (line " + std::to_string(line_no) + ")");
    for (std::size_t j = 0; j < data.n_features; ++j) {
      double v;
      if (!parse_double(fields[j], v))
        throw parse_error("dataset csv: bad number in x" + std::to_string(j + 1) + " (line " +
                          std::to_string(line_no) + ")");
      data.features.push_back(v);
    }
    const auto lab = trim(fields[label_col]);
    if (lab != "0" && lab != "1")
      throw parse_error("dataset csv: label must be 0 or 1 (line " + std::to_string(line_no) + ")");
    data.labels.push_back(lab == "1" ? 1 : 0);
    if (data.true_probs) {
      double p;
      if (!parse_double(fields[prob_col], p) || !(p >= 0.0 && p <= 1.0))
        throw parse_error("dataset csv: true_prob must be a number in [0,1] (line " +
                          std::to_string(line_no) + ")");
      data.true_probs->push_back(p);
    }
  }
  return data;
}

inline void save_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset_csv(os, data);
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

inline Dataset load_dataset_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_dataset_csv(is);
}

} // namespace treecal
