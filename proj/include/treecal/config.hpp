#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treecal/csv.hpp"
#include "treecal/error.hpp"
#include "treecal/experiments.hpp"

namespace treecal {

// Plain-text configuration: one `key = value` per line, `#` starts a comment.
// Keys keep file order; a repeated key overrides the earlier one.
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream& is) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      std::string_view view(line);
      if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
      view = trim(view);
      if (view.empty()) continue;
      const auto eq = view.find('=');
      if (eq == std::string_view::npos)
        throw parse_error("config: expected 'key = value' (line " + std::to_string(line_no) + ")");
      const auto key = trim(view.substr(0, eq));
      const auto value = trim(view.substr(eq + 1));
      if (key.empty()) throw parse_error("config: empty key (line " + std::to_string(line_no) + ")");
      cfg.set(std::string(key), std::string(value));
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config '" + path + "'");
    return parse(is);
  }

  void set(std::string key, std::string value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = std::move(value);
        return;
      }
    entries_.emplace_back(std::move(key), std::move(value));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

namespace detail {

inline std::uint64_t parse_count(const std::string& key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
    throw config_error(key + ": expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

inline double parse_real(const std::string& key, std::string_view v) {
  double out;
  if (!parse_double(v, out))
    throw config_error(key + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

inline std::vector<double> parse_real_list(const std::string& key, std::string_view v) {
  std::vector<double> out;
  for (auto f : split_fields(v)) out.push_back(parse_real(key, f));
  return out;
}

inline std::vector<std::size_t> parse_count_list(const std::string& key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto f : split_fields(v)) out.push_back(static_cast<std::size_t>(parse_count(key, f)));
  return out;
}

} // namespace detail

// Applies one key to a sweep/qq configuration. Returns false for unknown keys.
inline bool apply_setting(SweepConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "n_train") cfg.n_train = parse_count(key, value);
  else if (key == "n_test") cfg.n_test = parse_count(key, value);
  else if (key == "k") cfg.k = parse_real(key, value);
  else if (key == "betas") cfg.betas = parse_real_list(key, value);
  else if (key == "mtry_values") cfg.mtry_values = parse_count_list(key, value);
  else if (key == "n_trees") cfg.n_trees = parse_count(key, value);
  else if (key == "n_mc") cfg.n_mc = parse_count(key, value);
  else if (key == "seed") cfg.seed = parse_count(key, value);
  else return false;
  return true;
}

inline bool apply_setting(BiasStudyConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "prevalence_targets") cfg.prevalence_targets = parse_real_list(key, value);
  else if (key == "n_train") cfg.n_train = parse_count(key, value);
  else if (key == "n_test") cfg.n_test = parse_count(key, value);
  else if (key == "n_replicates") cfg.n_replicates = parse_count(key, value);
  else if (key == "n_mc") cfg.n_mc = parse_count(key, value);
  else if (key == "k_tolerance") cfg.k_tolerance = parse_real(key, value);
  else if (key == "seed") cfg.seed = parse_count(key, value);
  else return false;
  return true;
}

// Applies every entry; unknown keys are collected into one config_error.
template <typename Config>
void apply_config(Config& cfg, const KeyValueConfig& kv) {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : kv.entries())
    if (!apply_setting(cfg, k, v)) unknown.push_back(k + ": unknown key");
  detail::throw_if_problems("file", unknown);
}

} // namespace treecal
