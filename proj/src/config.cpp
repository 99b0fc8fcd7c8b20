#include "mra/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "mra/errors.hpp"
#include "mra/partition.hpp"

namespace mra {

CalculationMode parse_calculation_mode(const std::string& text) {
  if (text == "build_structure_only") return CalculationMode::build_structure_only;
  if (text == "likelihood") return CalculationMode::likelihood;
  if (text == "prediction") return CalculationMode::prediction;
  if (text == "optimization") return CalculationMode::optimization;
  throw ConfigError("CALCULATION_MODE must be one of likelihood, prediction, optimization, "
                    "build_structure_only; got '" + text + "'");
}

std::string to_string(CalculationMode mode) {
  switch (mode) {
    case CalculationMode::build_structure_only: return "build_structure_only";
    case CalculationMode::likelihood: return "likelihood";
    case CalculationMode::prediction: return "prediction";
    case CalculationMode::optimization: return "optimization";
  }
  return "?";
}

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

class Reader {
 public:
  Reader(std::map<std::string, Entry> entries, std::string origin)
      : entries_(std::move(entries)), origin_(std::move(origin)) {}

  bool has(const std::string& key) const { return entries_.contains(key); }

  const Entry& require(const std::string& key, const std::string& why) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(origin_ + ": missing required key " + key + " (" + why + ")");
    return it->second;
  }

  [[noreturn]] void fail(const std::string& key, const Entry& e, const std::string& msg) const {
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": " + key + ": " + msg);
  }

  double real(const std::string& key, const Entry& e) const {
    double v = 0.0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v))
      fail(key, e, "cannot parse '" + e.value + "' as a finite number");
    return v;
  }

  long long integer(const std::string& key, const Entry& e) const {
    long long v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) fail(key, e, "cannot parse '" + e.value + "' as an integer");
    return v;
  }

  bool flag(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return false;
    if (it->second.value == "true") return true;
    if (it->second.value == "false") return false;
    fail(key, it->second, "must be either \"true\" or \"false\", got '" + it->second.value + "'");
  }

 private:
  std::map<std::string, Entry> entries_;
  std::string origin_;
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "DATA_FILE_NAME", "ELIMINATION_DUPLICATES_FLAG", "OFFSET", "NUM_PARTITIONS_J",
      "NUM_KNOTS_r", "NUM_LEVELS_M", "PRINT_DETAIL_FLAG", "CALCULATION_MODE",
      "PREDICTION_LOCATION_MODE", "PREDICTION_LOCATION_FILE", "DUMP_PREDICTION_RESULTS_FLAG",
      "PREDICTION_RESULTS_FILE_NAME", "SAVE_TO_DISK_FLAG", "TMP_DIRECTORY",
      "DYNAMIC_SCHEDULE_FLAG", "ALPHA", "BETA", "TAU", "MAX_ITERATIONS",
      "ALPHA_LOWER_BOUND", "BETA_LOWER_BOUND", "TAU_LOWER_BOUND",
      "ALPHA_UPPER_BOUND", "BETA_UPPER_BOUND", "TAU_UPPER_BOUND",
      "ALPHA_INITIAL_GUESS", "BETA_INITIAL_GUESS", "TAU_INITIAL_GUESS"};
  return keys;
}

}  // namespace

Config parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected KEY = VALUE, got '" +
                        line + "'");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
        value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    if (!known_keys().contains(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (value.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + key + ": empty value");
    if (entries.contains(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + key +
                        ": duplicate key (first set on line " +
                        std::to_string(entries[key].line) + ")");
    entries[key] = Entry{value, line_no};
  }

  Reader r(std::move(entries), origin);
  Config cfg;
  const std::string always = "needed by every mode";

  {
    const auto& e = r.require("CALCULATION_MODE", always);
    try {
      cfg.mode = parse_calculation_mode(e.value);
    } catch (const ConfigError& err) {
      r.fail("CALCULATION_MODE", e, err.what());
    }
  }
  cfg.data_file = r.require("DATA_FILE_NAME", always).value;
  cfg.eliminate_duplicates = r.flag("ELIMINATION_DUPLICATES_FLAG");
  cfg.print_detail = r.flag("PRINT_DETAIL_FLAG");
  cfg.save_to_disk = r.flag("SAVE_TO_DISK_FLAG");
  cfg.dynamic_schedule = r.flag("DYNAMIC_SCHEDULE_FLAG");
  cfg.dump_predictions = r.flag("DUMP_PREDICTION_RESULTS_FLAG");

  cfg.offset = kDefaultOffset;
  if (r.has("OFFSET")) {
    const auto& e = r.require("OFFSET", always);
    if (e.value != "default") {
      cfg.offset = r.real("OFFSET", e);
      if (!(cfg.offset > 0.0 && cfg.offset < 0.5))
        r.fail("OFFSET", e, "must lie in (0, 0.5) or be \"default\"");
    }
  }
  {
    const auto& e = r.require("NUM_PARTITIONS_J", always);
    const auto j = r.integer("NUM_PARTITIONS_J", e);
    if (j != 2 && j != 4) r.fail("NUM_PARTITIONS_J", e, "requires to be either 2 or 4");
    cfg.partitions = static_cast<int>(j);
  }
  {
    const auto& e = r.require("NUM_KNOTS_r", always);
    const auto k = r.integer("NUM_KNOTS_r", e);
    if (k < 1 || k > 1000000) r.fail("NUM_KNOTS_r", e, "must be a positive integer");
    cfg.knots = static_cast<int>(k);
  }
  {
    const auto& e = r.require("NUM_LEVELS_M", always);
    if (e.value != "default") {
      const auto m = r.integer("NUM_LEVELS_M", e);
      if (m < 1 || m > 64) r.fail("NUM_LEVELS_M", e, "must be a positive integer or \"default\"");
      cfg.levels = static_cast<int>(m);
    }
  }
  if (cfg.save_to_disk) cfg.tmp_directory = r.require("TMP_DIRECTORY", "SAVE_TO_DISK_FLAG = true").value;

  const std::string mode_name = "CALCULATION_MODE = " + to_string(cfg.mode);
  auto positive = [&](const std::string& key, bool allow_zero) {
    const auto& e = r.require(key, mode_name);
    const double v = r.real(key, e);
    if (allow_zero ? v < 0.0 : v <= 0.0)
      r.fail(key, e, allow_zero ? "must be non-negative" : "must be positive");
    return v;
  };

  if (cfg.mode == CalculationMode::likelihood || cfg.mode == CalculationMode::prediction) {
    cfg.params = {positive("ALPHA", false), positive("BETA", false), positive("TAU", true)};
  }
  if (cfg.mode == CalculationMode::prediction) {
    const auto& e = r.require("PREDICTION_LOCATION_MODE", mode_name);
    try {
      cfg.location_mode = parse_location_mode(e.value);
    } catch (const ConfigError& err) {
      r.fail("PREDICTION_LOCATION_MODE", e, err.what());
    }
    if (cfg.location_mode == LocationMode::location_file)
      cfg.location_file = r.require("PREDICTION_LOCATION_FILE", "PREDICTION_LOCATION_MODE = A").value;
    if (cfg.dump_predictions)
      cfg.results_file =
          r.require("PREDICTION_RESULTS_FILE_NAME", "DUMP_PREDICTION_RESULTS_FLAG = true").value;
  }
  if (cfg.mode == CalculationMode::optimization) {
    const auto& e = r.require("MAX_ITERATIONS", mode_name);
    const auto iters = r.integer("MAX_ITERATIONS", e);
    if (iters < 1) r.fail("MAX_ITERATIONS", e, "must be a positive integer");
    cfg.max_iterations = static_cast<int>(iters);

    const char* names[3] = {"ALPHA", "BETA", "TAU"};
    double* lower[3] = {&cfg.lower_bound.alpha, &cfg.lower_bound.beta, &cfg.lower_bound.tau};
    double* upper[3] = {&cfg.upper_bound.alpha, &cfg.upper_bound.beta, &cfg.upper_bound.tau};
    double* guess[3] = {&cfg.initial_guess.alpha, &cfg.initial_guess.beta, &cfg.initial_guess.tau};
    for (int i = 0; i < 3; ++i) {
      const std::string base = names[i];
      const bool tau = i == 2;
      *lower[i] = positive(base + "_LOWER_BOUND", tau);
      *upper[i] = positive(base + "_UPPER_BOUND", tau);
      *guess[i] = positive(base + "_INITIAL_GUESS", tau);
      const auto& ue = r.require(base + "_UPPER_BOUND", mode_name);
      if (!(*lower[i] < *upper[i]))
        r.fail(base + "_UPPER_BOUND", ue, "must exceed " + base + "_LOWER_BOUND");
      const auto& ge = r.require(base + "_INITIAL_GUESS", mode_name);
      if (*guess[i] < *lower[i] || *guess[i] > *upper[i])
        r.fail(base + "_INITIAL_GUESS", ge, "must lie within the bounds");
    }
    cfg.params = cfg.initial_guess;
  }
  return cfg;
}

Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace mra
