#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pds/eval.hpp"

namespace pds {

/// Everything a CLI run can be configured with. Keys are dotted paths such as
/// `pds.window` or `trace.wifi_noise_var`; see config_keys().
struct Settings {
  ExperimentConfig experiment;
  std::uint64_t seed = 1;                      // simulate: trace seed
  double simulate_deviation = 0.0;             // m; 0 writes a benign trace
  DetectorSpec detector{"PDS", Mode::All};     // detect / calibrate
  std::optional<double> threshold;             // detect: unset means calibrate first
};

/// All recognised keys in echo order.
std::vector<std::string> config_keys();

/// Throws ConfigError for an unknown key or a value that does not parse.
void set_value(Settings& s, const std::string& key, const std::string& value);
std::string get_value(const Settings& s, const std::string& key);

/// Applies "key=value" (whitespace around either side ignored).
void apply_override(Settings& s, const std::string& assignment);

/// Reads `key = value` lines; '#' starts a comment. Throws ConfigError naming
/// the file and line on a bad entry, and when the file cannot be opened.
void load_config_file(Settings& s, const std::filesystem::path& path);

/// One `key = value` line per key, reloadable with load_config_file.
void write_config(std::ostream& out, const Settings& s);

}  // namespace pds
