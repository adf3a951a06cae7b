#include "pds/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "pds/error.hpp"

namespace pds {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": '" + text + "' is not a number");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const double v = parse_number(key, text);
  if (v != static_cast<double>(static_cast<long long>(v)))
    throw ConfigError(key + ": '" + text + "' is not an integer");
  return static_cast<long long>(v);
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  const long long v = parse_integer(key, text);
  if (v < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError(key + ": '" + text + "' is not true/false");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

template <class Vec>
std::string fmt_vec(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v(i));
  return out;
}

// A single number fills every component.
template <class Vec>
Vec parse_vec(const std::string& key, const std::string& text) {
  const auto items = split_list(text);
  Vec v;
  if (items.size() == 1) {
    v.setConstant(parse_number(key, items[0]));
  } else if (static_cast<Eigen::Index>(items.size()) == v.size()) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      v(i) = parse_number(key, items[static_cast<std::size_t>(i)]);
  } else {
    throw ConfigError(key + ": expected 1 or " + std::to_string(v.size()) + " values");
  }
  return v;
}

const char* kernel_name(KernelKind k) { return k == KernelKind::Rbf ? "RBF" : "TRICUBE"; }

KernelKind kernel_from(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "RBF") return KernelKind::Rbf;
  if (t == "TRICUBE") return KernelKind::Tricube;
  throw ConfigError(key + ": unknown kernel '" + text + "'");
}

struct Field {
  std::function<std::string(const Settings&)> get;
  std::function<void(Settings&, const std::string&)> set;
};

// Registration keeps insertion order for the echo.
class Registry {
 public:
  void add(const std::string& key, Field f) {
    order_.push_back(key);
    fields_.emplace(key, std::move(f));
  }

  // Lens: a function returning a reference into Settings.
  template <class Lens>
  void number(const std::string& key, Lens lens) {
    add(key, {[lens](const Settings& s) { return fmt(lens(const_cast<Settings&>(s))); },
              [lens, key](Settings& s, const std::string& v) { lens(s) = parse_number(key, v); }});
  }
  template <class Lens>
  void integer(const std::string& key, Lens lens) {
    add(key, {[lens](const Settings& s) { return std::to_string(lens(const_cast<Settings&>(s))); },
              [lens, key](Settings& s, const std::string& v) {
                using T = std::remove_reference_t<decltype(lens(s))>;
                if constexpr (std::is_unsigned_v<T>)
                  lens(s) = static_cast<T>(parse_unsigned(key, v));
                else
                  lens(s) = static_cast<T>(parse_integer(key, v));
              }});
  }
  template <class Vec, class Lens>
  void vector(const std::string& key, Lens lens) {
    add(key, {[lens](const Settings& s) { return fmt_vec(lens(const_cast<Settings&>(s))); },
              [lens, key](Settings& s, const std::string& v) { lens(s) = parse_vec<Vec>(key, v); }});
  }
  template <class Lens>
  void kernel(const std::string& prefix, Lens lens) {
    add(prefix + ".kind",
        {[lens](const Settings& s) { return std::string(kernel_name(lens(const_cast<Settings&>(s)).kind)); },
         [lens, prefix](Settings& s, const std::string& v) { lens(s).kind = kernel_from(prefix + ".kind", v); }});
    number(prefix + ".bandwidth", [lens](Settings& s) -> double& { return lens(s).bandwidth; });
  }

  const Field& at(const std::string& key) const {
    const auto it = fields_.find(key);
    if (it == fields_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }
  const std::vector<std::string>& order() const { return order_; }

 private:
  std::vector<std::string> order_;
  std::map<std::string, Field> fields_;
};

const Registry& registry() {
  static const Registry r = [] {
    Registry r;
    r.integer("seed", [](Settings& s) -> std::uint64_t& { return s.seed; });

    r.number("trace.duration", [](Settings& s) -> double& { return s.experiment.trace.duration; });
    r.number("trace.gnss_rate", [](Settings& s) -> double& { return s.experiment.trace.gnss_rate; });
    r.number("trace.imu_rate", [](Settings& s) -> double& { return s.experiment.trace.imu_rate; });
    r.number("trace.gnss_noise_var", [](Settings& s) -> double& { return s.experiment.trace.gnss_noise_var; });
    r.number("trace.wifi_noise_var", [](Settings& s) -> double& { return s.experiment.trace.wifi_noise_var; });
    r.number("trace.cell_noise_var", [](Settings& s) -> double& { return s.experiment.trace.cell_noise_var; });
    r.number("trace.unavailability", [](Settings& s) -> double& { return s.experiment.trace.unavailability; });
    r.integer("trace.anchor_count", [](Settings& s) -> int& { return s.experiment.trace.anchor_count; });
    r.number("trace.anchor_offset", [](Settings& s) -> double& { return s.experiment.trace.anchor_offset; });
    r.number("trace.anchor_jitter", [](Settings& s) -> double& { return s.experiment.trace.anchor_jitter; });
    r.number("trace.wifi_tx_power", [](Settings& s) -> double& { return s.experiment.trace.wifi_tx_power; });
    r.number("trace.cell_tx_power", [](Settings& s) -> double& { return s.experiment.trace.cell_tx_power; });
    r.number("trace.path_loss_exponent",
             [](Settings& s) -> double& { return s.experiment.trace.path_loss_exponent; });
    r.number("trace.speed", [](Settings& s) -> double& { return s.experiment.trace.speed; });
    r.number("trace.yaw_rate", [](Settings& s) -> double& { return s.experiment.trace.yaw_rate; });
    r.add("trace.shape", {[](const Settings& s) { return std::string(to_string(s.experiment.shape)); },
                          [](Settings& s, const std::string& v) {
                            try {
                              s.experiment.shape = shape_from_string(trim(v));
                            } catch (const Error& e) {
                              throw ConfigError(std::string("trace.shape: ") + e.what());
                            }
                          }});

    r.number("drift.accel_noise_sd", [](Settings& s) -> double& { return s.experiment.drift.accel_noise_sd; });
    r.number("drift.accel_bias_sd", [](Settings& s) -> double& { return s.experiment.drift.accel_bias_sd; });
    r.number("drift.accel_bias_walk", [](Settings& s) -> double& { return s.experiment.drift.accel_bias_walk; });
    r.number("drift.vel_noise_sd", [](Settings& s) -> double& { return s.experiment.drift.vel_noise_sd; });
    r.number("drift.vel_bias_sd", [](Settings& s) -> double& { return s.experiment.drift.vel_bias_sd; });
    r.number("drift.vel_bias_walk", [](Settings& s) -> double& { return s.experiment.drift.vel_bias_walk; });
    r.vector<Vec3>("drift.accel_bias_offset",
                   [](Settings& s) -> Vec3& { return s.experiment.drift.accel_bias_offset; });
    r.vector<Vec3>("drift.vel_bias_offset", [](Settings& s) -> Vec3& { return s.experiment.drift.vel_bias_offset; });

    r.number("attack.onset", [](Settings& s) -> double& { return s.experiment.attack.onset; });
    r.number("attack.stage1_duration", [](Settings& s) -> double& { return s.experiment.attack.stage1_duration; });
    r.number("attack.growth_rate", [](Settings& s) -> double& { return s.experiment.attack.growth_rate; });
    r.number("attack.profile_fraction", [](Settings& s) -> double& { return s.experiment.profile_fraction; });
    r.number("simulate.deviation", [](Settings& s) -> double& { return s.simulate_deviation; });

    r.add("pds.mode", {[](const Settings& s) { return std::string(to_string(s.experiment.pds.mode)); },
                       [](Settings& s, const std::string& v) {
                         try {
                           s.experiment.pds.mode = mode_from_string(trim(v));
                         } catch (const Error& e) {
                           throw ConfigError(std::string("pds.mode: ") + e.what());
                         }
                       }});
    r.number("pds.window", [](Settings& s) -> double& { return s.experiment.pds.window; });
    r.number("pds.pfp_max", [](Settings& s) -> double& { return s.experiment.pds.pfp_max; });
    r.integer("pds.poly_order", [](Settings& s) -> int& { return s.experiment.pds.poly_order; });
    r.vector<Vec2>("pds.epsilon", [](Settings& s) -> Vec2& { return s.experiment.pds.epsilon; });
    r.kernel("pds.fit_kernel", [](Settings& s) -> KernelSpec& { return s.experiment.pds.fit_kernel; });
    r.kernel("pds.temporal_kernel", [](Settings& s) -> KernelSpec& { return s.experiment.pds.temporal_kernel; });
    static const char* const kSourceNames[kSourceCount] = {"gnss", "wifi", "cellular"};
    for (std::size_t m = 0; m < kSourceCount; ++m) {
      const std::string p = std::string("pds.covariance.") + kSourceNames[m];
      r.number(p + ".length_scale",
               [m](Settings& s) -> double& { return s.experiment.pds.covariance[m].length_scale; });
      r.number(p + ".variance_scale",
               [m](Settings& s) -> double& { return s.experiment.pds.covariance[m].variance_scale; });
      r.number(p + ".nugget", [m](Settings& s) -> double& { return s.experiment.pds.covariance[m].nugget; });
    }
    r.integer("pds.readmit_after", [](Settings& s) -> int& { return s.experiment.pds.readmit_after; });
    r.number("pds.drift_rate", [](Settings& s) -> double& { return s.experiment.pds.drift_rate; });
    r.number("pds.stand_in_gate", [](Settings& s) -> double& { return s.experiment.pds.stand_in_gate; });
    r.number("pds.bias_time_constant", [](Settings& s) -> double& { return s.experiment.pds.bias_time_constant; });
    r.number("pds.align_tolerance", [](Settings& s) -> double& { return s.experiment.pds.align_tolerance; });
    r.number("pds.min_sigma", [](Settings& s) -> double& { return s.experiment.pds.min_sigma; });

    for (std::size_t m = 0; m < kSourceCount; ++m)
      r.number(std::string("baselines.source_var.") + kSourceNames[m],
               [m](Settings& s) -> double& { return s.experiment.baselines.source_var[m]; });
    r.number("baselines.ekf.accel_psd", [](Settings& s) -> double& { return s.experiment.baselines.ekf.accel_psd; });
    r.number("baselines.ekf.gnss_var", [](Settings& s) -> double& { return s.experiment.baselines.ekf.gnss_var; });
    r.number("baselines.ekf.velocity_var",
             [](Settings& s) -> double& { return s.experiment.baselines.ekf.velocity_var; });
    r.integer("baselines.pf.particles", [](Settings& s) -> int& { return s.experiment.baselines.pf.particles; });
    r.number("baselines.pf.diffusion_sd",
             [](Settings& s) -> double& { return s.experiment.baselines.pf.diffusion_sd; });
    r.number("baselines.pf.obs_var", [](Settings& s) -> double& { return s.experiment.baselines.pf.obs_var; });
    r.number("baselines.pf.reinit_spread",
             [](Settings& s) -> double& { return s.experiment.baselines.pf.reinit_spread; });
    r.number("baselines.displacement_var",
             [](Settings& s) -> double& { return s.experiment.baselines.displacement_var; });
    r.number("baselines.warmup", [](Settings& s) -> double& { return s.experiment.baselines.warmup; });

    r.add("eval.detectors", {[](const Settings& s) {
                               std::string out;
                               for (const DetectorSpec& d : s.experiment.detectors)
                                 out += (out.empty() ? "" : ",") + to_string(d);
                               return out;
                             },
                             [](Settings& s, const std::string& v) {
                               std::vector<DetectorSpec> ds;
                               try {
                                 for (const std::string& item : split_list(v)) ds.push_back(parse_detector_spec(item));
                               } catch (const Error& e) {
                                 throw ConfigError(std::string("eval.detectors: ") + e.what());
                               }
                               s.experiment.detectors = std::move(ds);
                             }});
    auto list = [&r](const std::string& key, auto lens) {
      r.add(key, {[lens](const Settings& s) { return fmt_list(lens(const_cast<Settings&>(s))); },
                  [lens, key](Settings& s, const std::string& v) {
                    std::vector<double> out;
                    for (const std::string& item : split_list(v)) out.push_back(parse_number(key, item));
                    lens(s) = std::move(out);
                  }});
    };
    list("eval.deviations", [](Settings& s) -> std::vector<double>& { return s.experiment.deviations; });
    list("eval.pfp_max", [](Settings& s) -> std::vector<double>& { return s.experiment.pfp_max; });
    r.integer("eval.seeds", [](Settings& s) -> int& { return s.experiment.seeds; });
    r.integer("eval.first_seed", [](Settings& s) -> std::uint64_t& { return s.experiment.first_seed; });
    r.integer("eval.calibration_traces", [](Settings& s) -> int& { return s.experiment.calibration_traces; });
    r.integer("eval.calibration_seed", [](Settings& s) -> std::uint64_t& { return s.experiment.calibration_seed; });
    r.add("eval.label_stage1",
          {[](const Settings& s) { return std::string(s.experiment.label_stage1 ? "true" : "false"); },
           [](Settings& s, const std::string& v) { s.experiment.label_stage1 = parse_bool("eval.label_stage1", v); }});
    r.integer("eval.threads", [](Settings& s) -> unsigned& { return s.experiment.threads; });

    r.add("detect.detector", {[](const Settings& s) { return to_string(s.detector); },
                              [](Settings& s, const std::string& v) {
                                try {
                                  s.detector = parse_detector_spec(trim(v));
                                } catch (const Error& e) {
                                  throw ConfigError(std::string("detect.detector: ") + e.what());
                                }
                              }});
    r.add("detect.threshold", {[](const Settings& s) { return s.threshold ? fmt(*s.threshold) : "auto"; },
                               [](Settings& s, const std::string& v) {
                                 if (trim(v) == "auto")
                                   s.threshold.reset();
                                 else
                                   s.threshold = parse_number("detect.threshold", v);
                               }});
    return r;
  }();
  return r;
}

}  // namespace

std::vector<std::string> config_keys() { return registry().order(); }

void set_value(Settings& s, const std::string& key, const std::string& value) {
  registry().at(key).set(s, value);
}

std::string get_value(const Settings& s, const std::string& key) { return registry().at(key).get(s); }

void apply_override(Settings& s, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_value(s, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void load_config_file(Settings& s, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    try {
      apply_override(s, line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void write_config(std::ostream& out, const Settings& s) {
  for (const std::string& key : registry().order()) out << key << " = " << get_value(s, key) << '\n';
}

}  // namespace pds
