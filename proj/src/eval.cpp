#include "pds/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "pds/error.hpp"

namespace pds {

Rates tpr_fpr(std::span<const EpochLabel> labels) {
  if (labels.empty()) throw InvalidInput("no labelled epochs");
  std::size_t positives = 0, tp = 0, fp = 0;
  for (const EpochLabel& l : labels) {
    if (l.truth_attack) {
      ++positives;
      if (l.verdict_attack) ++tp;
    } else if (l.verdict_attack) {
      ++fp;
    }
  }
  const std::size_t negatives = labels.size() - positives;
  Rates r;
  if (positives > 0) r.p_tp = static_cast<double>(tp) / static_cast<double>(positives);
  if (negatives > 0) r.p_fp = static_cast<double>(fp) / static_cast<double>(negatives);
  return r;
}

std::optional<double> detection_delay(std::span<const EpochLabel> labels) {
  auto first_attack = std::find_if(labels.begin(), labels.end(),
                                   [](const EpochLabel& l) { return l.truth_attack; });
  if (first_attack == labels.end()) throw InvalidInput("detection delay needs an attacked epoch");
  for (auto it = first_attack; it != labels.end(); ++it)
    if (it->truth_attack && it->verdict_attack) return it->t - first_attack->t;
  return std::nullopt;
}

MaeStats mae_stats(std::span<const double> errors) {
  if (errors.empty()) throw InvalidInput("no errors to summarize");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto k = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n) - 1e-9));
  const std::size_t tail = std::max<std::size_t>(k, 1);
  auto mean_of = [](auto b, auto e) {
    double s = 0.0;
    std::size_t c = 0;
    for (auto it = b; it != e; ++it, ++c) s += *it;
    return s / static_cast<double>(c);
  };
  MaeStats m;
  m.mean = mean_of(sorted.begin(), sorted.end());
  m.bottom20 = mean_of(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(tail));
  m.top20 = mean_of(sorted.end() - static_cast<std::ptrdiff_t>(tail), sorted.end());
  return m;
}

std::vector<EpochLabel> label_verdicts(std::span<const Verdict> verdicts,
                                       const std::optional<AttackConfig>& attack, bool label_stage1) {
  std::vector<EpochLabel> out;
  out.reserve(verdicts.size());
  for (const Verdict& v : verdicts) {
    if (v.warmup) continue;
    bool truth = false;
    if (attack) {
      const double start = label_stage1 ? attack->onset : attack->onset + attack->stage1_duration;
      truth = v.t >= start;
    }
    out.push_back({v.t, truth, v.is_attack});
  }
  return out;
}

DetectorSpec parse_detector_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  DetectorSpec d;
  if (name == "PDS") {
    d.name = name;
    d.mode = colon == std::string::npos ? Mode::All : mode_from_string(text.substr(colon + 1));
    return d;
  }
  const Baseline b = baseline_from_string(name);
  d.name = to_string(b);
  d.mode = natural_mode(b);
  if (colon != std::string::npos && mode_from_string(text.substr(colon + 1)) != d.mode)
    throw InvalidInput("baseline " + name + " only runs in " + to_string(d.mode) + " mode");
  return d;
}

std::string to_string(const DetectorSpec& d) {
  return d.name + ":" + to_string(d.mode);
}

void ExperimentConfig::validate() const {
  trace.validate();
  pds.validate();
  if (detectors.empty()) throw ConfigError("no detectors in the experiment matrix");
  if (deviations.empty() || pfp_max.empty()) throw ConfigError("empty deviation or pfp_max list");
  for (double d : deviations)
    if (!(d >= 0.0)) throw ConfigError("deviations must be non-negative");
  for (double p : pfp_max)
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("pfp_max values must be in (0, 1)");
  if (seeds < 1) throw ConfigError("need at least one seed");
  if (calibration_traces < 1) throw ConfigError("need at least one calibration trace");
  if (!(profile_fraction > 0.0 && profile_fraction <= 1.0))
    throw ConfigError("profile_fraction must be in (0, 1]");
  const std::uint64_t cal_end = calibration_seed + static_cast<std::uint64_t>(calibration_traces);
  const std::uint64_t test_end = first_seed + static_cast<std::uint64_t>(seeds);
  if (calibration_seed < test_end && first_seed < cal_end)
    throw ConfigError("calibration seeds overlap test seeds");
  if (trace.duration < pds.window + 1.0) throw ConfigError("traces are shorter than the window");
}

AttackConfig attack_for(const ExperimentConfig& cfg, double deviation) {
  AttackConfig a = cfg.attack;
  a.max_deviation = deviation;
  a.profile_offset = cfg.profile_fraction * deviation;
  return a;
}

namespace {

TraceConfig with_seed(const TraceConfig& base, std::uint64_t seed) {
  TraceConfig t = base;
  t.rng_seed = seed;
  return t;
}

AlarmRate baseline_alarm_rate(Baseline kind, std::span<const std::vector<EpochData>> benign,
                              const BaselineConfig& cfg, double gamma, std::uint64_t first_seed) {
  std::vector<long> decided(benign.size(), 0), alarms(benign.size(), 0);
  for (std::size_t k = 0; k < benign.size(); ++k) {
    for (const Verdict& v : run_baseline(kind, benign[k], cfg, gamma, first_seed + k)) {
      if (v.warmup) continue;
      ++decided[k];
      if (v.is_attack) ++alarms[k];
    }
  }
  return pooled_alarm_rate(alarms, decided);
}

}  // namespace

DetectorCalibration calibrate_detector(const ExperimentConfig& cfg, const DetectorSpec& spec,
                                       std::span<const std::vector<EpochData>> cal_epochs) {
  DetectorCalibration c;
  c.spec = spec;
  c.covariance = cfg.pds.covariance;
  if (spec.is_pds()) {
    DetectorConfig dc = cfg.pds;
    dc.mode = spec.mode;
    const Calibration cal = calibrate(dc, cal_epochs);
    c.covariance = cal.covariance;
    c.scores = cal.scores;
    dc.covariance = cal.covariance;
    for (double pfp : cfg.pfp_max)
      c.thresholds.push_back(pfp == dc.pfp_max ? cal.threshold
                                               : closed_loop_threshold(dc, cal_epochs, c.scores, pfp));
    return c;
  }
  const Baseline b = baseline_from_string(spec.name);
  for (std::size_t k = 0; k < cal_epochs.size(); ++k) {
    const auto s = baseline_scores(b, cal_epochs[k], cfg.baselines,
                                   cfg.calibration_seed + static_cast<std::uint64_t>(k));
    c.scores.insert(c.scores.end(), s.begin(), s.end());
  }
  if (c.scores.empty()) throw CalibrationError("baseline produced no calibration scores");
  for (double pfp : cfg.pfp_max)
    c.thresholds.push_back(calibrate_closed_loop(c.scores, pfp, [&](double gamma) {
      return baseline_alarm_rate(b, cal_epochs, cfg.baselines, gamma, cfg.calibration_seed);
    }));
  return c;
}

std::vector<Verdict> run_detector(const ExperimentConfig& cfg, const DetectorSpec& spec,
                                  const std::array<CovarianceFn, kSourceCount>& covariance,
                                  double threshold, double pfp, std::span<const EpochData> epochs,
                                  std::uint64_t seed) {
  if (spec.is_pds()) {
    DetectorConfig dc = cfg.pds;
    dc.mode = spec.mode;
    dc.pfp_max = pfp;
    dc.covariance = covariance;
    dc.threshold = threshold;
    return run(epochs, dc);
  }
  return run_baseline(baseline_from_string(spec.name), epochs, cfg.baselines, threshold, seed);
}

namespace {

void score_cell(CellResult& row, std::span<const Verdict> verdicts, const Scenario& sc,
                std::span<const EpochData> epochs, bool label_stage1) {
  const auto labels = label_verdicts(verdicts, sc.attack, label_stage1);
  row.rates = tpr_fpr(labels);
  if (!sc.attack) return;
  row.delay = detection_delay(labels);

  const auto truth = sc.trace.stream(Source::Truth);
  std::vector<double> alt_err, gnss_err;
  for (std::size_t i = 0; i < verdicts.size() && i < truth.size(); ++i) {
    const Verdict& v = verdicts[i];
    if (v.warmup || v.t < sc.attack->onset) continue;
    if (v.alt_available) alt_err.push_back(distance(v.alt_position, truth[i].p));
    if (epochs[i].p[0]) gnss_err.push_back(distance(*epochs[i].p[0], truth[i].p));
  }
  if (!alt_err.empty()) row.mae = mae_stats(alt_err);
  if (!gnss_err.empty()) row.gnss_error = mae_stats(gnss_err).mean;
}

}  // namespace

std::vector<EpochData> benign_epochs(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Scenario sc = make_scenario(with_seed(cfg.trace, seed), cfg.shape, cfg.drift, std::nullopt);
  return align_epochs(sc.trace, cfg.pds.align_tolerance);
}

bool ExperimentReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const CellResult& r) { return r.error.empty(); });
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();

  const unsigned max_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  // Bodies record their own failures; anything that escapes is rethrown here.
  auto parallel_for = [max_threads](std::size_t n, const auto& body) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    const unsigned threads = std::min<unsigned>(max_threads, static_cast<unsigned>(n));
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
  };

  std::vector<std::vector<EpochData>> cal_epochs(static_cast<std::size_t>(cfg.calibration_traces));
  parallel_for(cal_epochs.size(), [&](std::size_t k) {
    cal_epochs[k] = benign_epochs(cfg, cfg.calibration_seed + k);
  });

  std::vector<DetectorCalibration> cals(cfg.detectors.size());
  std::vector<std::string> cal_errors(cfg.detectors.size());
  parallel_for(cfg.detectors.size(), [&](std::size_t d) {
    try {
      cals[d] = calibrate_detector(cfg, cfg.detectors[d], cal_epochs);
    } catch (const std::exception& e) {
      cal_errors[d] = e.what();
    }
  });

  const std::size_t n_det = cfg.detectors.size();
  const std::size_t n_dev = cfg.deviations.size();
  const std::size_t n_pfp = cfg.pfp_max.size();
  const auto n_seed = static_cast<std::size_t>(cfg.seeds);
  std::vector<CellResult> rows(n_det * n_dev * n_pfp * n_seed);
  auto slot = [&](std::size_t d, std::size_t v, std::size_t p, std::size_t s) -> CellResult& {
    return rows[((d * n_dev + v) * n_pfp + p) * n_seed + s];
  };

  // One task per (seed, deviation): the scenario is shared by all detectors.
  parallel_for(n_seed * n_dev, [&](std::size_t task) {
    const std::size_t s = task / n_dev;
    const std::size_t v = task % n_dev;
    const std::uint64_t seed = cfg.first_seed + s;
    const double dev = cfg.deviations[v];
    std::optional<AttackConfig> atk;
    if (dev > 0.0) atk = attack_for(cfg, dev);

    std::optional<Scenario> sc;
    std::vector<EpochData> epochs;
    std::string scenario_error;
    try {
      sc = make_scenario(with_seed(cfg.trace, seed), cfg.shape, cfg.drift, atk);
      epochs = align_epochs(sc->trace, cfg.pds.align_tolerance);
    } catch (const std::exception& e) {
      scenario_error = e.what();
    }

    for (std::size_t d = 0; d < n_det; ++d) {
      for (std::size_t p = 0; p < n_pfp; ++p) {
        CellResult& row = slot(d, v, p, s);
        row.detector = cfg.detectors[d].name;
        row.mode = cfg.detectors[d].mode;
        row.deviation = dev;
        row.pfp_max = cfg.pfp_max[p];
        row.seed = seed;
        if (!scenario_error.empty()) {
          row.error = scenario_error;
          continue;
        }
        if (!cal_errors[d].empty()) {
          row.error = "calibration: " + cal_errors[d];
          continue;
        }
        try {
          const auto verdicts = run_detector(cfg, cals[d].spec, cals[d].covariance, cals[d].thresholds[p],
                                             cfg.pfp_max[p], epochs, seed);
          score_cell(row, verdicts, *sc, epochs, cfg.label_stage1);
        } catch (const std::exception& e) {
          row.error = e.what();
        }
      }
    }
  });

  ExperimentReport report;
  report.rows = std::move(rows);
  report.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

namespace {

std::string num(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

}  // namespace

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "detector,mode,deviation_m,pfp_max,seed,p_tp,p_fp,delta_t_s,mae_mean_m,mae_top20_m,mae_bot20_m\n";
  for (const CellResult& r : report.rows) {
    out << r.detector << ',' << to_string(r.mode) << ',' << num(r.deviation) << ',' << num(r.pfp_max)
        << ',' << r.seed << ',';
    if (!r.error.empty()) {
      out << "ERR,ERR,ERR,ERR,ERR,ERR\n";
      continue;
    }
    out << num(r.rates.p_tp) << ',' << num(r.rates.p_fp) << ',' << num(r.delay) << ','
        << (r.mae ? num(r.mae->mean) : "NA") << ',' << (r.mae ? num(r.mae->top20) : "NA") << ','
        << (r.mae ? num(r.mae->bottom20) : "NA") << '\n';
  }
}

std::vector<SummaryRow> summarize(const ExperimentReport& report) {
  struct Acc {
    SummaryRow row;
    double tp = 0, fp = 0, delay = 0, mae = 0, gnss = 0;
    int n_tp = 0, n_fp = 0, n_delay = 0, n_mae = 0, n_gnss = 0;
  };
  std::vector<Acc> accs;
  std::map<std::tuple<std::string, int, double, double>, std::size_t> index;
  for (const CellResult& r : report.rows) {
    const auto key = std::make_tuple(r.detector, static_cast<int>(r.mode), r.deviation, r.pfp_max);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, accs.size()).first;
      Acc a;
      a.row.detector = r.detector;
      a.row.mode = r.mode;
      a.row.deviation = r.deviation;
      a.row.pfp_max = r.pfp_max;
      accs.push_back(a);
    }
    Acc& a = accs[it->second];
    ++a.row.seeds;
    if (!r.error.empty()) {
      ++a.row.failed;
      continue;
    }
    if (r.rates.p_tp) a.tp += *r.rates.p_tp, ++a.n_tp;
    if (r.rates.p_fp) a.fp += *r.rates.p_fp, ++a.n_fp;
    if (r.delay) a.delay += *r.delay, ++a.n_delay;
    if (r.mae) a.mae += r.mae->mean, ++a.n_mae;
    if (r.gnss_error) a.gnss += *r.gnss_error, ++a.n_gnss;
  }
  std::vector<SummaryRow> out;
  for (Acc& a : accs) {
    if (a.n_tp) a.row.p_tp = a.tp / a.n_tp;
    if (a.n_fp) a.row.p_fp = a.fp / a.n_fp;
    if (a.n_delay) a.row.delay = a.delay / a.n_delay;
    if (a.n_mae) a.row.mae_mean = a.mae / a.n_mae;
    if (a.n_gnss) a.row.gnss_error = a.gnss / a.n_gnss;
    out.push_back(a.row);
  }
  return out;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "detector,mode,deviation_m,pfp_max,seeds,failed,p_tp,p_fp,delta_t_s,mae_mean_m,gnss_error_m\n";
  for (const SummaryRow& r : rows) {
    out << r.detector << ',' << to_string(r.mode) << ',' << num(r.deviation) << ',' << num(r.pfp_max)
        << ',' << r.seeds << ',' << r.failed << ',' << num(r.p_tp) << ',' << num(r.p_fp) << ','
        << num(r.delay) << ',' << num(r.mae_mean) << ',' << num(r.gnss_error) << '\n';
  }
}

}  // namespace pds
