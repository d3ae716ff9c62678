#pragma once

// Cross-run aggregation: loads finished run directories, checks alignment,
// computes smoothed learning curves and phase statistics, and writes a
// markdown table, an SVG curve plot, and a machine-readable summary.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpdoc/core/error.hpp"
#include "cpdoc/harness/csv.hpp"
#include "json.hpp"

namespace cpdoc {

struct RunData {
  std::string name;
  std::string variant;
  std::string dir;
  std::string env_type;
  int episodes = 0;
  std::optional<int> switch_episode;
  int optimal_initial = -1;
  int optimal_final = -1;
  std::vector<int> seeds;
  std::vector<std::vector<double>> steps;   // [seed][episode-1]
  std::vector<std::vector<double>> rets;    // [seed][episode-1]
  std::vector<std::vector<double>> cpd_f1;  // [seed][episode-1], -1 when absent
};

inline RunData load_run_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  RunData run;
  run.dir = dir;

  std::ifstream meta_in(fs::path(dir) / "run_meta.json");
  if (!meta_in) throw ValidationError("report: cannot open " + dir + "/run_meta.json");
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report: bad run_meta.json in " + dir + ": " + e.what());
  }
  run.name = meta.value("name", std::string("run"));
  run.variant = meta.value("variant", std::string("?"));
  run.env_type = meta.value("env_type", std::string("?"));
  run.episodes = meta.value("episodes", 0);
  if (meta.contains("switch_episode") && !meta.at("switch_episode").is_null())
    run.switch_episode = meta.at("switch_episode").get<int>();
  run.optimal_initial = meta.value("optimal_steps_initial", -1);
  run.optimal_final = meta.value("optimal_steps_final", -1);

  const CsvTable t = csv_read((fs::path(dir) / "metrics.csv").string());
  const int c_seed = t.column("seed"), c_ep = t.column("episode"), c_steps = t.column("steps");
  const int c_ret = t.column("return"), c_f1 = t.column("cpd_f1");
  if (c_seed < 0 || c_ep < 0 || c_steps < 0 || c_ret < 0 || c_f1 < 0)
    throw ValidationError("report: " + dir + "/metrics.csv lacks expected columns");

  std::map<int, std::vector<std::vector<double>>> per_seed;  // seed -> [episode-1] -> {s,r,f1}
  for (const auto& row : t.rows) {
    const int seed = static_cast<int>(csv_num(row[static_cast<std::size_t>(c_seed)], dir));
    const int ep = static_cast<int>(csv_num(row[static_cast<std::size_t>(c_ep)], dir));
    if (ep < 1 || ep > run.episodes)
      throw ValidationError("report: episode index out of range in " + dir);
    auto& rows = per_seed[seed];
    rows.resize(static_cast<std::size_t>(run.episodes));
    rows[static_cast<std::size_t>(ep - 1)] = {
        csv_num(row[static_cast<std::size_t>(c_steps)], dir),
        csv_num(row[static_cast<std::size_t>(c_ret)], dir),
        csv_num(row[static_cast<std::size_t>(c_f1)], dir)};
  }
  for (auto& [seed, rows] : per_seed) {
    std::vector<double> s, r, f;
    for (const auto& cell : rows) {
      if (cell.empty())
        throw ValidationError("report: seed " + std::to_string(seed) + " in " + dir +
                              " is missing episodes");
      s.push_back(cell[0]);
      r.push_back(cell[1]);
      f.push_back(cell[2]);
    }
    run.seeds.push_back(seed);
    run.steps.push_back(std::move(s));
    run.rets.push_back(std::move(r));
    run.cpd_f1.push_back(std::move(f));
  }
  if (run.seeds.empty()) throw ValidationError("report: no rows in " + dir + "/metrics.csv");
  return run;
}

// Trailing moving average over the last `window` points (fewer at the start).
inline std::vector<double> smooth_trailing(const std::vector<double>& x, int window) {
  std::vector<double> out(x.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= static_cast<std::size_t>(window)) acc -= x[i - static_cast<std::size_t>(window)];
    const std::size_t n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

struct PhaseStat {
  double mean = 0.0;
  double sd = 0.0;
};

// Mean and across-seed standard deviation of per-seed means over episodes
// [lo, hi], 1-based inclusive.
inline PhaseStat phase_stat(const std::vector<std::vector<double>>& per_seed, int lo, int hi) {
  PhaseStat out;
  std::vector<double> means;
  for (const auto& curve : per_seed) {
    double acc = 0.0;
    int n = 0;
    for (int e = lo; e <= hi && e <= static_cast<int>(curve.size()); ++e) {
      acc += curve[static_cast<std::size_t>(e - 1)];
      ++n;
    }
    if (n == 0) throw UsageError("phase_stat: empty episode range");
    means.push_back(acc / n);
  }
  for (double m : means) out.mean += m;
  out.mean /= static_cast<double>(means.size());
  if (means.size() > 1) {
    double ss = 0.0;
    for (double m : means) ss += (m - out.mean) * (m - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(means.size() - 1));
  }
  return out;
}

struct Phase {
  std::string name;
  int lo = 1, hi = 1;
  int oracle = -1;  // phase-matched optimal step count, -1 when not applicable
};

inline std::vector<Phase> report_phases(const RunData& base) {
  std::vector<Phase> phases;
  if (base.switch_episode) {
    const int s = *base.switch_episode;
    if (s > 1) phases.push_back({"pre-switch", 1, s - 1, base.optimal_initial});
    phases.push_back({"adaptation", s, std::min(s + 200, base.episodes), base.optimal_final});
  }
  phases.push_back({"overall", 1, base.episodes, -1});
  return phases;
}

struct ReportOptions {
  int smooth_window = 20;
};

inline void write_curves_svg(const std::string& path, const std::vector<RunData>& runs,
                             bool lower_is_better, int optimal, int window) {
  const double W = 960, H = 540, L = 70, R = 30, T = 40, B = 60;
  const int episodes = runs.front().episodes;

  std::vector<std::vector<double>> curves;
  double ymin = 1e300, ymax = -1e300;
  for (const RunData& run : runs) {
    const auto& data = lower_is_better ? run.steps : run.rets;
    std::vector<double> mean(static_cast<std::size_t>(episodes), 0.0);
    for (const auto& seed_curve : data) {
      const std::vector<double> sm = smooth_trailing(seed_curve, window);
      for (std::size_t e = 0; e < sm.size(); ++e) mean[e] += sm[e];
    }
    for (double& v : mean) v /= static_cast<double>(data.size());
    for (double v : mean) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
    curves.push_back(std::move(mean));
  }
  if (optimal >= 0) {
    ymin = std::min(ymin, static_cast<double>(optimal));
    ymax = std::max(ymax, static_cast<double>(optimal));
  }
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;

  auto px = [&](double e) { return L + (e - 1.0) / std::max(1.0, episodes - 1.0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  std::ofstream svg(path);
  if (!svg) throw UsageError("report: cannot write " + path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double e = 1.0 + (episodes - 1.0) * i / 5.0;
    svg << "<text x=\"" << fmt_fixed(px(e), 1) << "\" y=\"" << H - B + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << static_cast<int>(e + 0.5)
        << "</text>\n";
    const double v = ymin + (ymax - ymin) * i / 5.0;
    svg << "<text x=\"" << L - 8 << "\" y=\"" << fmt_fixed(py(v) + 4, 1)
        << "\" font-size=\"12\" text-anchor=\"end\">" << fmt_fixed(v, 1) << "</text>\n"
        << "<line x1=\"" << L << "\" y1=\"" << fmt_fixed(py(v), 1) << "\" x2=\"" << W - R
        << "\" y2=\"" << fmt_fixed(py(v), 1) << "\" stroke=\"#eeeeee\"/>\n";
  }
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18
      << "\" font-size=\"14\" text-anchor=\"middle\">episode</text>\n"
      << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" font-size=\"14\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">"
      << (lower_is_better ? "steps (smoothed)" : "return (smoothed)") << "</text>\n";

  if (runs.front().switch_episode) {
    const double x = px(*runs.front().switch_episode);
    svg << "<line x1=\"" << fmt_fixed(x, 1) << "\" y1=\"" << T << "\" x2=\"" << fmt_fixed(x, 1)
        << "\" y2=\"" << H - B << "\" stroke=\"#999999\" stroke-dasharray=\"3,3\"/>\n"
        << "<text x=\"" << fmt_fixed(x + 4, 1) << "\" y=\"" << T + 14
        << "\" font-size=\"12\" fill=\"#666666\">goal switch</text>\n";
  }
  if (optimal >= 0) {
    svg << "<line x1=\"" << L << "\" y1=\"" << fmt_fixed(py(optimal), 1) << "\" x2=\"" << W - R
        << "\" y2=\"" << fmt_fixed(py(optimal), 1)
        << "\" stroke=\"#444444\" stroke-dasharray=\"6,4\"/>\n"
        << "<text x=\"" << W - R - 4 << "\" y=\"" << fmt_fixed(py(optimal) - 6, 1)
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"#444444\">Optimal: " << optimal
        << "</text>\n";
  }

  for (std::size_t i = 0; i < curves.size(); ++i) {
    svg << "<polyline fill=\"none\" stroke=\"" << palette[i % 6]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t e = 0; e < curves[i].size(); ++e) {
      if (e) svg << " ";
      svg << fmt_fixed(px(static_cast<double>(e + 1)), 1) << "," << fmt_fixed(py(curves[i][e]), 1);
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 16 + 16 * static_cast<double>(i)
        << "\" font-size=\"13\" text-anchor=\"end\" fill=\"" << palette[i % 6] << "\">"
        << runs[i].name << "</text>\n";
  }
  svg << "</svg>\n";
}

inline nlohmann::json build_report(const std::vector<std::string>& dirs,
                                   const std::string& out_dir, ReportOptions opt = {}) {
  if (dirs.empty()) throw ConfigError("report: need at least one run directory");
  std::vector<RunData> runs;
  for (const std::string& d : dirs) runs.push_back(load_run_dir(d));

  const RunData& base = runs.front();
  for (const RunData& run : runs) {
    if (run.episodes != base.episodes)
      throw ValidationError("report: episode count mismatch between " + base.dir + " (" +
                            std::to_string(base.episodes) + ") and " + run.dir + " (" +
                            std::to_string(run.episodes) + ")");
    if (run.env_type != base.env_type)
      throw ValidationError("report: environment mismatch between " + base.dir + " and " +
                            run.dir);
    if (run.switch_episode.has_value() != base.switch_episode.has_value() ||
        (run.switch_episode && *run.switch_episode != *base.switch_episode))
      throw ValidationError("report: goal-switch schedule mismatch between " + base.dir +
                            " and " + run.dir);
  }

  const bool lower_is_better = base.env_type == "fourrooms";
  const std::vector<Phase> phases = report_phases(base);

  nlohmann::json summary;
  summary["metric"] = lower_is_better ? "steps" : "return";
  summary["episodes"] = base.episodes;
  summary["smooth_window"] = opt.smooth_window;
  summary["baseline"] = base.name;
  if (base.switch_episode) summary["switch_episode"] = *base.switch_episode;
  if (lower_is_better) {
    summary["optimal_steps_initial"] = base.optimal_initial;
    summary["optimal_steps_final"] = base.optimal_final;
  }

  // Phase means for the baseline, for pairwise improvement.
  std::vector<PhaseStat> base_stats;
  for (const Phase& ph : phases)
    base_stats.push_back(
        phase_stat(lower_is_better ? base.steps : base.rets, ph.lo, ph.hi));

  nlohmann::json jruns = nlohmann::json::array();
  std::filesystem::create_directories(out_dir);
  std::ofstream md(std::filesystem::path(out_dir) / "report.md");
  if (!md) throw UsageError("report: cannot write " + out_dir + "/report.md");

  md << "# Learning report\n\n";
  md << "Environment: " << base.env_type << "; episodes: " << base.episodes << "; seeds per run:";
  for (const RunData& run : runs) md << " " << run.name << "=" << run.seeds.size();
  md << ".\n\n";
  if (base.switch_episode) md << "Goal switch at episode " << *base.switch_episode << ".\n\n";
  if (lower_is_better)
    md << "Optimal: " << base.optimal_initial << " steps before the switch, "
       << base.optimal_final << " after.\n\n";
  md << "| run | phase | episodes | mean " << (lower_is_better ? "steps" : "return")
     << " | std | improvement vs " << base.name << " | "
     << (lower_is_better ? "path efficiency |" : "|") << "\n";
  md << "|---|---|---|---|---|---|" << (lower_is_better ? "---|" : "") << "\n";

  for (const RunData& run : runs) {
    nlohmann::json jr;
    jr["name"] = run.name;
    jr["variant"] = run.variant;
    jr["dir"] = run.dir;
    jr["seeds"] = run.seeds.size();
    nlohmann::json jphases;
    for (std::size_t pi = 0; pi < phases.size(); ++pi) {
      const Phase& ph = phases[pi];
      const PhaseStat st =
          phase_stat(lower_is_better ? run.steps : run.rets, ph.lo, ph.hi);
      double improvement = 0.0;
      if (base_stats[pi].mean != 0.0) {
        improvement = lower_is_better
                          ? (base_stats[pi].mean - st.mean) / base_stats[pi].mean * 100.0
                          : (st.mean - base_stats[pi].mean) / std::abs(base_stats[pi].mean) *
                                100.0;
      }
      nlohmann::json jp;
      jp["lo"] = ph.lo;
      jp["hi"] = ph.hi;
      jp["mean"] = st.mean;
      jp["sd"] = st.sd;
      jp["improvement_pct"] = improvement;
      md << "| " << run.name << " | " << ph.name << " | " << ph.lo << "-" << ph.hi << " | "
         << fmt_fixed(st.mean, 2) << " | " << fmt_fixed(st.sd, 2) << " | "
         << fmt_fixed(improvement, 1) << "% | ";
      if (lower_is_better) {
        if (ph.oracle >= 0 && st.mean > 0.0) {
          const double eff = ph.oracle / st.mean;
          jp["efficiency"] = eff;
          jp["oracle_steps"] = ph.oracle;
          md << fmt_fixed(eff, 3) << " |";
        } else {
          md << "- |";
        }
      }
      md << "\n";
      jphases[ph.name] = jp;
    }

    // Detector quality over episodes that carried a reference.
    double f1_acc = 0.0;
    int f1_n = 0;
    for (const auto& curve : run.cpd_f1)
      for (double v : curve)
        if (v >= 0.0) {
          f1_acc += v;
          ++f1_n;
        }
    if (f1_n > 0) jr["cpd_f1_mean"] = f1_acc / f1_n;

    jr["phases"] = jphases;
    jruns.push_back(jr);
  }
  summary["runs"] = jruns;

  md << "\n![learning curves](curves.svg)\n";
  md.close();

  write_curves_svg((std::filesystem::path(out_dir) / "curves.svg").string(), runs,
                   lower_is_better, lower_is_better ? base.optimal_initial : -1,
                   opt.smooth_window);
  std::ofstream(std::filesystem::path(out_dir) / "summary.json") << summary.dump(1) << "\n";
  return summary;
}

}  // namespace cpdoc
