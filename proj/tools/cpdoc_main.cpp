// Command-line front end: train runs experiment configs, validate checks them,
// report aggregates finished runs, oracle prints environment yardsticks, and
// cpd-eval summarizes detector output stored in a run directory.
//
// Exit codes: 0 success, 1 configuration/validation problems, 2 runtime
// failures.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpdoc/core/error.hpp"
#include "cpdoc/harness/config.hpp"
#include "cpdoc/harness/csv.hpp"
#include "cpdoc/harness/oracle.hpp"
#include "cpdoc/harness/report.hpp"
#include "cpdoc/harness/runner.hpp"
#include "json.hpp"

namespace {

int cmd_train(const std::string& config_path, int jobs, int seed_offset) {
  const cpdoc::ExperimentConfig cfg = cpdoc::experiment_load(config_path);
  const cpdoc::RunOutcome outcome = cpdoc::run_experiment(cfg, jobs, seed_offset);
  for (const std::string& e : outcome.errors) std::cerr << "warning: " << e << "\n";
  std::cout << "wrote " << outcome.dir.string() << " (" << outcome.ok_seeds << " seeds)\n";
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const cpdoc::ExperimentConfig cfg = cpdoc::experiment_load(config_path);
  std::cout << cpdoc::experiment_to_json(cfg).dump(1) << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out_dir) {
  cpdoc::build_report(dirs, out_dir);
  std::cout << "wrote " << out_dir << "/report.md\n";
  return 0;
}

int cmd_oracle(const std::string& env_path) {
  std::cout << cpdoc::oracle_report(env_path).dump(1) << "\n";
  return 0;
}

int cmd_cpd_eval(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const cpdoc::CsvTable t = cpdoc::csv_read((fs::path(run_dir) / "metrics.csv").string());
  const int cp = t.column("cpd_p"), cr = t.column("cpd_r"), cf = t.column("cpd_f1");
  if (cp < 0 || cr < 0 || cf < 0)
    throw cpdoc::ValidationError("cpd-eval: metrics.csv lacks detector columns");

  double sp = 0.0, sr = 0.0, sf = 0.0;
  std::vector<double> f1s;
  for (const auto& row : t.rows) {
    const double f1 = cpdoc::csv_num(row[static_cast<std::size_t>(cf)], run_dir);
    if (f1 < 0.0) continue;
    sp += cpdoc::csv_num(row[static_cast<std::size_t>(cp)], run_dir);
    sr += cpdoc::csv_num(row[static_cast<std::size_t>(cr)], run_dir);
    sf += f1;
    f1s.push_back(f1);
  }

  nlohmann::json out;
  out["episodes_total"] = t.rows.size();
  out["episodes_scored"] = f1s.size();
  if (!f1s.empty()) {
    const double n = static_cast<double>(f1s.size());
    out["precision_mean"] = sp / n;
    out["recall_mean"] = sr / n;
    out["f1_mean"] = sf / n;
    std::sort(f1s.begin(), f1s.end());
    const std::size_t m = f1s.size() / 2;
    out["f1_median"] =
        f1s.size() % 2 == 1 ? f1s[m] : 0.5 * (f1s[m - 1] + f1s[m]);
  }

  const fs::path bdir = fs::path(run_dir) / "boundaries";
  if (fs::exists(bdir)) {
    std::size_t rows = 0;
    double p_acc = 0.0, b_acc = 0.0;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(bdir))
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      const cpdoc::CsvTable bt = cpdoc::csv_read(f.string());
      const int pc = bt.column("p"), bc = bt.column("b");
      if (pc < 0 || bc < 0) continue;
      for (const auto& row : bt.rows) {
        p_acc += cpdoc::csv_num(row[static_cast<std::size_t>(pc)], f.string());
        b_acc += cpdoc::csv_num(row[static_cast<std::size_t>(bc)], f.string());
        ++rows;
      }
    }
    if (rows > 0) {
      out["boundary_rows"] = rows;
      out["boundary_prob_mean"] = p_acc / static_cast<double>(rows);
      out["boundary_rate"] = b_acc / static_cast<double>(rows);
    }
  }

  std::cout << out.dump(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"change-point-guided option-critic experiment harness"};
  app.require_subcommand(1);

  std::string config_path, env_path, run_dir, out_dir;
  std::vector<std::string> dirs;
  int jobs = 1, seed_offset = 0;

  CLI::App* train = app.add_subcommand("train", "run every seed of an experiment config");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--jobs", jobs, "seed-parallel worker count")->check(CLI::PositiveNumber);
  train->add_option("--seed-offset", seed_offset, "shift applied to every seed");

  CLI::App* validate = app.add_subcommand("validate", "check a config and print it resolved");
  validate->add_option("--config", config_path, "experiment config JSON")->required();

  CLI::App* report = app.add_subcommand("report", "aggregate finished run directories");
  report->add_option("dirs", dirs, "run directories (first is the baseline)")->required();
  report->add_option("--out", out_dir, "output directory")->required();

  CLI::App* oracle = app.add_subcommand("oracle", "print the environment yardstick");
  oracle->add_option("--env", env_path, "environment config JSON")->required();

  CLI::App* cpd_eval = app.add_subcommand("cpd-eval", "summarize detector output of a run");
  cpd_eval->add_option("--run", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, jobs, seed_offset);
    if (validate->parsed()) return cmd_validate(config_path);
    if (report->parsed()) return cmd_report(dirs, out_dir);
    if (oracle->parsed()) return cmd_oracle(env_path);
    if (cpd_eval->parsed()) return cmd_cpd_eval(run_dir);
  } catch (const cpdoc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cpdoc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
