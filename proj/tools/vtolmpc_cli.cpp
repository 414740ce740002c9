#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "vtolmpc/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace vtolmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAborted = 2;
constexpr int kExitVerifyFailed = 3;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string summary_header() {
  return "file,mode,gamma,horizon,aborted,steps,min_distance,settling_time,final_error,final_window_error,"
         "infeasible_solves,min_cbf_residual,mean_solve_ms";
}

std::string summary_row(const std::string& file, const Scenario& s, const TrajectoryLog& log, const Metrics& m) {
  double dist = std::numeric_limits<double>::infinity();
  for (double d : m.min_distance) dist = std::min(dist, d);
  return file + ',' + std::string(to_string(s.cfg.mode)) + ',' + num(s.cfg.gamma) + ',' +
         std::to_string(s.cfg.horizon) + ',' + (log.aborted ? "1" : "0") + ',' + std::to_string(log.steps.size()) +
         ',' + num(dist) + ',' + num(m.settling_time) + ',' + num(m.final_position_error) + ',' +
         num(m.final_window_error) + ',' + std::to_string(m.infeasible_solves) + ',' + num(m.min_cbf_residual) +
         ',' + num(m.mean_solve_ms);
}

void print_metrics(const Scenario& s, const TrajectoryLog& log, const Metrics& m) {
  std::printf("mode %s, gamma %g, N %d: %zu steps%s\n", std::string(to_string(s.cfg.mode)).c_str(), s.cfg.gamma,
              s.cfg.horizon, log.steps.size(), log.aborted ? " (aborted)" : "");
  if (log.aborted) std::printf("  abort: %s\n", log.abort_reason.c_str());
  for (std::size_t i = 0; i < m.min_distance.size(); ++i) {
    std::printf("  obstacle %zu: min distance %.4f m (radius %.3f)\n", i, m.min_distance[i], s.obstacles[i].radius);
  }
  std::printf("  settling time %.2f s, final error %.4g m, last-second error %.4g m\n", m.settling_time,
              m.final_position_error, m.final_window_error);
  std::printf("  infeasible solves %d, mean solve %.2f ms\n", m.infeasible_solves, m.mean_solve_ms);
}

int cmd_run(const std::string& scenario_path, const std::string& mode, const std::string& out_dir) {
  Scenario s = load_scenario(scenario_path);
  if (!mode.empty()) s.cfg.mode = parse_mode(mode);
  fs::create_directories(out_dir);
  const TrajectoryLog log = run_closed_loop(s);
  const Metrics m = metrics(log, s);
  const fs::path csv = fs::path(out_dir) / (fs::path(scenario_path).stem().string() + "_" +
                                            std::string(to_string(s.cfg.mode)) + ".csv");
  write_csv(log, csv);
  print_metrics(s, log, m);
  std::printf("  log: %s\n", csv.string().c_str());
  return log.aborted ? kExitAborted : kExitOk;
}

int cmd_sweep(const std::string& scenario_path, const std::string& mode, const std::vector<double>& gammas,
              const std::vector<int>& horizons, const std::string& out_dir, unsigned jobs) {
  const Scenario base = load_scenario(scenario_path);
  struct Job {
    Scenario scenario;
    std::string file;
    std::string row;
    bool aborted = false;
  };
  std::vector<Job> work;
  for (int n : horizons) {
    for (double g : gammas) {
      Job j{base, {}, {}, false};
      if (!mode.empty()) j.scenario.cfg.mode = parse_mode(mode);
      j.scenario.cfg.gamma = g;
      j.scenario.cfg.horizon = n;
      j.scenario.cfg.check_horizon = std::min(j.scenario.cfg.check_horizon, n);
      j.scenario.validate();
      j.file = std::string(to_string(j.scenario.cfg.mode)) + "_gamma" + num(g) + "_n" + std::to_string(n) + ".csv";
      work.push_back(std::move(j));
    }
  }
  fs::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      Job& j = work[i];
      const TrajectoryLog log = run_closed_loop(j.scenario);
      write_csv(log, fs::path(out_dir) / j.file);
      j.row = summary_row(j.file, j.scenario, log, metrics(log, j.scenario));
      j.aborted = log.aborted;
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(work.size())));
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();

  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  if (!summary) throw std::runtime_error("cannot write summary.csv in " + out_dir);
  summary << summary_header() << '\n';
  bool any_aborted = false;
  for (const Job& j : work) {
    summary << j.row << '\n';
    std::printf("%s\n", j.row.c_str());
    any_aborted = any_aborted || j.aborted;
  }
  return any_aborted ? kExitAborted : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPC with discrete-time control barrier functions for a VTOL UAV"};
  app.require_subcommand(1);

  std::string scenario, mode, out_dir = "out";
  auto* run = app.add_subcommand("run", "Simulate one scenario and write its CSV log");
  run->add_option("--scenario", scenario, "Scenario TOML file")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "Safety constraint: cbf or ed (default: from the scenario)")
      ->check(CLI::IsMember({"cbf", "ed"}));
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();

  std::vector<double> gammas;
  std::vector<int> horizons;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "Run a gamma x horizon grid, one CSV per run plus summary.csv");
  sweep->add_option("--scenario", scenario, "Scenario TOML file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--mode", mode, "Safety constraint: cbf or ed")->check(CLI::IsMember({"cbf", "ed"}));
  sweep->add_option("--gamma", gammas, "Comma-separated decay rates in (0, 1]")->required()->delimiter(',');
  sweep->add_option("--horizon", horizons, "Comma-separated horizons")->required()->delimiter(',');
  sweep->add_option("--out", out_dir, "Output directory")->capture_default_str();
  sweep->add_option("--jobs", jobs, "Concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the acceptance criteria");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(scenario, mode, out_dir);
    if (*sweep) return cmd_sweep(scenario, mode, gammas, horizons, out_dir, jobs);
    if (*verify) return acceptance::run_all(std::cout) == 0 ? kExitOk : kExitVerifyFailed;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
