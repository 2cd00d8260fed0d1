// Copyright 2026 The gavg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// gavg: experiment runner and numerical checks.
//
//   gavg run --config <path> --out <dir> [--threads N]
//   gavg validate --config <path>
//   gavg asymptotics --s <v> --sigma <v> --l <v> --a <v> --kmax <v> --out <dir>
//   gavg plotdata --in <dir> --out <dir>
//
// Exit codes: 0 ok, 1 a numerical check failed, 2 bad config or arguments,
// 3 filesystem failure. GAVG_THREADS caps the worker count.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "gavg/gavg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int cmd_run(const std::string& config_path, const std::string& out_arg, unsigned threads) {
  gavg::ExperimentConfig cfg = gavg::load_config(config_path);
  std::string out = out_arg;
  if (out.empty()) {
    if (!cfg.output_dir) throw gavg::ConfigError("no output directory: pass --out or set 'output'");
    out = *cfg.output_dir;
  }
  const gavg::ExperimentResult res = gavg::run_experiment(cfg, gavg::resolve_threads(threads));
  gavg::write_outputs(res, out);
  std::cout << "wrote " << out << " (config " << res.hash << ")\n";
  for (const auto& m : res.methods) {
    const auto& row = m.summary;
    std::cout << "  " << row.method << ": rate_slope=" << gavg::csv_real(row.rate_slope)
              << " r2=" << gavg::csv_real(row.rate_r2)
              << " kappa_hat=" << gavg::csv_real(row.kappa_hat)
              << " varm_slope=" << gavg::csv_real(row.varm_slope) << '\n';
  }
  return kExitOk;
}

int cmd_validate(const std::string& config_path) {
  const gavg::ExperimentConfig cfg = gavg::load_config(config_path);
  const gavg::ValidationResult v = gavg::validate_config(cfg);
  const auto& rep = *v.schedule.constraint_report;
  std::cout << "problem: " << v.problem_kind << " l=" << gavg::format_real(v.constants.l)
            << " L=" << gavg::format_real(v.constants.L) << " M=" << gavg::format_real(v.constants.M)
            << " M_V=" << gavg::format_real(v.constants.M_V) << '\n';
  std::cout << "schedule: s=" << gavg::format_real(v.schedule.s)
            << " sigma=" << gavg::format_real(v.schedule.sigma)
            << (cfg.schedule.sigma ? "" : " (auto)") << '\n';
  std::cout << "alpha_1=" << gavg::format_real(rep.alpha1)
            << " bound=" << gavg::format_real(rep.bound_used) << '\n';
  std::cout << rep.describe();
  if (!v.needs_schedule) std::cout << "(no method uses the decaying schedule)\n";
  std::cout << "config ok (" << gavg::config_hash(cfg) << ")\n";
  return kExitOk;
}

int cmd_asymptotics(double s, double sigma, double l, double a, std::int64_t kmax,
                    const std::string& out) {
  gavg::AbkParams p{s, sigma, l, a};
  const auto grid = gavg::log_checkpoints(kmax, 20);
  const gavg::LeadingOrderReport rep = gavg::check_leading_order(p, grid);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw gavg::IoError("cannot create " + out + ": " + ec.message());
  {
    std::ofstream csv(std::filesystem::path(out) / "leading_order.csv");
    if (!csv) throw gavg::IoError("cannot write leading_order.csv under " + out);
    gavg::write_leading_order_csv(csv, rep);
  }
  std::ofstream txt(std::filesystem::path(out) / "report.txt");
  if (!txt) throw gavg::IoError("cannot write report.txt under " + out);
  gavg::write_leading_order_report(txt, rep);
  gavg::write_leading_order_report(std::cout, rep);
  return rep.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_plotdata(const std::string& in, const std::string& out) {
  const auto labels = gavg::plotdata(in, out);
  for (const auto& l : labels) std::cout << "wrote " << l << "_loglog.csv\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted gradient averaging experiments"};
  app.set_version_flag("--version", std::string(gavg::kVersion));
  app.require_subcommand(1);

  std::string config, out, in;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "Run all trials and write CSV artifacts");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory");
  run->add_option("--threads", threads, "Worker threads (default: all cores)");

  auto* validate = app.add_subcommand("validate", "Check a config and its schedule");
  validate->add_option("--config", config, "Experiment config (JSON)")->required();

  double s = 0, sigma = 0, l = 0, a = 0;
  std::int64_t kmax = 10000;
  auto* asym = app.add_subcommand("asymptotics", "Check A_k and B_k against leading order");
  asym->add_option("--s", s)->required();
  asym->add_option("--sigma", sigma)->required();
  asym->add_option("--l", l)->required();
  asym->add_option("--a", a)->required();
  asym->add_option("--kmax", kmax)->required();
  asym->add_option("--out", out)->required();

  auto* plot = app.add_subcommand("plotdata", "Derive log-log series from a run directory");
  plot->add_option("--in", in)->required();
  plot->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, out, threads);
    if (*validate) return cmd_validate(config);
    if (*asym) return cmd_asymptotics(s, sigma, l, a, kmax, out);
    if (*plot) return cmd_plotdata(in, out);
  } catch (const gavg::InvalidSchedule& e) {
    std::cerr << "error: " << e.what();
    return kExitConfig;
  } catch (const gavg::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const gavg::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const gavg::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const gavg::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const gavg::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}
