#include <cctype>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "lcshare/commands.hpp"
#include "lcshare/errors.hpp"

namespace {

std::string default_out() {
  const char* env = std::getenv("LCSHARE_OUT");
  return env && *env ? env : "out";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const std::string& item : split_list(s)) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw lcshare::ValidationError(flag + ": cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

struct Cli {
  std::string scenario_path;
  std::string out_dir = default_out();
  std::string seeds, scheme, beta, alpha, q;
  int jobs = std::max(1u, std::thread::hardware_concurrency());
};

void add_common(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--scenario", cli.scenario_path, "scenario JSON file")->required();
  cmd->add_option("--out", cli.out_dir,
                  "output directory (default: $LCSHARE_OUT, falling back to ./out)");
  cmd->add_option("--seeds", cli.seeds,
                  "seed count (derived from the scenario master) or comma-separated list");
  cmd->add_option("--scheme", cli.scheme, "run a single scheme instead of the scenario list");
  cmd->add_option("--beta", cli.beta, "MIC effort weight, or comma grid for sweep-beta");
  cmd->add_option("--alpha", cli.alpha, "comma grid of observation error probabilities");
  cmd->add_option("--q", cli.q, "comma grid of observation flip rates");
  cmd->add_option("--jobs", cli.jobs, "worker threads (default: machine parallelism)");
}

lcshare::Scenario load_with_overrides(const Cli& cli) {
  lcshare::Scenario sc = lcshare::load_scenario(cli.scenario_path);
  if (!cli.seeds.empty()) {
    if (all_digits(cli.seeds)) {
      sc.seeds = lcshare::derive_seeds(sc.seed_master, std::stoull(cli.seeds));
    } else {
      sc.seeds.clear();
      for (const std::string& item : split_list(cli.seeds)) {
        try {
          sc.seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
          throw lcshare::ValidationError("--seeds: cannot parse '" + item + "'");
        }
      }
    }
  }
  if (!cli.scheme.empty()) sc.schemes = {lcshare::scheme_from_string(cli.scheme)};
  if (!cli.beta.empty()) {
    std::vector<double> grid = parse_doubles(cli.beta, "--beta");
    sc.beta = grid.front();
    sc.beta_grid = grid;
  }
  if (!cli.alpha.empty()) sc.alpha_grid = parse_doubles(cli.alpha, "--alpha");
  if (!cli.q.empty()) sc.q_grid = parse_doubles(cli.q, "--q");
  sc.validate();
  return sc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared lane-change control: synthesis, simulation, and calibration"};
  app.require_subcommand(1);

  Cli cli;
  CLI::App* synth = app.add_subcommand("synth", "synthesize and certify a controller");
  CLI::App* mc = app.add_subcommand("montecarlo", "paired-seed Monte Carlo over schemes");
  CLI::App* sweep_beta = app.add_subcommand("sweep-beta", "MIC effort sweep over a beta grid");
  CLI::App* sweep_obs =
      app.add_subcommand("sweep-obs", "observation-channel sensitivity over (alpha, q)");
  CLI::App* replay = app.add_subcommand("replay", "replay a recorded lane-change event");
  CLI::App* calibrate = app.add_subcommand("calibrate", "fit models from trajectory data");
  for (CLI::App* cmd : {synth, mc, sweep_beta, sweep_obs, replay, calibrate})
    add_common(cmd, cli);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : lcshare::kExitValidation;
  }

  lcshare::CommandOptions opt;
  opt.out_dir = cli.out_dir;
  opt.jobs = cli.jobs;
  opt.log = &std::cout;

  lcshare::Scenario sc;
  try {
    sc = load_with_overrides(cli);
  } catch (const lcshare::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return lcshare::kExitValidation;
  }

  if (synth->parsed()) return lcshare::cmd_synth(sc, opt);
  if (mc->parsed()) return lcshare::cmd_montecarlo(sc, opt);
  if (sweep_beta->parsed()) return lcshare::cmd_sweep_beta(sc, opt);
  if (sweep_obs->parsed()) return lcshare::cmd_sweep_obs(sc, opt);
  if (replay->parsed()) return lcshare::cmd_replay(sc, opt);
  if (calibrate->parsed()) return lcshare::cmd_calibrate(sc, opt);
  return lcshare::kExitValidation;
}
