#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <iostream>

#include "gridtsc/errors.hpp"
#include "gridtsc_cli/commands.hpp"

#ifndef GRIDTSC_VERSION
#define GRIDTSC_VERSION "unknown"
#endif

namespace {

using namespace gridtsc;

// "0,1,2" or "0..4" (inclusive) or a mix.
std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> out;
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || s.front() == '-' || used != s.size()) {
      throw UsageError("bad seed '" + s + "'");
    }
    return static_cast<std::uint64_t>(v);
  };
  for (const auto& item : items) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(number(item));
      continue;
    }
    const auto lo = number(item.substr(0, dots));
    const auto hi = number(item.substr(dots + 2));
    if (hi < lo || hi - lo > 100000) {
      throw UsageError("bad seed range '" + item + "'");
    }
    for (auto s = lo; s <= hi; ++s) {
      out.push_back(s);
    }
  }
  if (out.empty()) {
    throw UsageError("no seeds given");
  }
  return out;
}

std::optional<RewardVariant> parse_reward(const std::string& text) {
  if (text.empty()) {
    return std::nullopt;
  }
  auto v = parse_reward_variant(text);
  if (!v) {
    throw UsageError("--reward must be congestion or travel-time");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesoscopic signalized-grid simulator and RL environment"};
  app.set_version_flag("--version", std::string("gridtsc ") + GRIDTSC_VERSION);
  app.require_subcommand(1);

  std::string scenario;
  std::string policy = "fixed";
  std::vector<std::string> seeds{"0"};
  std::string out = "out";
  std::string reward;
  std::string endpoint = "127.0.0.1:5555";
  std::size_t episodes = 100;
  std::vector<Seconds> splits;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario, "Scenario YAML file")->required();
    cmd->add_option("--reward", reward, "Reward variant: congestion or travel-time");
  };

  auto* run = app.add_subcommand("run", "Run episodes with a policy and export metrics");
  common(run);
  run->add_option("--policy", policy, "fixed, greedy, random or qlearn:<weights.json>");
  run->add_option("--seeds", seeds, "Seeds, comma separated; a..b is an inclusive range")
      ->delimiter(',');
  run->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep-split", "Brute-force fixed splits on one intersection");
  common(sweep);
  sweep->add_option("--seeds", seeds, "Seeds, comma separated")->delimiter(',');
  sweep->add_option("--splits", splits, "Splits to try (default: the action grid)")
      ->delimiter(',');
  auto* sweep_out = sweep->add_option("--out", out, "Directory for sweep.csv");

  auto* trn = app.add_subcommand("train", "Train the linear Q-learning agent");
  common(trn);
  trn->add_option("--episodes", episodes, "Training episodes")->check(CLI::PositiveNumber);
  trn->add_option("--seeds", seeds, "Master seed (first value is used)")->delimiter(',');
  trn->add_option("--out", out, "Output directory");

  auto* serve = app.add_subcommand("serve", "Serve the environment over the wire protocol");
  common(serve);
  serve->add_option("--endpoint", endpoint, "stdio or host:port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const auto variant = parse_reward(reward);
    if (*run) {
      cli::RunOptions o{scenario, policy, parse_seeds(seeds), out, variant};
      cli::cmd_run(o, std::cout);
    } else if (*sweep) {
      cli::SweepOptions o{scenario, splits, parse_seeds(seeds), std::nullopt, variant};
      if (sweep_out->count() > 0) {
        o.out = out;
      }
      cli::cmd_sweep_split(o, std::cout);
    } else if (*trn) {
      cli::TrainOptions o{scenario, episodes, parse_seeds(seeds).front(), out, variant};
      cli::cmd_train(o, std::cout);
    } else if (*serve) {
      cli::ServeOptions o{scenario, endpoint, variant};
      cli::cmd_serve(o, std::cin, std::cout, std::cerr);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
