#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fgrlhf/config.hpp"
#include "fgrlhf/errors.hpp"
#include "fgrlhf/harness.hpp"

namespace {

fgrlhf::RunConfig load_config(const std::string& path) {
  return fgrlhf::RunConfig::from_file(path);
}

std::vector<std::uint64_t> seeds_or(const std::vector<std::uint64_t>& given,
                                    std::initializer_list<std::uint64_t> fallback) {
  return given.empty() ? std::vector<std::uint64_t>(fallback) : given;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPO with segment-level reward models over synthetic text environments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "runs";
  std::vector<std::uint64_t> seeds;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double threshold = -1.0;
  std::string run_dir;

  auto add_common = [&](CLI::App* cmd, bool wants_seeds) {
    cmd->add_option("--config", config_path, "run configuration file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    if (wants_seeds) {
      cmd->add_option("--seeds", seeds, "trainer seeds, one run per seed");
    }
  };

  CLI::App* train = app.add_subcommand("train", "train one policy into a timestamped run dir");
  add_common(train, false);
  train->add_option("--seed", seed, "override trainer.seed")->each([&](const std::string&) {
    seed_given = true;
  });

  CLI::App* compare = app.add_subcommand(
      "compare", "sentence-level vs holistic detox reward, episodes-to-threshold per seed");
  add_common(compare, true);
  compare->add_option("--threshold", threshold, "dev max-toxicity target (default from config)");

  CLI::App* customize = app.add_subcommand(
      "customize", "one arm per rewards.w1 value in customize.w1_values");
  add_common(customize, true);

  CLI::App* ablate =
      app.add_subcommand("ablate", "full weight set plus one arm per zeroed reward source");
  add_common(ablate, true);

  CLI::App* rm_train = app.add_subcommand(
      "rm-train", "sample outputs, build oracle feedback, train the reward models");
  add_common(rm_train, false);

  CLI::App* eval_cmd = app.add_subcommand("eval", "score a trained policy on dev and test");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--run", run_dir, "run directory holding policy.bin")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) {
      fgrlhf::RunConfig cfg = load_config(config_path);
      if (seed_given) cfg.ppo.seed = seed;
      const std::filesystem::path dir = fgrlhf::cmd_train(cfg, out_dir);
      std::cout << dir.string() << '\n';
    } else if (compare->parsed()) {
      fgrlhf::RunConfig fine = load_config(config_path);
      if (fine.rewards_kind != "detox_sentence") {
        throw fgrlhf::ConfigError("compare expects rewards.kind = detox_sentence as the base arm");
      }
      fgrlhf::RunConfig holistic = fine;
      holistic.rewards_kind = "detox_holistic";
      const double t = threshold >= 0.0 ? threshold : fine.compare_threshold;
      const fgrlhf::CompareSummary s = fgrlhf::cmd_compare(
          fine, holistic, seeds_or(seeds, {1, 2, 3, 4, 5}), t, out_dir);
      std::cout << "median episodes-to-threshold: fine " << s.median_fine << ", holistic "
                << s.median_holistic << ", ratio " << s.episode_ratio << '\n';
      std::cout << "median final perplexity ratio: " << s.ppl_ratio << '\n';
    } else if (customize->parsed()) {
      const fgrlhf::RunConfig base = load_config(config_path);
      const auto rows = fgrlhf::cmd_customize(base, seeds_or(seeds, {1, 2, 3}), out_dir);
      for (const fgrlhf::CustomizeRow& r : rows) {
        std::cout << "w1=" << r.w1 << ": c1 " << r.c1 << ", c3 " << r.c3 << ", length "
                  << r.length << '\n';
      }
    } else if (ablate->parsed()) {
      const fgrlhf::RunConfig base = load_config(config_path);
      const auto rows = fgrlhf::cmd_ablate(base, seeds_or(seeds, {1, 2, 3}), out_dir);
      for (const fgrlhf::AblateRow& r : rows) {
        std::cout << r.arm << ": c1 " << r.c1 << ", c2 " << r.c2 << ", c3 " << r.c3
                  << ", length " << r.length << '\n';
      }
    } else if (rm_train->parsed()) {
      const fgrlhf::RunConfig cfg = load_config(config_path);
      const fgrlhf::RmTrainSummary s = fgrlhf::cmd_rm_train(cfg, out_dir);
      std::cout << "annotated outputs: " << s.annotation_count << ", pairs: " << s.pair_count
                << '\n';
      std::cout << "holdout accuracy: c1 " << s.c1.holdout_accuracy << ", c2 "
                << s.c2.holdout_accuracy << ", c3 " << s.c3.holdout_accuracy << '\n';
    } else if (eval_cmd->parsed()) {
      const fgrlhf::RunConfig cfg = load_config(config_path);
      fgrlhf::cmd_eval(cfg, run_dir, out_dir);
      std::cout << (std::filesystem::path(out_dir) / "eval_report.csv").string() << '\n';
    }
    return 0;
  } catch (const fgrlhf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const fgrlhf::TrainingAbortError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    const std::filesystem::path dump_path = std::filesystem::path(out_dir) / "abort_dump.txt";
    std::ofstream dump(dump_path);
    dump << e.what() << '\n' << e.dump;
    std::cerr << "episode dump written to " << dump_path.string() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
