#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fgrlhf/config.hpp"
#include "fgrlhf/ppo.hpp"
#include "fgrlhf/reward_models.hpp"

namespace fgrlhf {

// Trains one policy as described by cfg and writes the run directory:
// metrics.csv, policy.bin, value.bin, config.resolved, and episodes.dump
// when run.dump_episodes is set. Rerunning with the same config writes
// byte-identical metrics.csv.
TrainResult run_training(const RunConfig& cfg, const std::filesystem::path& run_dir);

// train subcommand: creates a timestamped run directory under out_root and
// returns its path.
std::filesystem::path cmd_train(const RunConfig& cfg, const std::filesystem::path& out_root);

struct CompareSummary {
  double median_fine = 0.0;      // median episodes-to-threshold, fine-grained arm
  double median_holistic = 0.0;
  double episode_ratio = 0.0;    // fine / holistic
  double ppl_fine = 0.0;         // median final perplexity per arm
  double ppl_holistic = 0.0;
  double ppl_ratio = 0.0;
  int censored_fine = 0;         // runs that never reached the threshold
  int censored_holistic = 0;
};

// Runs both arms over all seeds against a shared env, then derives the
// report purely from the on-disk metric CSVs. A run that never reaches the
// threshold is reported censored (infinite episodes-to-threshold), not
// dropped. Writes compare_report.csv and summary.txt into out_dir.
CompareSummary cmd_compare(const RunConfig& fine, const RunConfig& holistic,
                           const std::vector<std::uint64_t>& seeds, double threshold,
                           const std::filesystem::path& out_dir);

struct CustomizeRow {
  double w1 = 0.0;
  double c1 = 0.0;  // seed-mean final dev scores per category
  double c2 = 0.0;
  double c3 = 0.0;
  double length = 0.0;
};

// One arm per entry of cfg.customize_w1_values, each trained on every
// seed. Returns the per-arm seed means; writes customize_report.csv and
// summary.txt into out_dir.
std::vector<CustomizeRow> cmd_customize(const RunConfig& base,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::filesystem::path& out_dir);

struct AblateRow {
  std::string arm;  // full, no_c1, no_c2, no_c3
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double length = 0.0;
};

// Four arms: the base weight set plus one arm per reward source with its
// weight zeroed. Returns per-arm seed means; writes ablate_report.csv and
// summary.txt into out_dir.
std::vector<AblateRow> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                  const std::filesystem::path& out_dir);

struct RmTrainSummary {
  RmTrainReport c1;
  RmTrainReport c2;
  RmTrainReport c3;
  int annotation_count = 0;
  int pair_count = 0;
};

// Builds a synthetic feedback corpus (outputs sampled from the initial
// policy, labeled by the env oracle under the annotation rules), trains
// the two segment classifiers and the completeness scalar head, and writes
// annotations.tsv, rm_c1.bin, rm_c2.bin, rm_c3.bin, and rm_report.txt into
// out_dir.
RmTrainSummary cmd_rm_train(const RunConfig& cfg, const std::filesystem::path& out_dir);

// Loads policy.bin from run_dir, scores the dev and test splits of the
// configured env, and writes eval_report.csv and summary.txt into out_dir.
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& run_dir,
              const std::filesystem::path& out_dir);

}  // namespace fgrlhf
