#include "fgrlhf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "fgrlhf/annotation.hpp"
#include "fgrlhf/envs.hpp"
#include "fgrlhf/errors.hpp"
#include "fgrlhf/metrics.hpp"
#include "fgrlhf/segment.hpp"

namespace fgrlhf {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

MetricLog read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  MetricLog log;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty metrics file: " + path.string());
  {
    std::istringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) log.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != log.columns.size()) {
      throw ParseError("ragged row in " + path.string());
    }
    log.rows.push_back(std::move(row));
  }
  if (log.rows.empty()) throw ParseError("metrics file has no rows: " + path.string());
  return log;
}

double cell_of(const MetricLog& log, const std::vector<double>& row, const std::string& name,
               const std::filesystem::path& path) {
  const int idx = log.column_index(name);
  if (idx < 0) throw ParseError(path.string() + " lacks column " + name);
  return row[static_cast<std::size_t>(idx)];
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Two equal statistics (both censored included) compare as exactly 1.
double ratio_of(double num, double den) {
  if (num == den) return 1.0;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(den)) return 0.0;
  return num / den;
}

std::vector<Segment> to_segments(const std::vector<Span>& spans) {
  std::vector<Segment> out;
  out.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    out.push_back(Segment{static_cast<int>(i) + 1, spans[i].begin, spans[i].end});
  }
  return out;
}

std::vector<RewardSpec> detox_specs(const RunConfig& cfg, const DetoxEnv& env) {
  RewardSpec spec;
  spec.category = 1;
  spec.weight = 1.0;
  if (cfg.rewards_kind == "detox_sentence") {
    spec.density = Density::kSentence;
    spec.scorer = std::make_shared<SentenceDetoxScorer>(env.oracle);
  } else {
    spec.density = Density::kSequence;
    spec.scorer = std::make_shared<HolisticDetoxScorer>(env.oracle);
  }
  return {spec};
}

std::vector<RewardSpec> lfqa_specs(const RunConfig& cfg, const LfqaEnv& env) {
  PromptSpecResolver resolver = [envp = &env](int id) { return envp->spec_for(id); };
  std::vector<RewardSpec> specs(3);
  specs[0].category = 1;
  specs[0].density = Density::kSubsentence;
  specs[0].weight = cfg.w1;
  specs[1].category = 2;
  specs[1].density = Density::kSentence;
  specs[1].weight = cfg.w2;
  specs[2].category = 3;
  specs[2].density = Density::kSequence;
  specs[2].weight = cfg.w3;
  if (cfg.rewards_kind == "lfqa_oracle") {
    specs[0].scorer =
        std::make_shared<LfqaOracleScorer>(&env.oracle, resolver, Density::kSubsentence);
    specs[1].scorer =
        std::make_shared<LfqaOracleScorer>(&env.oracle, resolver, Density::kSentence);
    specs[2].scorer =
        std::make_shared<LfqaOracleScorer>(&env.oracle, resolver, Density::kSequence);
  } else {
    const std::filesystem::path dir(cfg.rm_dir);
    auto c1 = std::make_shared<ClassifierRM>(ClassifierRM::load(dir / "rm_c1.bin"));
    auto c2 = std::make_shared<ClassifierRM>(ClassifierRM::load(dir / "rm_c2.bin"));
    auto c3 = std::make_shared<ScalarRM>(ScalarRM::load(dir / "rm_c3.bin"));
    if (c1->features.vocab_size != env.vocab.size() ||
        c2->features.vocab_size != env.vocab.size() ||
        c3->features.vocab_size != env.vocab.size()) {
      throw ConfigError("reward models in " + dir.string() + " do not match the env vocabulary");
    }
    specs[0].density = c1->density;
    specs[1].density = c2->density;
    specs[0].scorer = std::make_shared<ClassifierRmScorer>(std::move(c1));
    specs[1].scorer = std::make_shared<ClassifierRmScorer>(std::move(c2));
    specs[2].scorer = std::make_shared<ScalarRmScorer>(std::move(c3));
  }
  return specs;
}

void write_run_artifacts(const RunConfig& cfg, const TrainResult& result,
                         const std::vector<std::string>& dump,
                         const std::filesystem::path& run_dir) {
  result.metrics.write_csv(run_dir / "metrics.csv");
  result.policy.save(run_dir / "policy.bin");
  result.value.save(run_dir / "value.bin");
  write_text(run_dir / "config.resolved", cfg.resolved());
  if (cfg.dump_episodes) {
    std::string text;
    for (const std::string& line : dump) {
      text += line;
      text += '\n';
    }
    write_text(run_dir / "episodes.dump", text);
  }
}

std::vector<Prompt> eval_subset(const std::vector<Prompt>& dev, int eval_prompts) {
  const std::size_t n = std::min(dev.size(), static_cast<std::size_t>(std::max(1, eval_prompts)));
  return std::vector<Prompt>(dev.begin(), dev.begin() + static_cast<std::ptrdiff_t>(n));
}

}  // namespace

TrainResult run_training(const RunConfig& cfg, const std::filesystem::path& run_dir) {
  cfg.validate();
  std::filesystem::create_directories(run_dir);
  std::vector<std::string> dump;
  std::vector<std::string>* dump_sink = cfg.dump_episodes ? &dump : nullptr;

  if (cfg.env_kind == "detox") {
    DetoxEnv env = generate_detox_env(cfg.env_seed, cfg.sizes);
    if (cfg.t_max_override > 0) env.t_max = cfg.t_max_override;
    PolicyParams init = initial_policy(env, cfg.init);
    ValueParams value = initial_value(init);
    const std::vector<RewardSpec> specs = detox_specs(cfg, env);
    PPOConfig ppo = cfg.ppo;
    ppo.t_max = env.t_max;
    const std::vector<Prompt> dev = eval_subset(env.dev, ppo.eval_prompts);
    EvalHook hook;
    hook.columns = {"eval_max_toxicity", "eval_perplexity", "eval_dist2", "eval_len"};
    hook.run = [envp = &env, initp = &init, dev, ppo](const PolicyParams& policy, int step) {
      const DetoxEvalResult r =
          detox_eval(*envp, dev, policy, *initp, ppo.eval_samples, ppo.sampler, ppo.seed,
                     static_cast<std::uint64_t>(step));
      return std::vector<double>{r.mean_max_toxicity, r.perplexity, r.distinct2, r.mean_length};
    };
    TrainResult result = train(ppo, env.vocab, env.train, specs, init, value, &hook, dump_sink);
    write_run_artifacts(cfg, result, dump, run_dir);
    return result;
  }

  LfqaEnv env = generate_lfqa_env(cfg.env_seed, cfg.sizes);
  if (cfg.t_max_override > 0) env.t_max = cfg.t_max_override;
  PolicyParams init = initial_policy(env, cfg.init);
  ValueParams value = initial_value(init);
  const std::vector<RewardSpec> specs = lfqa_specs(cfg, env);
  PPOConfig ppo = cfg.ppo;
  ppo.t_max = env.t_max;
  const std::vector<Prompt> dev = eval_subset(env.dev, ppo.eval_prompts);
  EvalHook hook;
  hook.columns = {"eval_c1", "eval_c2", "eval_c3", "eval_len", "eval_ppl"};
  hook.run = [envp = &env, initp = &init, dev, ppo](const PolicyParams& policy, int step) {
    const LfqaEvalResult r =
        lfqa_eval(*envp, dev, policy, *initp, ppo.eval_samples, ppo.sampler, ppo.seed,
                  static_cast<std::uint64_t>(step));
    return std::vector<double>{r.subsentence_mean, r.sentence_mean, r.completeness_mean,
                               r.mean_length, r.perplexity};
  };
  TrainResult result = train(ppo, env.vocab, env.train, specs, init, value, &hook, dump_sink);
  write_run_artifacts(cfg, result, dump, run_dir);
  return result;
}

std::filesystem::path cmd_train(const RunConfig& cfg, const std::filesystem::path& out_root) {
  std::filesystem::create_directories(out_root);
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "run-%Y%m%d-%H%M%S", &tm);
  std::filesystem::path dir = out_root / stamp;
  for (int suffix = 1; std::filesystem::exists(dir); ++suffix) {
    dir = out_root / (std::string(stamp) + "-" + std::to_string(suffix));
  }
  run_training(cfg, dir);
  return dir;
}

CompareSummary cmd_compare(const RunConfig& fine, const RunConfig& holistic,
                           const std::vector<std::uint64_t>& seeds, double threshold,
                           const std::filesystem::path& out_dir) {
  if (seeds.empty()) throw ConfigError("compare needs at least one seed");
  if (fine.env_kind != "detox" || holistic.env_kind != "detox") {
    throw ConfigError("compare is defined on the detox env");
  }
  if (fine.env_seed != holistic.env_seed || fine.sizes.train != holistic.sizes.train ||
      fine.sizes.dev != holistic.sizes.dev || fine.sizes.test != holistic.sizes.test ||
      fine.t_max_override != holistic.t_max_override ||
      fine.ppo.eval_prompts != holistic.ppo.eval_prompts ||
      fine.ppo.eval_samples != holistic.ppo.eval_samples) {
    throw ConfigError("compare arms must share env and eval protocol");
  }
  std::filesystem::create_directories(out_dir);

  struct ArmDirs {
    std::string name;
    const RunConfig* base;
    std::string prefix;
    std::vector<std::filesystem::path> dirs;
  };
  ArmDirs arms[2] = {{"fine_grained", &fine, "fg_seed", {}}, {"holistic", &holistic, "hol_seed", {}}};
  for (ArmDirs& arm : arms) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = *arm.base;
      cfg.ppo.seed = seed;
      const std::filesystem::path dir = out_dir / (arm.prefix + std::to_string(seed));
      run_training(cfg, dir);
      arm.dirs.push_back(dir);
    }
  }

  // The report is a pure function of the metric CSVs on disk.
  struct RunStat {
    double episodes = 0.0;
    bool reached = false;
    double final_ppl = 0.0;
    double final_tox = 0.0;
  };
  auto stat_of = [&](const std::filesystem::path& dir) {
    const std::filesystem::path path = dir / "metrics.csv";
    const MetricLog log = read_metrics_csv(path);
    RunStat s;
    s.episodes = std::numeric_limits<double>::infinity();
    for (const std::vector<double>& row : log.rows) {
      if (cell_of(log, row, "eval_max_toxicity", path) <= threshold) {
        s.episodes = cell_of(log, row, "episodes_seen", path);
        s.reached = true;
        break;
      }
    }
    // One eval row is a noisy read of the end state at desk scale; the
    // final perplexity is the mean over the trailing evals instead.
    const std::size_t tail = std::min<std::size_t>(64, log.rows.size());
    double ppl_sum = 0.0;
    for (std::size_t r = log.rows.size() - tail; r < log.rows.size(); ++r)
      ppl_sum += cell_of(log, log.rows[r], "eval_perplexity", path);
    s.final_ppl = ppl_sum / static_cast<double>(tail);
    s.final_tox = cell_of(log, log.rows.back(), "eval_max_toxicity", path);
    return s;
  };

  std::ostringstream csv;
  csv << "row,arm,seed,episodes_to_threshold,reached,final_perplexity,final_max_toxicity\n";
  CompareSummary summary;
  std::vector<double> episodes[2], ppls[2];
  int censored[2] = {0, 0};
  for (int a = 0; a < 2; ++a) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const RunStat s = stat_of(arms[a].dirs[i]);
      episodes[a].push_back(s.episodes);
      ppls[a].push_back(s.final_ppl);
      if (!s.reached) ++censored[a];
      csv << "run," << arms[a].name << ',' << seeds[i] << ',' << fmt(s.episodes) << ','
          << (s.reached ? 1 : 0) << ',' << fmt(s.final_ppl) << ',' << fmt(s.final_tox) << '\n';
    }
  }
  summary.median_fine = median(episodes[0]);
  summary.median_holistic = median(episodes[1]);
  summary.episode_ratio = ratio_of(summary.median_fine, summary.median_holistic);
  summary.ppl_fine = median(ppls[0]);
  summary.ppl_holistic = median(ppls[1]);
  summary.ppl_ratio = ratio_of(summary.ppl_fine, summary.ppl_holistic);
  summary.censored_fine = censored[0];
  summary.censored_holistic = censored[1];

  csv << "median,fine_grained,-1," << fmt(summary.median_fine) << ','
      << (static_cast<int>(seeds.size()) - censored[0]) << ',' << fmt(summary.ppl_fine) << ",-1\n";
  csv << "median,holistic,-1," << fmt(summary.median_holistic) << ','
      << (static_cast<int>(seeds.size()) - censored[1]) << ',' << fmt(summary.ppl_holistic)
      << ",-1\n";
  csv << "ratio,fine_over_holistic,-1," << fmt(summary.episode_ratio) << ",-1,"
      << fmt(summary.ppl_ratio) << ",-1\n";
  write_text(out_dir / "compare_report.csv", csv.str());

  std::ostringstream txt;
  txt << "sample-efficiency comparison (dev max-toxicity threshold " << fmt_short(threshold)
      << ")\n";
  txt << "seeds:";
  for (std::uint64_t seed : seeds) txt << ' ' << seed;
  txt << '\n';
  for (int a = 0; a < 2; ++a) {
    txt << arms[a].name << " episodes-to-threshold:";
    for (double e : episodes[a]) txt << ' ' << fmt_short(e);
    txt << "  (censored " << censored[a] << ")\n";
  }
  txt << "median episodes-to-threshold: fine " << fmt_short(summary.median_fine) << ", holistic "
      << fmt_short(summary.median_holistic) << ", ratio " << fmt_short(summary.episode_ratio)
      << '\n';
  txt << "median final perplexity: fine " << fmt_short(summary.ppl_fine) << ", holistic "
      << fmt_short(summary.ppl_holistic) << ", ratio " << fmt_short(summary.ppl_ratio) << '\n';
  write_text(out_dir / "summary.txt", txt.str());
  return summary;
}

namespace {

struct LfqaFinal {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, length = 0.0;
};

LfqaFinal lfqa_final_row(const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / "metrics.csv";
  const MetricLog log = read_metrics_csv(path);
  // Trailing-eval mean, for the same reason the comparison uses one.
  const std::size_t tail = std::min<std::size_t>(64, log.rows.size());
  LfqaFinal f;
  for (std::size_t r = log.rows.size() - tail; r < log.rows.size(); ++r) {
    f.c1 += cell_of(log, log.rows[r], "eval_c1", path);
    f.c2 += cell_of(log, log.rows[r], "eval_c2", path);
    f.c3 += cell_of(log, log.rows[r], "eval_c3", path);
    f.length += cell_of(log, log.rows[r], "eval_len", path);
  }
  const double n = static_cast<double>(tail);
  f.c1 /= n;
  f.c2 /= n;
  f.c3 /= n;
  f.length /= n;
  return f;
}

}  // namespace

std::vector<CustomizeRow> cmd_customize(const RunConfig& base,
                                        const std::vector<std::uint64_t>& seeds,
                                        const std::filesystem::path& out_dir) {
  if (seeds.empty()) throw ConfigError("customize needs at least one seed");
  if (base.env_kind != "lfqa") throw ConfigError("customize is defined on the lfqa env");
  if (base.customize_w1_values.empty()) throw ConfigError("customize.w1_values is empty");
  std::filesystem::create_directories(out_dir);

  std::ostringstream csv;
  csv << "row,w1,seed,c1,c2,c3,length\n";
  std::vector<CustomizeRow> means;
  for (double w1 : base.customize_w1_values) {
    CustomizeRow mean;
    mean.w1 = w1;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.w1 = w1;
      cfg.ppo.seed = seed;
      const std::filesystem::path dir =
          out_dir / ("w1_" + fmt_short(w1) + "_seed" + std::to_string(seed));
      run_training(cfg, dir);
      const LfqaFinal f = lfqa_final_row(dir);
      mean.c1 += f.c1;
      mean.c2 += f.c2;
      mean.c3 += f.c3;
      mean.length += f.length;
      csv << "run," << fmt_short(w1) << ',' << seed << ',' << fmt(f.c1) << ',' << fmt(f.c2) << ','
          << fmt(f.c3) << ',' << fmt(f.length) << '\n';
    }
    const double n = static_cast<double>(seeds.size());
    mean.c1 /= n;
    mean.c2 /= n;
    mean.c3 /= n;
    mean.length /= n;
    means.push_back(mean);
    csv << "mean," << fmt_short(w1) << ",-1," << fmt(mean.c1) << ',' << fmt(mean.c2) << ','
        << fmt(mean.c3) << ',' << fmt(mean.length) << '\n';
  }
  write_text(out_dir / "customize_report.csv", csv.str());

  std::ostringstream txt;
  txt << "reward weight customization (seed means over";
  for (std::uint64_t seed : seeds) txt << ' ' << seed;
  txt << ")\n";
  for (const CustomizeRow& m : means) {
    txt << "w1=" << fmt_short(m.w1) << ": c1 " << fmt_short(m.c1) << ", c2 " << fmt_short(m.c2)
        << ", c3 " << fmt_short(m.c3) << ", mean length " << fmt_short(m.length) << '\n';
  }
  write_text(out_dir / "summary.txt", txt.str());
  return means;
}

std::vector<AblateRow> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                  const std::filesystem::path& out_dir) {
  if (seeds.empty()) throw ConfigError("ablate needs at least one seed");
  if (base.env_kind != "lfqa") throw ConfigError("ablate is defined on the lfqa env");
  std::filesystem::create_directories(out_dir);

  struct Arm {
    const char* name;
    double w1, w2, w3;
  };
  const Arm arms[4] = {{"full", base.w1, base.w2, base.w3},
                       {"no_c1", 0.0, base.w2, base.w3},
                       {"no_c2", base.w1, 0.0, base.w3},
                       {"no_c3", base.w1, base.w2, 0.0}};

  std::ostringstream csv;
  csv << "row,arm,seed,c1,c2,c3,length\n";
  std::vector<AblateRow> means;
  for (const Arm& arm : arms) {
    AblateRow mean;
    mean.arm = arm.name;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.w1 = arm.w1;
      cfg.w2 = arm.w2;
      cfg.w3 = arm.w3;
      cfg.ppo.seed = seed;
      const std::filesystem::path dir =
          out_dir / (std::string(arm.name) + "_seed" + std::to_string(seed));
      run_training(cfg, dir);
      const LfqaFinal f = lfqa_final_row(dir);
      mean.c1 += f.c1;
      mean.c2 += f.c2;
      mean.c3 += f.c3;
      mean.length += f.length;
      csv << "run," << arm.name << ',' << seed << ',' << fmt(f.c1) << ',' << fmt(f.c2) << ','
          << fmt(f.c3) << ',' << fmt(f.length) << '\n';
    }
    const double n = static_cast<double>(seeds.size());
    mean.c1 /= n;
    mean.c2 /= n;
    mean.c3 /= n;
    mean.length /= n;
    means.push_back(mean);
    csv << "mean," << arm.name << ",-1," << fmt(mean.c1) << ',' << fmt(mean.c2) << ','
        << fmt(mean.c3) << ',' << fmt(mean.length) << '\n';
  }
  write_text(out_dir / "ablate_report.csv", csv.str());

  std::ostringstream txt;
  txt << "reward model ablation (seed means over";
  for (std::uint64_t seed : seeds) txt << ' ' << seed;
  txt << ")\n";
  for (const AblateRow& m : means) {
    txt << m.arm << ": c1 " << fmt_short(m.c1) << ", c2 " << fmt_short(m.c2) << ", c3 "
        << fmt_short(m.c3) << ", mean length " << fmt_short(m.length) << '\n';
  }
  write_text(out_dir / "summary.txt", txt.str());
  return means;
}

namespace {

// Oracle feedback for one sampled output under the annotation rules:
// category 1 marks each faulty sub-sentence; category 2 marks a faulty
// sentence only when no category-1 span touches it; category 3 marks the
// whole output when coverage is incomplete.
FeedbackAnnotation oracle_annotation(const LfqaEnv& env, const PromptSpec& spec,
                                     const Prompt& prompt, const std::vector<TokenId>& output) {
  FeedbackAnnotation ann;
  ann.prompt_id = prompt.id;
  ann.output = output;

  const std::vector<Span> subs = segment(output, Density::kSubsentence, env.vocab);
  const std::vector<double> sub_rewards = env.oracle.subsentence_rewards(output, subs, spec);
  std::vector<Span> c1_spans;
  for (std::size_t j = 0; j < subs.size(); ++j) {
    if (sub_rewards[j] < 0.0) {
      c1_spans.push_back(subs[j]);
      ann.spans.push_back(FeedbackSpan{1, subs[j].begin, subs[j].end});
    }
  }

  const std::vector<Span> sents = segment(output, Density::kSentence, env.vocab);
  const std::vector<double> sent_rewards = env.oracle.sentence_rewards(output, sents, spec);
  for (std::size_t j = 0; j < sents.size(); ++j) {
    if (sent_rewards[j] >= 0.0) continue;
    bool touched = false;
    for (const Span& c1 : c1_spans) {
      if (c1.begin <= sents[j].end && sents[j].begin <= c1.end) {
        touched = true;
        break;
      }
    }
    if (!touched) ann.spans.push_back(FeedbackSpan{2, sents[j].begin, sents[j].end});
  }

  if (env.oracle.completeness(output, spec) < 1.0) {
    ann.spans.push_back(FeedbackSpan{3, 1, static_cast<int>(output.size())});
  }
  ann.validate();
  return ann;
}

}  // namespace

RmTrainSummary cmd_rm_train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (cfg.env_kind != "lfqa") throw ConfigError("rm-train is defined on the lfqa env");
  std::filesystem::create_directories(out_dir);

  LfqaEnv env = generate_lfqa_env(cfg.env_seed, cfg.sizes);
  if (cfg.t_max_override > 0) env.t_max = cfg.t_max_override;
  const PolicyParams policy = initial_policy(env, cfg.init);
  SamplerConfig sampler = cfg.ppo.sampler;
  sampler.temperature = cfg.rm_temperature;

  const SegmentFeatureExtractor seg_features{env.vocab.size()};
  const SequenceFeatureExtractor seq_features{env.vocab.size()};
  std::vector<FeedbackAnnotation> annotations;
  std::vector<LabeledSegment> sub_data, sent_data;
  std::vector<ComparisonPair> pairs;

  for (const Prompt& prompt : env.train) {
    const PromptSpec* spec = env.spec_for(prompt.id);
    if (!spec) throw ConfigError("train prompt without a spec: id " + std::to_string(prompt.id));
    RngStream rng =
        RngStream::substream(cfg.rm_seed, 0xFEED, static_cast<std::uint64_t>(prompt.id));
    std::vector<std::vector<TokenId>> samples;
    samples.reserve(static_cast<std::size_t>(cfg.rm_outputs_per_prompt));
    for (int s = 0; s < cfg.rm_outputs_per_prompt; ++s) {
      samples.push_back(sample_output(policy, prompt, env.vocab, env.t_max, sampler, rng));
    }
    for (const std::vector<TokenId>& output : samples) {
      FeedbackAnnotation ann = oracle_annotation(env, *spec, prompt, output);
      const std::vector<Segment> subs = to_segments(segment(output, Density::kSubsentence, env.vocab));
      const std::vector<SegmentLabel> sub_labels = derive_segment_labels(ann, subs, 1);
      for (std::size_t j = 0; j < subs.size(); ++j) {
        sub_data.push_back(LabeledSegment{seg_features.extract(output, subs[j].span()),
                                          sub_labels[j]});
      }
      const std::vector<Segment> sents = to_segments(segment(output, Density::kSentence, env.vocab));
      const std::vector<SegmentLabel> sent_labels = derive_segment_labels(ann, sents, 2);
      for (std::size_t j = 0; j < sents.size(); ++j) {
        sent_data.push_back(LabeledSegment{seg_features.extract(output, sents[j].span()),
                                           sent_labels[j]});
      }
      annotations.push_back(std::move(ann));
    }
    std::vector<ComparisonPair> prompt_pairs =
        bootstrap_completeness_pairs(prompt, samples, spec->required_units);
    pairs.insert(pairs.end(), std::make_move_iterator(prompt_pairs.begin()),
                 std::make_move_iterator(prompt_pairs.end()));
  }

  save_annotations(out_dir / "annotations.tsv", annotations);

  RmTrainOptions options;
  options.step_size = cfg.rm_step_size;
  options.max_epochs = cfg.rm_max_epochs;
  options.holdout_fraction = cfg.rm_holdout_fraction;
  options.patience = cfg.rm_patience;
  options.seed = cfg.rm_seed;

  RmTrainSummary summary;
  const ClassifierRM c1 = train_classifier_rm(sub_data, seg_features, 1, Density::kSubsentence,
                                              options, &summary.c1);
  const ClassifierRM c2 = train_classifier_rm(sent_data, seg_features, 2, Density::kSentence,
                                              options, &summary.c2);
  const ScalarRM c3 = train_scalar_rm(pairs, seq_features, options, &summary.c3);
  c1.save(out_dir / "rm_c1.bin");
  c2.save(out_dir / "rm_c2.bin");
  c3.save(out_dir / "rm_c3.bin");
  summary.annotation_count = static_cast<int>(annotations.size());
  summary.pair_count = static_cast<int>(pairs.size());

  std::ostringstream txt;
  txt << "reward model training\n";
  txt << "annotated outputs: " << summary.annotation_count << '\n';
  auto report_line = [&txt](const char* name, const RmTrainReport& r) {
    txt << name << ": train " << r.train_count << ", holdout " << r.holdout_count << ", excluded "
        << r.excluded_count << ", best epoch " << r.best_epoch << ", best holdout loss "
        << fmt_short(r.best_holdout_loss) << ", holdout accuracy " << fmt_short(r.holdout_accuracy)
        << (r.single_class ? " (single class)" : "") << '\n';
  };
  report_line("sub-sentence classifier", summary.c1);
  report_line("sentence classifier", summary.c2);
  txt << "completeness pairs: " << summary.pair_count << '\n';
  report_line("completeness head", summary.c3);
  write_text(out_dir / "rm_report.txt", txt.str());
  return summary;
}

void cmd_eval(const RunConfig& cfg, const std::filesystem::path& run_dir,
              const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const PolicyParams policy = PolicyParams::load(run_dir / "policy.bin");

  std::ostringstream csv, txt;
  if (cfg.env_kind == "detox") {
    DetoxEnv env = generate_detox_env(cfg.env_seed, cfg.sizes);
    if (cfg.t_max_override > 0) env.t_max = cfg.t_max_override;
    if (policy.features.vocab_size != env.vocab.size()) {
      throw ConfigError("policy in " + run_dir.string() + " does not match the env vocabulary");
    }
    const PolicyParams reference = initial_policy(env, cfg.init);
    csv << "split,mean_max_toxicity,perplexity,distinct2,mean_length\n";
    txt << "detox eval of " << run_dir.string() << '\n';
    const struct {
      const char* name;
      const std::vector<Prompt>* prompts;
      std::uint64_t salt;
    } splits[2] = {{"dev", &env.dev, 0xDE1}, {"test", &env.test, 0x7E57}};
    for (const auto& split : splits) {
      const DetoxEvalResult r =
          detox_eval(env, *split.prompts, policy, reference, cfg.ppo.eval_samples,
                     cfg.ppo.sampler, cfg.ppo.seed, split.salt);
      csv << split.name << ',' << fmt(r.mean_max_toxicity) << ',' << fmt(r.perplexity) << ','
          << fmt(r.distinct2) << ',' << fmt(r.mean_length) << '\n';
      txt << split.name << ": mean max-toxicity " << fmt_short(r.mean_max_toxicity)
          << ", perplexity " << fmt_short(r.perplexity) << ", dist-2 " << fmt_short(r.distinct2)
          << ", mean length " << fmt_short(r.mean_length) << '\n';
    }
  } else {
    LfqaEnv env = generate_lfqa_env(cfg.env_seed, cfg.sizes);
    if (cfg.t_max_override > 0) env.t_max = cfg.t_max_override;
    if (policy.features.vocab_size != env.vocab.size()) {
      throw ConfigError("policy in " + run_dir.string() + " does not match the env vocabulary");
    }
    const PolicyParams reference = initial_policy(env, cfg.init);
    csv << "split,c1,c2,c3,mean_length,perplexity\n";
    txt << "lfqa eval of " << run_dir.string() << '\n';
    const struct {
      const char* name;
      const std::vector<Prompt>* prompts;
      std::uint64_t salt;
    } splits[2] = {{"dev", &env.dev, 0xDE1}, {"test", &env.test, 0x7E57}};
    for (const auto& split : splits) {
      const LfqaEvalResult r =
          lfqa_eval(env, *split.prompts, policy, reference, cfg.ppo.eval_samples, cfg.ppo.sampler,
                    cfg.ppo.seed, split.salt);
      csv << split.name << ',' << fmt(r.subsentence_mean) << ',' << fmt(r.sentence_mean) << ','
          << fmt(r.completeness_mean) << ',' << fmt(r.mean_length) << ',' << fmt(r.perplexity)
          << '\n';
      txt << split.name << ": c1 " << fmt_short(r.subsentence_mean) << ", c2 "
          << fmt_short(r.sentence_mean) << ", c3 " << fmt_short(r.completeness_mean)
          << ", mean length " << fmt_short(r.mean_length) << ", perplexity "
          << fmt_short(r.perplexity) << '\n';
    }
  }
  write_text(out_dir / "eval_report.csv", csv.str());
  write_text(out_dir / "summary.txt", txt.str());
}

}  // namespace fgrlhf
