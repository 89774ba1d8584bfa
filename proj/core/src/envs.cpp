#include "fgrlhf/envs.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fgrlhf/errors.hpp"
#include "fgrlhf/rng.hpp"

namespace fgrlhf {

namespace {

// Shared token layout: control tokens first, then env-specific blocks.
constexpr TokenId kBos = 0;
constexpr TokenId kEos = 1;
constexpr TokenId kPeriod = 2;
constexpr TokenId kComma = 3;
constexpr TokenId kSemicolon = 4;

// Detox blocks.
constexpr int kCleanBase = 5, kCleanCount = 8;
constexpr int kToxicBase = 13, kToxicCount = 6;
constexpr int kNeutralPromptBase = 19, kNeutralPromptCount = 4;
constexpr int kProvocativePromptBase = 23, kProvocativePromptCount = 4;
constexpr int kDetoxVocab = 27;

// QA blocks.
constexpr TokenId kQuestion = 5;
constexpr int kTopicBase = 6, kTopicCount = 4;
constexpr int kFactBase = 10, kFactsPerTopic = 4;
constexpr int kAuxBase = 26, kAuxPerTopic = 6;
constexpr int kIrrelevantBase = 50, kIrrelevantCount = 6;
constexpr int kFillerBase = 56, kFillerCount = 4;
constexpr int kLfqaVocab = 60;

Vocabulary base_vocab(int vocab_size) {
  Vocabulary v;
  v.tokens.resize(static_cast<std::size_t>(vocab_size));
  v.tokens[kBos] = "<bos>";
  v.tokens[kEos] = "<eos>";
  v.tokens[kPeriod] = ".";
  v.tokens[kComma] = ",";
  v.tokens[kSemicolon] = ";";
  v.bos = kBos;
  v.eos = kEos;
  v.sentence_delim = kPeriod;
  v.subsentence_delims = {kComma, kSemicolon};
  return v;
}

// Stream purposes, so unrelated draws never share a sequence.
constexpr std::uint64_t kStreamPrompt = 0xD0;
constexpr std::uint64_t kStreamDemo = 0xDE;
constexpr std::uint64_t kStreamTopic = 0x70;
constexpr std::uint64_t kStreamInit = 0x17;

double provocation_level(std::uint64_t seed, int prompt_id) {
  RngStream rng = RngStream::substream(seed, kStreamPrompt, static_cast<std::uint64_t>(prompt_id));
  (void)rng.uniform();  // position 0 feeds prompt token draws
  return 0.5 + 0.4 * rng.uniform();
}

}  // namespace

DetoxEnv generate_detox_env(std::uint64_t seed, const EnvSizes& sizes) {
  if (sizes.train < 1 || sizes.dev < 1 || sizes.test < 1) {
    throw ConfigError("every split needs at least one prompt");
  }
  DetoxEnv env;
  env.seed = seed;
  env.vocab = base_vocab(kDetoxVocab);
  for (int i = 0; i < kCleanCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kCleanBase + i)] = "c" + std::to_string(i);
  for (int i = 0; i < kToxicCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kToxicBase + i)] = "x" + std::to_string(i);
  for (int i = 0; i < kNeutralPromptCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kNeutralPromptBase + i)] = "u" + std::to_string(i);
  for (int i = 0; i < kProvocativePromptCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kProvocativePromptBase + i)] = "q" + std::to_string(i);
  env.vocab.validate();
  for (int i = 0; i < kToxicCount; ++i) env.oracle.toxic_tokens.insert(kToxicBase + i);

  const int total = sizes.train + sizes.dev + sizes.test;
  env.provocation.resize(static_cast<std::size_t>(total));
  for (int id = 0; id < total; ++id) {
    RngStream rng = RngStream::substream(seed, kStreamPrompt, static_cast<std::uint64_t>(id));
    (void)rng.uniform();
    const double rho = 0.5 + 0.4 * rng.uniform();
    env.provocation[static_cast<std::size_t>(id)] = rho;
    Prompt p;
    p.id = id;
    p.tokens.push_back(kBos);
    for (int slot = 0; slot < 2; ++slot) {
      if (rng.uniform() < rho) {
        p.tokens.push_back(kProvocativePromptBase + rng.uniform_int(0, kProvocativePromptCount - 1));
      } else {
        p.tokens.push_back(kNeutralPromptBase + rng.uniform_int(0, kNeutralPromptCount - 1));
      }
    }
    if (id < sizes.train) {
      env.train.push_back(std::move(p));
    } else if (id < sizes.train + sizes.dev) {
      env.dev.push_back(std::move(p));
    } else {
      env.test.push_back(std::move(p));
    }
  }
  return env;
}

std::vector<TokenId> demo_continuation(const DetoxEnv& env, int prompt_id) {
  const double rho = env.provocation[static_cast<std::size_t>(prompt_id)];
  RngStream rng = RngStream::substream(env.seed, kStreamDemo, static_cast<std::uint64_t>(prompt_id));
  const int content_len = 10 + rng.uniform_int(0, 8);
  std::vector<TokenId> demo;
  for (int pos = 1; pos <= content_len; ++pos) {
    if (pos % 4 == 0) {
      demo.push_back(rng.uniform() < 0.7 ? kPeriod : kComma);
    } else if (rng.uniform() < rho * 0.85) {
      demo.push_back(kToxicBase + rng.uniform_int(0, kToxicCount - 1));
    } else {
      demo.push_back(kCleanBase + rng.uniform_int(0, kCleanCount - 1));
    }
  }
  if (demo.back() != kPeriod) demo.push_back(kPeriod);
  demo.push_back(kEos);
  return demo;
}

const PromptSpec* LfqaEnv::spec_for(int prompt_id) const {
  if (prompt_id < 0 || prompt_id >= static_cast<int>(specs.size())) return nullptr;
  return &specs[static_cast<std::size_t>(prompt_id)];
}

LfqaEnv generate_lfqa_env(std::uint64_t seed, const EnvSizes& sizes) {
  if (sizes.train < 1 || sizes.dev < 1 || sizes.test < 1) {
    throw ConfigError("every split needs at least one prompt");
  }
  LfqaEnv env;
  env.seed = seed;
  env.vocab = base_vocab(kLfqaVocab);
  env.vocab.tokens[kQuestion] = "Q";
  for (int i = 0; i < kTopicCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kTopicBase + i)] = "t" + std::to_string(i);
  for (int i = 0; i < kTopicCount * kFactsPerTopic; ++i) env.vocab.tokens[static_cast<std::size_t>(kFactBase + i)] = "f" + std::to_string(i);
  for (int i = 0; i < kTopicCount * kAuxPerTopic; ++i) env.vocab.tokens[static_cast<std::size_t>(kAuxBase + i)] = "g" + std::to_string(i);
  for (int i = 0; i < kIrrelevantCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kIrrelevantBase + i)] = "i" + std::to_string(i);
  for (int i = 0; i < kFillerCount; ++i) env.vocab.tokens[static_cast<std::size_t>(kFillerBase + i)] = "v" + std::to_string(i);
  env.vocab.validate();

  for (int i = 0; i < kTopicCount * kFactsPerTopic; ++i) env.oracle.fact_universe.insert(kFactBase + i);
  env.oracle.structural_tokens = {kBos, kEos, kPeriod, kComma, kSemicolon};

  // Per-topic ground truth: one unsupported fact, two required units.
  struct Topic {
    std::set<TokenId> relevant, facts, units;
  };
  std::vector<Topic> topics;
  for (int t = 0; t < kTopicCount; ++t) {
    RngStream rng = RngStream::substream(seed, kStreamTopic, static_cast<std::uint64_t>(t));
    Topic topic;
    std::vector<TokenId> all_facts;
    for (int f = 0; f < kFactsPerTopic; ++f) all_facts.push_back(kFactBase + t * kFactsPerTopic + f);
    const int ungrounded = rng.uniform_int(0, kFactsPerTopic - 1);
    std::vector<TokenId> grounded;
    for (int f = 0; f < kFactsPerTopic; ++f) {
      topic.relevant.insert(all_facts[static_cast<std::size_t>(f)]);
      if (f != ungrounded) grounded.push_back(all_facts[static_cast<std::size_t>(f)]);
    }
    topic.facts.insert(grounded.begin(), grounded.end());
    const int dropped = rng.uniform_int(0, static_cast<int>(grounded.size()) - 1);
    for (int f = 0; f < static_cast<int>(grounded.size()); ++f) {
      if (f != dropped) topic.units.insert(grounded[static_cast<std::size_t>(f)]);
    }
    for (int a = 0; a < kAuxPerTopic; ++a) topic.relevant.insert(kAuxBase + t * kAuxPerTopic + a);
    topics.push_back(std::move(topic));
  }

  const int total = sizes.train + sizes.dev + sizes.test;
  for (int id = 0; id < total; ++id) {
    RngStream rng = RngStream::substream(seed, kStreamPrompt, static_cast<std::uint64_t>(id));
    const int topic_index = rng.uniform_int(0, kTopicCount - 1);
    Prompt p;
    p.id = id;
    p.tokens = {kBos, kQuestion, kTopicBase + topic_index,
                kFillerBase + rng.uniform_int(0, kFillerCount - 1)};
    PromptSpec spec;
    spec.prompt_id = id;
    spec.topic = topic_index;
    spec.relevant_tokens = topics[static_cast<std::size_t>(topic_index)].relevant;
    spec.passage_facts = topics[static_cast<std::size_t>(topic_index)].facts;
    spec.required_units = topics[static_cast<std::size_t>(topic_index)].units;
    spec.validate();
    env.specs.push_back(std::move(spec));
    if (id < sizes.train) {
      env.train.push_back(std::move(p));
    } else if (id < sizes.train + sizes.dev) {
      env.dev.push_back(std::move(p));
    } else {
      env.test.push_back(std::move(p));
    }
  }
  return env;
}

std::vector<TokenId> demo_continuation(const LfqaEnv& env, int prompt_id) {
  const PromptSpec* spec = env.spec_for(prompt_id);
  if (spec == nullptr) throw ConfigError("demo requested for unknown prompt id");
  RngStream rng = RngStream::substream(env.seed, kStreamDemo, static_cast<std::uint64_t>(prompt_id));

  // Gold content: every required unit, then any remaining supported fact,
  // then one topic aux token. All distinct, so no sub-sentence repeats.
  std::vector<TokenId> content(spec->required_units.begin(), spec->required_units.end());
  rng.shuffle(content);
  for (TokenId f : spec->passage_facts) {
    if (!spec->required_units.count(f)) content.push_back(f);
  }
  const int topic = spec->topic;
  content.push_back(kAuxBase + topic * kAuxPerTopic + rng.uniform_int(0, kAuxPerTopic - 1));
  if (content.size() >= 2 && rng.uniform() < 0.5) {
    std::swap(content[content.size() - 1], content[content.size() - 2]);
  }

  // Some training answers also state the topic's unsupported claim, so the
  // model fit to them hallucinates it and only the factuality signal
  // pushes back. Held-out demos stay gold.
  if (prompt_id < static_cast<int>(env.train.size()) && rng.uniform() < 0.3) {
    TokenId ungrounded = -1;
    for (TokenId tok : spec->relevant_tokens) {
      if (env.oracle.fact_universe.count(tok) && !spec->passage_facts.count(tok)) {
        ungrounded = tok;
      }
    }
    if (ungrounded >= 0) {
      const int at = rng.uniform_int(0, static_cast<int>(content.size()) - 1);
      content.insert(content.begin() + at, ungrounded);
    }
  }

  // Delimiter after every content token, alternating , and . so sentences
  // hold two sub-sentences; the answer always closes with . then eos.
  std::vector<TokenId> demo;
  for (std::size_t i = 0; i < content.size(); ++i) {
    demo.push_back(content[i]);
    demo.push_back(i % 2 == 0 ? kComma : kPeriod);
  }
  if (demo.back() == kComma) demo.back() = kPeriod;
  demo.push_back(kEos);
  return demo;
}

namespace {

PolicyParams fit_mle(const Vocabulary& vocab, const std::vector<Prompt>& prompts,
                     const std::vector<std::vector<TokenId>>& demos,
                     const InitOptions& options) {
  PolicyParams policy;
  policy.features.context_window = options.context_window;
  policy.features.vocab_size = vocab.size();
  policy.weights = Matrix(policy.features.dim(), vocab.size(), 0.0);

  // Teacher-forced (state, next-token) pairs.
  std::vector<std::vector<TokenId>> states;
  std::vector<TokenId> targets;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    std::vector<TokenId> state = prompts[i].tokens;
    for (TokenId next : demos[i]) {
      states.push_back(state);
      targets.push_back(next);
      state.push_back(next);
    }
  }
  const double inv = 1.0 / static_cast<double>(states.size());
  Matrix grad(policy.weights.rows(), policy.weights.cols());
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    grad.fill(0.0);
    for (std::size_t i = 0; i < states.size(); ++i) {
      accumulate_logprob_grad(policy, states[i], targets[i], inv, grad);
    }
    policy.weights.axpy(options.step_size, grad);
  }
  return policy;
}

PolicyParams random_policy(int vocab_size, const InitOptions& options) {
  PolicyParams policy;
  policy.features.context_window = options.context_window;
  policy.features.vocab_size = vocab_size;
  policy.weights = Matrix(policy.features.dim(), vocab_size, 0.0);
  if (options.noise > 0.0) {
    RngStream rng = RngStream::substream(options.seed, kStreamInit);
    for (double& w : policy.weights.data()) w = options.noise * rng.normal();
  }
  return policy;
}

}  // namespace

PolicyParams initial_policy(const DetoxEnv& env, const InitOptions& options) {
  if (options.mode == InitMode::kRandom) return random_policy(env.vocab.size(), options);
  std::vector<std::vector<TokenId>> demos;
  demos.reserve(env.train.size());
  for (const Prompt& p : env.train) demos.push_back(demo_continuation(env, p.id));
  return fit_mle(env.vocab, env.train, demos, options);
}

PolicyParams initial_policy(const LfqaEnv& env, const InitOptions& options) {
  if (options.mode == InitMode::kRandom) return random_policy(env.vocab.size(), options);
  std::vector<std::vector<TokenId>> demos;
  demos.reserve(env.train.size());
  for (const Prompt& p : env.train) demos.push_back(demo_continuation(env, p.id));
  return fit_mle(env.vocab, env.train, demos, options);
}

ValueParams initial_value(const PolicyParams& policy) {
  ValueParams value;
  value.features = policy.features;
  value.weights.assign(static_cast<std::size_t>(value.features.dim()), 0.0);
  return value;
}

InitMode init_mode_from_name(const std::string& name) {
  if (name == "random") return InitMode::kRandom;
  if (name == "sft_analog") return InitMode::kSftAnalog;
  throw ConfigError("unknown init mode: " + name);
}

const char* init_mode_name(InitMode m) {
  return m == InitMode::kRandom ? "random" : "sft_analog";
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

void write_prompts(const std::filesystem::path& path, const std::vector<Prompt>& prompts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  for (const Prompt& p : prompts) {
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
      if (i) out << ' ';
      out << p.tokens[i];
    }
    out << '\n';
  }
}

std::vector<Prompt> read_prompts(const std::filesystem::path& path, int first_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  std::vector<Prompt> prompts;
  std::string line;
  int id = first_id;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Prompt p;
    p.id = id++;
    std::istringstream tokens(line);
    int tok;
    while (tokens >> tok) p.tokens.push_back(tok);
    prompts.push_back(std::move(p));
  }
  return prompts;
}

std::string join_ids(const std::set<TokenId>& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out += ',';
    out += std::to_string(id);
  }
  return out;
}

std::set<TokenId> split_ids(const std::string& csv) {
  std::set<TokenId> out;
  std::istringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("bad key=value line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                           const std::filesystem::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("missing key '" + key + "' in " + path.string());
  return it->second;
}

void write_common_meta(std::ofstream& out, const Vocabulary& vocab, std::uint64_t seed,
                       int t_max, const EnvSizes& sizes) {
  out << "seed=" << seed << '\n';
  out << "t_max=" << t_max << '\n';
  out << "bos=" << vocab.bos << '\n';
  out << "eos=" << vocab.eos << '\n';
  out << "sentence_delim=" << vocab.sentence_delim << '\n';
  out << "subsentence_delims=" << join_ids(vocab.subsentence_delims) << '\n';
  out << "train=" << sizes.train << '\n';
  out << "dev=" << sizes.dev << '\n';
  out << "test=" << sizes.test << '\n';
}

Vocabulary load_vocab_common(const std::filesystem::path& dir,
                             const std::map<std::string, std::string>& kv) {
  Vocabulary vocab;
  vocab.tokens = Vocabulary::load_tokens(dir / "vocab.txt");
  vocab.bos = std::stoi(require(kv, "bos", dir / "meta.txt"));
  vocab.eos = std::stoi(require(kv, "eos", dir / "meta.txt"));
  vocab.sentence_delim = std::stoi(require(kv, "sentence_delim", dir / "meta.txt"));
  vocab.subsentence_delims = split_ids(require(kv, "subsentence_delims", dir / "meta.txt"));
  vocab.validate();
  return vocab;
}

}  // namespace

void save_env(const DetoxEnv& env, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  env.vocab.save_tokens(dir / "vocab.txt");
  std::ofstream meta(dir / "meta.txt", std::ios::trunc);
  if (!meta) throw std::runtime_error("cannot open for write: " + (dir / "meta.txt").string());
  meta << "kind=detox\n";
  write_common_meta(meta, env.vocab, env.seed, env.t_max,
                    EnvSizes{static_cast<int>(env.train.size()), static_cast<int>(env.dev.size()),
                             static_cast<int>(env.test.size())});
  meta << "toxic=" << join_ids(env.oracle.toxic_tokens) << '\n';
  write_prompts(dir / "train.txt", env.train);
  write_prompts(dir / "dev.txt", env.dev);
  write_prompts(dir / "test.txt", env.test);
  std::ofstream prov(dir / "provocation.txt", std::ios::trunc);
  char buf[40];
  for (double rho : env.provocation) {
    std::snprintf(buf, sizeof buf, "%.17g", rho);
    prov << buf << '\n';
  }
}

DetoxEnv load_detox_env(const std::filesystem::path& dir) {
  const auto kv = read_kv(dir / "meta.txt");
  if (require(kv, "kind", dir / "meta.txt") != "detox") {
    throw ParseError("env directory is not a detox env");
  }
  DetoxEnv env;
  env.vocab = load_vocab_common(dir, kv);
  env.seed = std::stoull(require(kv, "seed", dir / "meta.txt"));
  env.t_max = std::stoi(require(kv, "t_max", dir / "meta.txt"));
  env.oracle.toxic_tokens = split_ids(require(kv, "toxic", dir / "meta.txt"));
  const int train = std::stoi(require(kv, "train", dir / "meta.txt"));
  const int dev = std::stoi(require(kv, "dev", dir / "meta.txt"));
  env.train = read_prompts(dir / "train.txt", 0);
  env.dev = read_prompts(dir / "dev.txt", train);
  env.test = read_prompts(dir / "test.txt", train + dev);
  std::ifstream prov(dir / "provocation.txt");
  if (!prov) throw std::runtime_error("cannot open provocation.txt");
  double rho;
  while (prov >> rho) env.provocation.push_back(rho);
  return env;
}

void save_env(const LfqaEnv& env, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  env.vocab.save_tokens(dir / "vocab.txt");
  std::ofstream meta(dir / "meta.txt", std::ios::trunc);
  if (!meta) throw std::runtime_error("cannot open for write: " + (dir / "meta.txt").string());
  meta << "kind=lfqa\n";
  write_common_meta(meta, env.vocab, env.seed, env.t_max,
                    EnvSizes{static_cast<int>(env.train.size()), static_cast<int>(env.dev.size()),
                             static_cast<int>(env.test.size())});
  meta << "fact_universe=" << join_ids(env.oracle.fact_universe) << '\n';
  meta << "structural=" << join_ids(env.oracle.structural_tokens) << '\n';
  write_prompts(dir / "train.txt", env.train);
  write_prompts(dir / "dev.txt", env.dev);
  write_prompts(dir / "test.txt", env.test);
  std::ofstream specs(dir / "specs.txt", std::ios::trunc);
  for (const PromptSpec& s : env.specs) {
    specs << "id=" << s.prompt_id << " topic=" << s.topic
          << " relevant=" << join_ids(s.relevant_tokens)
          << " facts=" << join_ids(s.passage_facts)
          << " units=" << join_ids(s.required_units) << '\n';
  }
}

LfqaEnv load_lfqa_env(const std::filesystem::path& dir) {
  const auto kv = read_kv(dir / "meta.txt");
  if (require(kv, "kind", dir / "meta.txt") != "lfqa") {
    throw ParseError("env directory is not a QA env");
  }
  LfqaEnv env;
  env.vocab = load_vocab_common(dir, kv);
  env.seed = std::stoull(require(kv, "seed", dir / "meta.txt"));
  env.t_max = std::stoi(require(kv, "t_max", dir / "meta.txt"));
  env.oracle.fact_universe = split_ids(require(kv, "fact_universe", dir / "meta.txt"));
  env.oracle.structural_tokens = split_ids(require(kv, "structural", dir / "meta.txt"));
  const int train = std::stoi(require(kv, "train", dir / "meta.txt"));
  const int dev = std::stoi(require(kv, "dev", dir / "meta.txt"));
  env.train = read_prompts(dir / "train.txt", 0);
  env.dev = read_prompts(dir / "dev.txt", train);
  env.test = read_prompts(dir / "test.txt", train + dev);

  std::ifstream specs(dir / "specs.txt");
  if (!specs) throw std::runtime_error("cannot open specs.txt");
  std::string line;
  while (std::getline(specs, line)) {
    if (line.empty()) continue;
    PromptSpec spec;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      const std::size_t eq = field.find('=');
      if (eq == std::string::npos) throw ParseError("bad spec field: " + field);
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "id") spec.prompt_id = std::stoi(value);
      else if (key == "topic") spec.topic = std::stoi(value);
      else if (key == "relevant") spec.relevant_tokens = split_ids(value);
      else if (key == "facts") spec.passage_facts = split_ids(value);
      else if (key == "units") spec.required_units = split_ids(value);
      else throw ParseError("unknown spec key: " + key);
    }
    spec.validate();
    env.specs.push_back(std::move(spec));
  }
  return env;
}

std::string env_kind(const std::filesystem::path& dir) {
  const auto kv = read_kv(dir / "meta.txt");
  return require(kv, "kind", dir / "meta.txt");
}

}  // namespace fgrlhf
