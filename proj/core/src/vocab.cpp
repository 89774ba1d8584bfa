#include "fgrlhf/vocab.hpp"

#include <fstream>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

void Vocabulary::validate() const {
  if (tokens.empty()) throw ConfigError("vocabulary is empty");
  if (!contains(bos)) throw ConfigError("bos id out of range");
  if (!contains(eos)) throw ConfigError("eos id out of range");
  if (!contains(sentence_delim)) throw ConfigError("sentence delimiter id out of range");
  if (bos == eos) throw ConfigError("bos and eos must differ");
  if (sentence_delim == bos || sentence_delim == eos) {
    throw ConfigError("sentence delimiter collides with bos/eos");
  }
  for (TokenId id : subsentence_delims) {
    if (!contains(id)) throw ConfigError("sub-sentence delimiter id out of range");
    if (id == sentence_delim) {
      throw ConfigError("sentence delimiter must not appear in sub-sentence delimiter set");
    }
    if (id == bos || id == eos) {
      throw ConfigError("sub-sentence delimiter collides with bos/eos");
    }
  }
}

void Vocabulary::save_tokens(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  for (const std::string& t : tokens) out << t << '\n';
}

std::vector<std::string> Vocabulary::load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return tokens;
}

}  // namespace fgrlhf
