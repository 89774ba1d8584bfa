#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace fgrlhf {

using TokenId = int;

// Finite vocabulary with dense ids 0..V-1. Ids are positions in `tokens`.
// sentence_delim is the "."-analog; subsentence_delims are the ","/";"
// analogs. A sentence boundary is also a sub-sentence boundary, so
// segmentation treats sentence_delim as a member of the sub-sentence
// delimiter set even though the stored sets are disjoint.
struct Vocabulary {
  std::vector<std::string> tokens;
  TokenId bos = -1;
  TokenId eos = -1;
  TokenId sentence_delim = -1;
  std::set<TokenId> subsentence_delims;

  int size() const { return static_cast<int>(tokens.size()); }

  bool contains(TokenId id) const { return id >= 0 && id < size(); }

  bool is_sentence_boundary(TokenId id) const { return id == sentence_delim; }

  // True for sentence_delim as well: every sentence boundary ends a
  // sub-sentence too.
  bool is_subsentence_boundary(TokenId id) const {
    return id == sentence_delim || subsentence_delims.count(id) > 0;
  }

  // Throws ConfigError unless all special ids are in range, distinct in the
  // required ways, and sentence_delim is not listed as a sub-sentence delim.
  void validate() const;

  // One token string per line, line number = id.
  void save_tokens(const std::filesystem::path& path) const;
  static std::vector<std::string> load_tokens(const std::filesystem::path& path);
};

}  // namespace fgrlhf
