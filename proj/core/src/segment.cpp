#include "fgrlhf/segment.hpp"

#include <string>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

std::vector<Span> segment(const std::vector<TokenId>& actions, Density density,
                          const Vocabulary& vocab) {
  const int total = static_cast<int>(actions.size());
  std::vector<Span> spans;
  if (total == 0) return spans;
  if (density == Density::kSequence) {
    spans.push_back(Span{1, total});
    return spans;
  }
  int start = 1;
  for (int t = 1; t <= total; ++t) {
    const TokenId tok = actions[static_cast<std::size_t>(t - 1)];
    const bool boundary = density == Density::kSentence ? vocab.is_sentence_boundary(tok)
                                                        : vocab.is_subsentence_boundary(tok);
    if (boundary) {
      spans.push_back(Span{start, t});
      start = t + 1;
    }
  }
  if (start <= total) spans.push_back(Span{start, total});
  return spans;
}

SegmentMap build_segment_map(const std::vector<TokenId>& actions,
                             const std::vector<Density>& densities, const Vocabulary& vocab) {
  if (actions.empty()) throw ShapeError("cannot build a segment map for an empty output");
  SegmentMap map;
  map.categories.reserve(densities.size());
  for (Density d : densities) {
    CategorySegments cat;
    cat.density = d;
    const std::vector<Span> spans = segment(actions, d, vocab);
    cat.segments.reserve(spans.size());
    for (int j = 0; j < static_cast<int>(spans.size()); ++j) {
      cat.segments.push_back(Segment{j + 1, spans[static_cast<std::size_t>(j)].begin,
                                     spans[static_cast<std::size_t>(j)].end});
    }
    map.categories.push_back(std::move(cat));
  }
  return map;
}

const char* density_name(Density d) {
  switch (d) {
    case Density::kSubsentence: return "subsentence";
    case Density::kSentence: return "sentence";
    case Density::kSequence: return "sequence";
  }
  return "unknown";
}

Density density_from_name(const std::string& name) {
  if (name == "subsentence") return Density::kSubsentence;
  if (name == "sentence") return Density::kSentence;
  if (name == "sequence") return Density::kSequence;
  throw ConfigError("unknown density name: " + name);
}

}  // namespace fgrlhf
