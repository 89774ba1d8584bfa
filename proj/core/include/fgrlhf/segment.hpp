#pragma once

#include <vector>

#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// Granularity at which a reward source scores an output.
enum class Density { kSubsentence, kSentence, kSequence };

// 1-based inclusive span over generated positions: tokens a_begin..a_end.
struct Span {
  int begin = 0;
  int end = 0;
  bool operator==(const Span&) const = default;
};

// Span plus its 1-based position j within its density's segment list.
// The segment's final position (end) is the reward timestep T_j.
struct Segment {
  int index = 0;
  int begin = 0;
  int end = 0;
  bool operator==(const Segment&) const = default;

  Span span() const { return Span{begin, end}; }
  int token_count() const { return end - begin + 1; }
};

// Splits a_1..a_T into contiguous spans at the given density.
//
// A delimiter token closes the span it belongs to. Sub-sentence density
// splits after sentence and sub-sentence delimiters; sentence density
// splits after sentence delimiters only; sequence density is the single
// span (1, T). A trailing run with no closing delimiter (eos included)
// forms the final span. Result is empty only when T = 0.
std::vector<Span> segment(const std::vector<TokenId>& actions, Density density,
                          const Vocabulary& vocab);

// Segment list for one reward category, in category order.
struct CategorySegments {
  Density density = Density::kSequence;
  std::vector<Segment> segments;
};

// Per-category segmentation of one output. categories[k] corresponds to
// position k in the density/spec list handed to build_segment_map.
struct SegmentMap {
  std::vector<CategorySegments> categories;
};

SegmentMap build_segment_map(const std::vector<TokenId>& actions,
                             const std::vector<Density>& densities, const Vocabulary& vocab);

const char* density_name(Density d);
Density density_from_name(const std::string& name);

}  // namespace fgrlhf
