#pragma once

#include <filesystem>
#include <vector>

#include "fgrlhf/segment.hpp"
#include "fgrlhf/vocab.hpp"

namespace fgrlhf {

// One marked error span <c, b, e>: category c in {1,2,3}, 1-based inclusive
// token positions b..e within the annotated output.
struct FeedbackSpan {
  int category = 0;
  int begin = 0;
  int end = 0;
  bool operator==(const FeedbackSpan&) const = default;
};

// Feedback for one (prompt, output) pair. Three restrictions hold:
// spans of category 1 or 2 never overlap each other (across both
// categories); a span labeled category 1 is never also labeled category 2;
// category 3 spans cover the whole output.
struct FeedbackAnnotation {
  int prompt_id = -1;
  std::vector<TokenId> output;
  std::vector<FeedbackSpan> spans;

  // Throws AnnotationError when a restriction or range check fails.
  void validate() const;
};

// Training label for one segment. Excluded segments contribute zero loss.
enum class SegmentLabel { kNoError, kHasError, kExcluded };

// Labels `segments` (at the density of reward category `category`) against
// the annotation's spans. A segment has an error iff a span of the same
// category overlaps it. For category 2, a segment overlapped only by
// category-1 spans was never assessed for factual error, so it is excluded
// from the loss instead of counted as clean.
std::vector<SegmentLabel> derive_segment_labels(const FeedbackAnnotation& annotation,
                                                const std::vector<Segment>& segments,
                                                int category);

// Line format: prompt_id <TAB> space-separated output tokens <TAB>
// semicolon-separated c,b,e triples (third field empty when span-free).
void save_annotations(const std::filesystem::path& path,
                      const std::vector<FeedbackAnnotation>& annotations);
std::vector<FeedbackAnnotation> load_annotations(const std::filesystem::path& path);

}  // namespace fgrlhf
