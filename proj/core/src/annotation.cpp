#include "fgrlhf/annotation.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "fgrlhf/errors.hpp"

namespace fgrlhf {

namespace {

bool spans_overlap(const FeedbackSpan& a, const FeedbackSpan& b) {
  return a.begin <= b.end && b.begin <= a.end;
}

bool overlaps_segment(const FeedbackSpan& span, const Segment& seg) {
  return span.begin <= seg.end && seg.begin <= span.end;
}

}  // namespace

void FeedbackAnnotation::validate() const {
  const int total = static_cast<int>(output.size());
  for (const FeedbackSpan& s : spans) {
    if (s.category < 1 || s.category > 3) {
      throw AnnotationError("span category must be 1, 2, or 3");
    }
    if (s.begin < 1 || s.end < s.begin || s.end > total) {
      throw AnnotationError("span (" + std::to_string(s.begin) + ", " + std::to_string(s.end) +
                            ") outside output of length " + std::to_string(total));
    }
    if (s.category == 3 && (s.begin != 1 || s.end != total)) {
      throw AnnotationError("category-3 spans must cover the whole output");
    }
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].category == 3) continue;
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      if (spans[j].category == 3) continue;
      if (spans_overlap(spans[i], spans[j])) {
        throw AnnotationError("category-1/2 spans overlap");
      }
    }
  }
}

std::vector<SegmentLabel> derive_segment_labels(const FeedbackAnnotation& annotation,
                                                const std::vector<Segment>& segments,
                                                int category) {
  annotation.validate();
  std::vector<SegmentLabel> labels;
  labels.reserve(segments.size());
  for (const Segment& seg : segments) {
    bool own_category = false;
    bool category_one = false;
    for (const FeedbackSpan& span : annotation.spans) {
      if (!overlaps_segment(span, seg)) continue;
      if (span.category == category) own_category = true;
      if (span.category == 1) category_one = true;
    }
    if (own_category) {
      labels.push_back(SegmentLabel::kHasError);
    } else if (category == 2 && category_one) {
      // Assessed for irrelevance only; factual correctness was never judged.
      labels.push_back(SegmentLabel::kExcluded);
    } else {
      labels.push_back(SegmentLabel::kNoError);
    }
  }
  return labels;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<FeedbackAnnotation>& annotations) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  for (const FeedbackAnnotation& a : annotations) {
    out << a.prompt_id << '\t';
    for (std::size_t i = 0; i < a.output.size(); ++i) {
      if (i) out << ' ';
      out << a.output[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < a.spans.size(); ++i) {
      if (i) out << ';';
      out << a.spans[i].category << ',' << a.spans[i].begin << ',' << a.spans[i].end;
    }
    out << '\n';
  }
}

std::vector<FeedbackAnnotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  std::vector<FeedbackAnnotation> annotations;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw ParseError("annotation line " + std::to_string(line_no) + ": expected 3 fields");
    }
    FeedbackAnnotation a;
    try {
      a.prompt_id = std::stoi(fields[0]);
      std::istringstream tokens(fields[1]);
      int tok;
      while (tokens >> tok) a.output.push_back(tok);
      if (!fields[2].empty()) {
        std::istringstream spans(fields[2]);
        std::string triple;
        while (std::getline(spans, triple, ';')) {
          FeedbackSpan s;
          if (std::sscanf(triple.c_str(), "%d,%d,%d", &s.category, &s.begin, &s.end) != 3) {
            throw ParseError("bad span triple: " + triple);
          }
          a.spans.push_back(s);
        }
      }
    } catch (const std::invalid_argument&) {
      throw ParseError("annotation line " + std::to_string(line_no) + ": bad number");
    }
    a.validate();
    annotations.push_back(std::move(a));
  }
  return annotations;
}

}  // namespace fgrlhf
