#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <set>
#include <vector>

#include "fgrlhf/errors.hpp"
#include "fgrlhf/features.hpp"
#include "fgrlhf/matrix.hpp"
#include "fgrlhf/mdp.hpp"
#include "fgrlhf/rng.hpp"
#include "fgrlhf/segment.hpp"
#include "fgrlhf/vocab.hpp"

using namespace fgrlhf;

namespace {

Vocabulary tiny_vocab() {
  Vocabulary v;
  v.tokens = {"<bos>", "<eos>", ".", ",", "w0", "w1", "w2", "w3"};
  v.bos = 0;
  v.eos = 1;
  v.sentence_delim = 2;
  v.subsentence_delims = {3};
  return v;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("rng streams are reproducible and decoupled") {
  RngStream a = RngStream::substream(42, 7, 3);
  RngStream b = RngStream::substream(42, 7, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c = RngStream::substream(42, 7, 4);
  RngStream d = RngStream::substream(42, 8, 3);
  RngStream e = RngStream::substream(43, 7, 3);
  RngStream base = RngStream::substream(42, 7, 3);
  const std::uint64_t first = base.next_u64();
  CHECK(c.next_u64() != first);
  CHECK(d.next_u64() != first);
  CHECK(e.next_u64() != first);
}

TEST_CASE("uniform draws live in [0,1) and uniform_int covers its range") {
  RngStream rng(123);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) {
    const int v = rng.uniform_int(-2, 3);
    CHECK(v >= -2);
    CHECK(v <= 3);
    seen.insert(v);
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("shuffle permutes deterministically") {
  std::vector<int> items{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> again = items;
  RngStream a(9), b(9);
  a.shuffle(items);
  b.shuffle(again);
  CHECK(items == again);
  std::set<int> distinct(items.begin(), items.end());
  CHECK(distinct.size() == 8);
}

TEST_CASE("matrix round-trips bit-exactly with the aux word") {
  Matrix m(3, 4);
  RngStream rng(5);
  for (double& v : m.data()) v = rng.normal() * 1e-3;
  m.at(0, 0) = -0.0;
  m.at(2, 3) = 1e-300;
  const auto path = temp_file("fgrlhf_matrix_roundtrip.bin");
  save_matrix(path, m, 77);
  const LoadedMatrix back = load_matrix(path);
  CHECK(back.aux == 77);
  REQUIRE(back.matrix.same_shape(m));
  for (std::size_t i = 0; i < m.data().size(); ++i) {
    CHECK(std::memcmp(&back.matrix.data()[i], &m.data()[i], sizeof(double)) == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("matrix load rejects truncated files") {
  const auto path = temp_file("fgrlhf_matrix_trunc.bin");
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    const char junk[10] = {};
    std::fwrite(junk, 1, sizeof junk, f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_matrix(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("matrix all_finite flags nan and inf") {
  Matrix m(2, 2, 1.0);
  CHECK(m.all_finite());
  m.at(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
  m.at(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("vocabulary validation enforces special-token rules") {
  Vocabulary v = tiny_vocab();
  CHECK_NOTHROW(v.validate());

  Vocabulary bad = v;
  bad.eos = 99;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = v;
  bad.subsentence_delims.insert(v.sentence_delim);
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = v;
  bad.sentence_delim = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sentence boundaries are also sub-sentence boundaries") {
  const Vocabulary v = tiny_vocab();
  CHECK(v.is_sentence_boundary(2));
  CHECK(v.is_subsentence_boundary(2));
  CHECK(v.is_subsentence_boundary(3));
  CHECK_FALSE(v.is_sentence_boundary(3));
  CHECK_FALSE(v.is_subsentence_boundary(4));
}

TEST_CASE("vocabulary token list round-trips through the text format") {
  const Vocabulary v = tiny_vocab();
  const auto path = temp_file("fgrlhf_vocab_roundtrip.txt");
  v.save_tokens(path);
  CHECK(Vocabulary::load_tokens(path) == v.tokens);
  std::filesystem::remove(path);
}

TEST_CASE("transition appends exactly one token") {
  const std::vector<TokenId> state{4, 5};
  const std::vector<TokenId> next = transition(state, 6, 8);
  CHECK(next == std::vector<TokenId>{4, 5, 6});

  const std::vector<TokenId> with_eos = transition(std::vector<TokenId>{4}, 1, 8);
  CHECK(with_eos == std::vector<TokenId>{4, 1});

  std::vector<TokenId> acc{0};
  for (int t = 0; t < 10; ++t) transition_in_place(acc, 4, 8);
  CHECK(acc.size() == 11);
  CHECK(acc[0] == 0);
}

TEST_CASE("transition rejects out-of-range actions") {
  CHECK_THROWS_AS(transition(std::vector<TokenId>{0}, 8, 8), InvalidTokenError);
  CHECK_THROWS_AS(transition(std::vector<TokenId>{0}, -1, 8), InvalidTokenError);
}

TEST_CASE("episodes end at eos or at the horizon") {
  const std::vector<TokenId> ended{4, 5, 1};
  CHECK(is_terminal(ended, 3, 48, 1));
  const std::vector<TokenId> running{4, 5, 6};
  CHECK(is_terminal(running, 48, 48, 1));
  CHECK_FALSE(is_terminal(running, 5, 48, 1));
}

TEST_CASE("sentence segmentation splits after the delimiter") {
  const Vocabulary v = tiny_vocab();
  // w w . w w
  const std::vector<TokenId> actions{4, 5, 2, 6, 7};
  const std::vector<Span> spans = segment(actions, Density::kSentence, v);
  REQUIRE(spans.size() == 2);
  CHECK((spans[0] == Span{1, 3}));
  CHECK((spans[1] == Span{4, 5}));
}

TEST_CASE("sub-sentence segmentation splits at commas and periods") {
  const Vocabulary v = tiny_vocab();
  // w , w . w
  const std::vector<TokenId> actions{4, 3, 5, 2, 6};
  const std::vector<Span> spans = segment(actions, Density::kSubsentence, v);
  REQUIRE(spans.size() == 3);
  CHECK((spans[0] == Span{1, 2}));
  CHECK((spans[1] == Span{3, 4}));
  CHECK((spans[2] == Span{5, 5}));

  // Sentence density ignores the comma.
  const std::vector<Span> sents = segment(actions, Density::kSentence, v);
  REQUIRE(sents.size() == 2);
  CHECK((sents[0] == Span{1, 4}));
  CHECK((sents[1] == Span{5, 5}));
}

TEST_CASE("sequence density is the whole output") {
  const Vocabulary v = tiny_vocab();
  for (int len : {1, 3, 9}) {
    const std::vector<TokenId> actions(static_cast<std::size_t>(len), 4);
    const std::vector<Span> spans = segment(actions, Density::kSequence, v);
    REQUIRE(spans.size() == 1);
    CHECK((spans[0] == Span{1, len}));
  }
}

TEST_CASE("segmentation partitions every random output") {
  const Vocabulary v = tiny_vocab();
  RngStream rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = rng.uniform_int(1, 40);
    std::vector<TokenId> actions;
    for (int t = 0; t < len; ++t) actions.push_back(rng.uniform_int(0, v.size() - 1));
    for (Density d : {Density::kSubsentence, Density::kSentence, Density::kSequence}) {
      const std::vector<Span> spans = segment(actions, d, v);
      REQUIRE_FALSE(spans.empty());
      int expect_begin = 1;
      for (const Span& s : spans) {
        CHECK(s.begin == expect_begin);
        CHECK(s.end >= s.begin);
        expect_begin = s.end + 1;
      }
      CHECK(spans.back().end == len);
    }
    // Every sentence end is also a sub-sentence end.
    std::set<int> sub_ends;
    for (const Span& s : segment(actions, Density::kSubsentence, v)) sub_ends.insert(s.end);
    for (const Span& s : segment(actions, Density::kSentence, v)) {
      CHECK(sub_ends.count(s.end) == 1);
    }
  }
}

TEST_CASE("segment maps follow the requested density order") {
  const Vocabulary v = tiny_vocab();
  const std::vector<TokenId> actions{4, 3, 5, 2, 6};
  const SegmentMap map = build_segment_map(
      actions, {Density::kSubsentence, Density::kSentence, Density::kSequence}, v);
  REQUIRE(map.categories.size() == 3);
  CHECK(map.categories[0].segments.size() == 3);
  CHECK(map.categories[1].segments.size() == 2);
  CHECK(map.categories[2].segments.size() == 1);
  for (const CategorySegments& cat : map.categories) {
    for (std::size_t j = 0; j < cat.segments.size(); ++j) {
      CHECK(cat.segments[j].index == static_cast<int>(j) + 1);
    }
  }
  CHECK(map.categories[2].segments[0].end == 5);
}

TEST_CASE("segment maps reject empty outputs") {
  const Vocabulary v = tiny_vocab();
  CHECK_THROWS_AS(build_segment_map({}, {Density::kSequence}, v), ShapeError);
}

TEST_CASE("density names round-trip") {
  for (Density d : {Density::kSubsentence, Density::kSentence, Density::kSequence}) {
    CHECK(density_from_name(density_name(d)) == d);
  }
  CHECK_THROWS_AS(density_from_name("paragraph"), ConfigError);
}

TEST_CASE("features one-hot the most recent tokens plus a bias") {
  FeatureExtractor f{2, 8};
  CHECK(f.dim() == 17);
  CHECK(f.bias_index() == 16);

  // state ... 5, 6: block 0 holds the last token (6), block 1 the one before.
  const std::vector<TokenId> state{4, 5, 6};
  const std::vector<int> active = f.active_indices(state);
  REQUIRE(active.size() == 3);
  CHECK(active[0] == 6);
  CHECK(active[1] == 8 + 5);
  CHECK(active[2] == 16);

  // A short state leaves older blocks empty; the bias stays on.
  const std::vector<int> short_active = f.active_indices(std::vector<TokenId>{7});
  REQUIRE(short_active.size() == 2);
  CHECK(short_active[0] == 7);
  CHECK(short_active[1] == 16);
}

TEST_CASE("features ignore tokens outside the context window") {
  FeatureExtractor f{2, 8};
  const std::vector<TokenId> a{0, 1, 2, 5, 6};
  const std::vector<TokenId> b{3, 3, 3, 5, 6};
  CHECK(f.active_indices(a) == f.active_indices(b));
  CHECK(f.dense(a) == f.dense(b));
}

TEST_CASE("features reject invalid token ids") {
  FeatureExtractor f{2, 8};
  CHECK_THROWS_AS(f.active_indices(std::vector<TokenId>{8}), InvalidTokenError);
}

TEST_CASE("dense features agree with active indices") {
  FeatureExtractor f{3, 5};
  RngStream rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenId> state;
    const int len = rng.uniform_int(1, 6);
    for (int i = 0; i < len; ++i) state.push_back(rng.uniform_int(0, 4));
    const std::vector<double> dense = f.dense(state);
    REQUIRE(static_cast<int>(dense.size()) == f.dim());
    std::vector<int> active = f.active_indices(state);
    double sum = 0.0;
    for (double v : dense) sum += v;
    CHECK(sum == doctest::Approx(static_cast<double>(active.size())).epsilon(1e-12));
    for (int idx : active) CHECK(dense[static_cast<std::size_t>(idx)] == 1.0);
  }
}
