#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "drbench/perturb.hpp"

namespace drbench {
namespace {

TokenSpace space(std::size_t v) { return TokenSpace{v, {0, 1, 2, 3}}; }

TokenSequence iota_seq(std::size_t n, TokenId first = 0) {
  TokenSequence s;
  for (std::size_t i = 0; i < n; ++i) s.ids.push_back(first + static_cast<TokenId>(i));
  return s;
}

TEST(PerturbSequence, ZeroRateIsIdentity) {
  SplitMix64 stream(1);
  auto s = iota_seq(50);
  EXPECT_EQ(perturb_sequence(s, {0.0, 1, true}, space(100), stream), s);
}

TEST(PerturbSequence, FullRateShiftsEveryPositionByAtMostNine) {
  const std::size_t V = 1000003;
  SplitMix64 stream(11);
  auto s = iota_seq(2000, 500);
  auto out = perturb_sequence(s, {1.0, 0, true}, space(V), stream);
  ASSERT_EQ(out.size(), s.size());
  std::vector<int> seen(10, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto d = (out.ids[i] + V - s.ids[i]) % V;
    ASSERT_LE(d, 9u) << "position " << i;
    ++seen[d];
  }
  for (int d = 0; d < 10; ++d) EXPECT_GT(seen[d], 0) << "offset " << d << " never drawn";
}

TEST(PerturbSequence, WrapsModuloVocabularySize) {
  SplitMix64 stream(3);
  TokenSequence s{std::vector<TokenId>(500, 9)};
  auto out = perturb_sequence(s, {1.0, 0, true}, space(10), stream);
  bool wrapped = false;
  for (TokenId id : out.ids) {
    ASSERT_LT(id, 10u);
    wrapped |= id < 9;
  }
  EXPECT_TRUE(wrapped);
}

TEST(PerturbSequence, MatchesAlgorithmDrawByDraw) {
  // Replays the stream by hand: one uniform per position, one extra draw per accepted position.
  const double eps = 0.3;
  auto s = iota_seq(200, 50);
  SplitMix64 a(77), b(77);
  auto out = perturb_sequence(s, {eps, 0, true}, space(300), a);
  for (std::size_t i = 0; i < s.size(); ++i) {
    TokenId want = s.ids[i];
    const double r = static_cast<double>(b.next() >> 11) * 0x1.0p-53;
    if (r < eps) want = static_cast<TokenId>((want + b.next() % 10) % 300);
    ASSERT_EQ(out.ids[i], want) << "position " << i;
  }
  EXPECT_EQ(a.next(), b.next());
}

TEST(PerturbSequence, ExcludingSpecialsSkipsTheirDraws) {
  TokenSequence s{{2, 10, 11, 3, 0, 0}};
  SplitMix64 a(5), b(5);
  auto out = perturb_sequence(s, {1.0, 0, false}, space(100), a);
  EXPECT_EQ(out.ids[0], 2u);
  EXPECT_EQ(out.ids[3], 3u);
  EXPECT_EQ(out.ids[4], 0u);
  EXPECT_EQ(out.ids[5], 0u);
  // Only the two word positions consumed draws (two per position at eps = 1).
  for (int i = 0; i < 4; ++i) b.next();
  EXPECT_EQ(a.next(), b.next());
}

TEST(PerturbSequence, RejectsBadParameters) {
  SplitMix64 stream(1);
  auto s = iota_seq(3);
  EXPECT_THROW(perturb_sequence(s, {-0.1, 0, true}, space(10), stream), InvalidArgument);
  EXPECT_THROW(perturb_sequence(s, {1.5, 0, true}, space(10), stream), InvalidArgument);
  EXPECT_THROW(perturb_sequence(s, {0.1, 0, true}, TokenSpace{0, {}}, stream), InvalidArgument);
}

TEST(PerturbSequence, CanTurnAPieceIntoAnotherWord) {
  // Ids: "the" = 6, "in" = 7. Search seeds for a stream that changes only position 3 by +1.
  const TokenSequence s{{2, 4, 5, 6, 8, 9, 10, 11, 12, 3}};
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200000 && !found; ++seed) {
    SplitMix64 stream(seed);
    auto out = perturb_sequence(s, {0.1, 0, true}, TokenSpace{13, {0, 1, 2, 3}}, stream);
    auto expected = s;
    expected.ids[3] = 7;
    found = out == expected;
  }
  EXPECT_TRUE(found);
}

std::vector<std::pair<std::string, TokenSequence>> query_batch(std::size_t n) {
  std::vector<std::pair<std::string, TokenSequence>> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back("q" + std::to_string(i), iota_seq(32, 4 + i));
  return out;
}

TEST(PerturbQuerySet, DeterministicAndOrderPreserving) {
  const auto batch = query_batch(100);
  const PerturbationParams p{0.2, 9, true};
  auto a = perturb_query_set(batch, p, space(30522));
  auto b = perturb_query_set(batch, p, space(30522), 3);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), batch.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].query_id, batch[i].first);
    EXPECT_EQ(a[i].before, batch[i].second);
    for (std::size_t pos : a[i].positions_changed) EXPECT_NE(a[i].before.ids[pos], a[i].after.ids[pos]);
  }
}

TEST(PerturbQuerySet, StreamsAreKeyedByQueryIdNotPosition) {
  auto batch = query_batch(20);
  const PerturbationParams p{0.3, 4, true};
  auto forward = perturb_query_set(batch, p, space(30522));
  std::reverse(batch.begin(), batch.end());
  auto reversed = perturb_query_set(batch, p, space(30522));
  for (std::size_t i = 0; i < forward.size(); ++i) EXPECT_EQ(forward[i], reversed[forward.size() - 1 - i]);
  EXPECT_EQ(perturb_query("q7", batch[12].second, p, space(30522)), forward[7]);
}

TEST(PerturbQuerySet, DifferentMasterSeedsDiffer) {
  const auto batch = query_batch(100);
  auto a = perturb_query_set(batch, {0.1, 1, true}, space(30522));
  auto b = perturb_query_set(batch, {0.1, 2, true}, space(30522));
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].after.size(); ++j) differing += a[i].after.ids[j] != b[i].after.ids[j];
  }
  EXPECT_GE(differing, 1u);
}

TEST(PerturbQuerySet, EmptyInput) {
  EXPECT_TRUE(perturb_query_set({}, {0.1, 1, true}, space(10)).empty());
}

TEST(QueryStreamSeed, XorOfMasterAndIdHash) {
  EXPECT_EQ(query_stream_seed(0, ""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(query_stream_seed(0, "a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(query_stream_seed(5, "a"), 0xaf63dc4c8601ec8cULL ^ 5);
}

TEST(ExpectedChangeRate, NineTenthsOfEpsilon) {
  EXPECT_DOUBLE_EQ(expected_change_rate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(expected_change_rate(1.0), 0.9);
  EXPECT_DOUBLE_EQ(expected_change_rate(0.1), 0.09);
  EXPECT_THROW(expected_change_rate(1.1), InvalidArgument);
}

TEST(PerturbationTable, Rendering) {
  Vocabulary v({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "what", "is", "the", "in", "##ra"});
  const TokenSequence before{{2, 4, 5, 6, 8, 3}};
  TokenSequence after = before;
  after.ids[3] = 7;
  std::vector<PerturbationRecord> records = {{"q1", {}, before, before}, {"q2", {3}, before, after}};
  auto rows = render_perturbation_table(records, v);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].before, rows[0].after);
  EXPECT_EQ(rows[1].before, "[CLS] what is thera [SEP]");
  EXPECT_EQ(rows[1].after, "[CLS] what is inra [SEP]");

  const auto text = format_perturbation_table(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), "Previous Input            | After Perturbation");
  EXPECT_NE(text.find("[CLS] what is thera [SEP] | [CLS] what is inra [SEP]\n"), std::string::npos);

  EXPECT_TRUE(render_perturbation_table({}, v).empty());
  EXPECT_EQ(format_perturbation_table({}), "Previous Input | After Perturbation\n---------------+-------------------\n");
}

}  // namespace
}  // namespace drbench
