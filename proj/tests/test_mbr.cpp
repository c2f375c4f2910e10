// Copyright 2025 The mbrfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mbrfuse/mbr.hpp"

#include <numeric>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "mbrfuse/metrics.hpp"
#include "mbrfuse/rng.hpp"
#include "testutil.hpp"

using namespace mbrfuse;
using mbr::Hypothesis;
using mbr::HypothesisPool;
using mbr::Utility;

namespace {

HypothesisPool make_pool(const std::string& segment_id, const std::string& system,
                         std::initializer_list<std::string> texts) {
  HypothesisPool pool;
  pool.segment_id = segment_id;
  size_t rank = 0;
  for (const auto& t : texts) {
    pool.members.push_back(Hypothesis{{t, "iwslt-eval"}, system, rank++});
    pool.weights.push_back(1.0 / static_cast<double>(texts.size()));
  }
  return pool;
}

HypothesisPool pool_of_texts(std::initializer_list<std::string> texts) {
  return make_pool("s", "sys", texts);
}

// Brute-force expected utility using the map-based counting oracle.
std::vector<double> oracle_expected(const HypothesisPool& pool) {
  const size_t n = pool.members.size();
  std::vector<std::vector<std::string>> toks(n);
  for (size_t i = 0; i < n; ++i)
    toks[i] = metrics::split_words(pool.members[i].text.text);
  std::vector<double> e(n, 0.0);
  double total = 0.0;
  for (double w : pool.weights) total += w;
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j)
      sum += pool.weights[j] * testutil::oracle_sentence_bleu(toks[j], toks[i], true);
    e[i] = sum / total;
  }
  return e;
}

size_t oracle_argmax(const std::vector<double>& e) {
  size_t best = 0;
  for (size_t i = 1; i < e.size(); ++i)
    if (e[i] > e[best]) best = i;
  return best;
}

}  // namespace

TEST_CASE("merge_pools keeps the first pool's members first") {
  std::vector<std::string> fifty;
  for (int i = 0; i < 50; ++i) fifty.push_back("hyp " + std::to_string(i));
  HypothesisPool a = make_pool("seg1", "cascaded", {});
  HypothesisPool b = make_pool("seg1", "e2e", {});
  for (size_t i = 0; i < fifty.size(); ++i) {
    a.members.push_back(Hypothesis{{fifty[i], "iwslt-eval"}, "cascaded", i});
    a.weights.push_back(1.0 / 50);
    b.members.push_back(Hypothesis{{fifty[i], "iwslt-eval"}, "e2e", i});
    b.weights.push_back(1.0 / 50);
  }
  const auto merged = mbr::merge_pools(a, b);
  REQUIRE(merged.members.size() == 100);
  for (size_t i = 0; i < 50; ++i) {
    CHECK(merged.members[i].system == "cascaded");
    CHECK(merged.members[i].rank == i);
    CHECK(merged.members[50 + i].system == "e2e");
  }
}

TEST_CASE("merge_pools rejects an empty side and mismatched segments") {
  const auto a = make_pool("seg1", "cascaded", {"x"});
  const auto empty = make_pool("seg1", "e2e", {});
  CHECK_THROWS_WITH(mbr::merge_pools(a, empty),
                    Catch::Matchers::ContainsSubstring("pool_b"));
  const auto other = make_pool("seg2", "e2e", {"y"});
  CHECK_THROWS_AS(mbr::merge_pools(a, other), Error);
  const auto same_system = make_pool("seg1", "cascaded", {"y"});
  CHECK_THROWS_AS(mbr::merge_pools(a, same_system), Error);
}

TEST_CASE("merge_pools assigns uniform weights") {
  const auto merged = mbr::merge_pools(make_pool("s", "a", {"p", "q"}),
                                       make_pool("s", "b", {"r", "s", "t"}));
  REQUIRE(merged.weights.size() == 5);
  for (double w : merged.weights) CHECK(w == 0.2);
}

TEST_CASE("merge_pools normalizes per-system weights") {
  const auto merged = mbr::merge_pools(make_pool("s", "a", {"p", "q"}),
                                       make_pool("s", "b", {"r"}), 3.0, 2.0);
  REQUIRE(merged.weights.size() == 3);
  CHECK(merged.weights[0] == Catch::Approx(3.0 / 8.0));
  CHECK(merged.weights[2] == Catch::Approx(2.0 / 8.0));
}

TEST_CASE("utility matrix basics") {
  const auto single = mbr::utility_matrix(pool_of_texts({"a b"}), Utility::kBleu);
  REQUIRE(single.n == 1);
  CHECK(single.values[0] == 100.0);

  const auto dup = mbr::utility_matrix(pool_of_texts({"a b", "a b"}), Utility::kBleu);
  for (double v : dup.values) CHECK(v == 100.0);

  const auto disjoint =
      mbr::utility_matrix(pool_of_texts({"a b c d", "w x y z"}), Utility::kBleu);
  CHECK(disjoint.at(0, 0) == 100.0);
  CHECK(disjoint.at(1, 1) == 100.0);
  CHECK(disjoint.at(0, 1) == 0.0);
  CHECK(disjoint.at(1, 0) == 0.0);
}

TEST_CASE("utility matrix diagonal is 100 for non-empty texts") {
  rng::Engine rng(500);
  for (int iter = 0; iter < 30; ++iter) {
    HypothesisPool pool;
    pool.segment_id = "s";
    const size_t n = 1 + rng.next_below(6);
    for (size_t i = 0; i < n; ++i) {
      auto t = testutil::random_token_sequence(rng, 8, 4);
      if (t.empty()) t.push_back("z");
      pool.members.push_back(
          Hypothesis{{testutil::join_tokens(t), "iwslt-eval"}, "sys", i});
      pool.weights.push_back(1.0);
    }
    for (const Utility u : {Utility::kBleu, Utility::kChrf}) {
      const auto m = mbr::utility_matrix(pool, u);
      REQUIRE(m.n == n);
      REQUIRE(m.values.size() == n * n);
      for (size_t i = 0; i < n; ++i) REQUIRE(m.at(i, i) == 100.0);
      for (double v : m.values) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 100.0);
      }
    }
  }
}

TEST_CASE("interned kernel matches sentence-level metrics bit for bit") {
  rng::Engine rng(501);
  for (int iter = 0; iter < 40; ++iter) {
    HypothesisPool pool;
    pool.segment_id = "s";
    const size_t n = 1 + rng.next_below(5);
    for (size_t i = 0; i < n; ++i) {
      pool.members.push_back(Hypothesis{
          {testutil::join_tokens(testutil::random_token_sequence(rng, 10, 4)),
           "iwslt-eval"},
          "sys", i});
      pool.weights.push_back(1.0);
    }
    const auto bleu_m = mbr::utility_matrix(pool, Utility::kBleu);
    const auto chrf_m = mbr::utility_matrix(pool, Utility::kChrf);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        REQUIRE(bleu_m.at(i, j) ==
                metrics::bleu_sentence(pool.members[j].text, pool.members[i].text,
                                       metrics::BleuSmoothing::kAdd1));
        REQUIRE(chrf_m.at(i, j) ==
                metrics::chrf_sentence(pool.members[j].text, pool.members[i].text));
      }
    }
  }
}

TEST_CASE("expected utility identities") {
  mbr::UtilityMatrix m;
  m.n = 1;
  m.values = {100.0};
  m.utility = "bleu";
  const std::vector<double> w1 = {1.0};
  CHECK(mbr::expected_utility(m, w1) == std::vector<double>{100.0});

  m.n = 2;
  m.values = {100.0, 0.0, 0.0, 100.0};
  const std::vector<double> w2 = {0.5, 0.5};
  CHECK(mbr::expected_utility(m, w2) == std::vector<double>{50.0, 50.0});
}

TEST_CASE("expected utility rejects bad weights") {
  mbr::UtilityMatrix m;
  m.n = 2;
  m.values = {100.0, 0.0, 0.0, 100.0};
  CHECK_THROWS_AS(mbr::expected_utility(m, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(mbr::expected_utility(m, std::vector<double>{0.0, 0.0}), Error);
  CHECK_THROWS_AS(mbr::expected_utility(m, std::vector<double>{1.0, -1.0}), Error);
}

TEST_CASE("consensus member beats the outlier") {
  const auto pool = pool_of_texts({"a b", "a b", "c d"});
  const auto e = mbr::expected_utility(mbr::utility_matrix(pool, Utility::kBleu),
                                       pool.weights);
  CHECK(e[0] > e[2]);
  CHECK(e[1] > e[2]);
  const auto sel = mbr::mbr_select(pool, Utility::kBleu);
  CHECK(sel.index == 0);
  CHECK(sel.hypothesis.text.text == "a b");
  CHECK(sel.index == oracle_argmax(oracle_expected(pool)));
}

TEST_CASE("singleton pool selects its only member") {
  const auto sel = mbr::mbr_select(pool_of_texts({"x y"}), Utility::kBleu);
  CHECK(sel.index == 0);
  // With exclude_self a singleton has no pseudo-references; expected
  // utility is defined as 0 and the member is still selected.
  const auto excl = mbr::mbr_select(pool_of_texts({"x y"}), Utility::kBleu, true);
  CHECK(excl.index == 0);
  CHECK(excl.expected == std::vector<double>{0.0});
}

TEST_CASE("ties break to the cascaded rank-0 member") {
  const auto merged = mbr::merge_pools(make_pool("s", "cascaded", {"a b", "a b"}),
                                       make_pool("s", "e2e", {"a b", "a b"}));
  const auto sel = mbr::mbr_select(merged, Utility::kBleu);
  CHECK(sel.index == 0);
  CHECK(sel.hypothesis.system == "cascaded");
  CHECK(sel.hypothesis.rank == 0);
}

TEST_CASE("selection matches brute force over all pools from a 4-sentence universe") {
  const std::vector<std::string> universe = {"a b c d", "a b x y", "c d a b",
                                             "p q r"};
  // All pools of size 1..3 during unit testing; the acceptance suite
  // extends this to size 5.
  std::vector<size_t> stack;
  const std::function<void(size_t)> enumerate = [&](size_t size) {
    if (stack.size() == size) {
      HypothesisPool pool;
      pool.segment_id = "s";
      for (size_t k = 0; k < stack.size(); ++k) {
        pool.members.push_back(
            Hypothesis{{universe[stack[k]], "iwslt-eval"}, "sys", k});
        pool.weights.push_back(1.0 / static_cast<double>(size));
      }
      const auto sel = mbr::mbr_select(pool, Utility::kBleu);
      REQUIRE(sel.index == oracle_argmax(oracle_expected(pool)));
      return;
    }
    for (size_t u = 0; u < universe.size(); ++u) {
      stack.push_back(u);
      enumerate(size);
      stack.pop_back();
    }
  };
  for (size_t size = 1; size <= 3; ++size) enumerate(size);
}

TEST_CASE("permuting the pool permutes the selection") {
  const std::vector<std::string> texts = {"a b c d e", "a b c d z", "a b z w q",
                                          "p q r s t"};
  HypothesisPool pool;
  pool.segment_id = "s";
  for (size_t i = 0; i < texts.size(); ++i) {
    pool.members.push_back(Hypothesis{{texts[i], "iwslt-eval"}, "sys", i});
    pool.weights.push_back(1.0 / texts.size());
  }
  const auto base = mbr::mbr_select(pool, Utility::kBleu);
  // All-distinct expected utilities so the tie-break stays disengaged.
  {
    std::set<double> distinct(base.expected.begin(), base.expected.end());
    REQUIRE(distinct.size() == base.expected.size());
  }
  rng::Engine rng(502);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<size_t> perm(texts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = perm.size() - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.next_below(i + 1)]);
    HypothesisPool shuffled;
    shuffled.segment_id = "s";
    for (size_t i = 0; i < perm.size(); ++i) {
      shuffled.members.push_back(pool.members[perm[i]]);
      shuffled.weights.push_back(pool.weights[perm[i]]);
    }
    const auto sel = mbr::mbr_select(shuffled, Utility::kBleu);
    CHECK(sel.hypothesis.text.text == base.hypothesis.text.text);
    CHECK(perm[sel.index] == base.index);
  }
}

TEST_CASE("scaling all weights does not change the selection") {
  const auto pool = pool_of_texts({"a b c", "a b x", "z z z"});
  const auto m = mbr::utility_matrix(pool, Utility::kBleu);
  const auto base = mbr::expected_utility(m, pool.weights);
  for (double scale : {0.25, 3.0, 1e6}) {
    std::vector<double> scaled;
    for (double w : pool.weights) scaled.push_back(w * scale);
    const auto e = mbr::expected_utility(m, scaled);
    CHECK(mbr::argmax_lowest_index(e) == mbr::argmax_lowest_index(base));
  }
}

TEST_CASE("majority duplicates dominate the selection") {
  // ceil(5/2)+1 = 4 copies of the majority text; the outlier shares no
  // n-grams with anything.
  const auto pool =
      pool_of_texts({"a b c", "a b c", "a b c", "a b c", "x y z"});
  for (const bool exclude_self : {false, true}) {
    const auto sel = mbr::mbr_select(pool, Utility::kBleu, exclude_self);
    CHECK(sel.hypothesis.text.text == "a b c");
  }
}

TEST_CASE("exclude_self removes the self bonus") {
  const auto pool = pool_of_texts({"a b", "c d", "c d"});
  const auto m = mbr::utility_matrix(pool, Utility::kBleu);
  const auto with_self = mbr::expected_utility(m, pool.weights, false);
  const auto without = mbr::expected_utility(m, pool.weights, true);
  // Without the self term the lone hypothesis keeps nothing; each "c d"
  // copy averages its twin (100) with the disjoint "a b" (0).
  CHECK(without[0] == 0.0);
  CHECK(with_self[0] > 0.0);
  CHECK(without[1] == Catch::Approx(50.0));
}

TEST_CASE("combine corpus on degenerate singleton pools returns the input") {
  std::vector<HypothesisPool> a, b;
  for (const char* id : {"s1", "s2"}) {
    a.push_back(make_pool(id, "cascaded", {std::string("t ") + id}));
    b.push_back(make_pool(id, "e2e", {std::string("t ") + id}));
  }
  const auto out = mbr::mbr_combine_corpus(a, b);
  REQUIRE(out.size() == 2);
  CHECK(out[0].segment_id == "s1");
  CHECK(out[0].hypothesis.text.text == "t s1");
  CHECK(out[1].hypothesis.text.text == "t s2");
}

TEST_CASE("combine corpus rejects mismatched segment sets naming the ids") {
  std::vector<HypothesisPool> a = {make_pool("s1", "cascaded", {"x"}),
                                   make_pool("s2", "cascaded", {"x"})};
  std::vector<HypothesisPool> b = {make_pool("s1", "e2e", {"y"}),
                                   make_pool("s3", "e2e", {"y"})};
  CHECK_THROWS_WITH(mbr::mbr_combine_corpus(a, b),
                    Catch::Matchers::ContainsSubstring("s2") &&
                        Catch::Matchers::ContainsSubstring("s3"));
}

TEST_CASE("combine corpus rejects an empty pool for a segment") {
  std::vector<HypothesisPool> a = {make_pool("s1", "cascaded", {"x"})};
  std::vector<HypothesisPool> b = {make_pool("s1", "e2e", {})};
  CHECK_THROWS_AS(mbr::mbr_combine_corpus(a, b), Error);
}

TEST_CASE("planted consensus hypotheses win in every segment") {
  // In each segment the consensus hypotheses share n-grams with each other
  // while one outlier is disjoint from everything.
  std::vector<HypothesisPool> a, b;
  a.push_back(make_pool("1", "cascaded",
                        {"the cat sat on the mat", "the cat sat on a hat"}));
  b.push_back(make_pool("1", "e2e",
                        {"the cat sat on the rug", "zebras gallop near water"}));
  a.push_back(make_pool("2", "cascaded",
                        {"we went home early", "we went home late"}));
  b.push_back(make_pool("2", "e2e",
                        {"we went home yesterday", "purple ideas sleep firmly"}));
  a.push_back(make_pool("3", "cascaded",
                        {"open the door now", "open the door please"}));
  b.push_back(make_pool("3", "e2e",
                        {"open the door slowly", "quartz formations glitter"}));
  const auto out = mbr::mbr_combine_corpus(a, b);
  REQUIRE(out.size() == 3);
  CHECK(out[0].hypothesis.text.text.substr(0, 11) == "the cat sat");
  CHECK(out[1].hypothesis.text.text.substr(0, 12) == "we went home");
  CHECK(out[2].hypothesis.text.text.substr(0, 13) == "open the door");
}

TEST_CASE("combine corpus is identical at any thread count") {
  rng::Engine rng(503);
  std::vector<HypothesisPool> a, b;
  for (int s = 0; s < 12; ++s) {
    const std::string id = std::to_string(s);
    HypothesisPool pa = make_pool(id, "cascaded", {});
    HypothesisPool pb = make_pool(id, "e2e", {});
    for (size_t i = 0; i < 6; ++i) {
      auto t = testutil::random_token_sequence(rng, 10, 5);
      if (t.empty()) t.push_back("k");
      pa.members.push_back(
          Hypothesis{{testutil::join_tokens(t), "iwslt-eval"}, "cascaded", i});
      pa.weights.push_back(1.0 / 6);
      t = testutil::random_token_sequence(rng, 10, 5);
      if (t.empty()) t.push_back("m");
      pb.members.push_back(
          Hypothesis{{testutil::join_tokens(t), "iwslt-eval"}, "e2e", i});
      pb.weights.push_back(1.0 / 6);
    }
    a.push_back(std::move(pa));
    b.push_back(std::move(pb));
  }
  mbr::CombineOptions opts;
  opts.threads = 1;
  const auto seq = mbr::mbr_combine_corpus(a, b, opts);
  for (unsigned threads : {2u, 4u, 8u}) {
    opts.threads = threads;
    const auto par_out = mbr::mbr_combine_corpus(a, b, opts);
    REQUIRE(par_out.size() == seq.size());
    for (size_t k = 0; k < seq.size(); ++k) {
      REQUIRE(par_out[k].segment_id == seq[k].segment_id);
      REQUIRE(par_out[k].index == seq[k].index);
      REQUIRE(par_out[k].expected == seq[k].expected);
    }
  }
}

TEST_CASE("segment ordering is numeric for digit ids, lexicographic otherwise") {
  std::vector<HypothesisPool> a, b;
  for (const char* id : {"10", "2", "1"}) {
    a.push_back(make_pool(id, "cascaded", {"x x"}));
    b.push_back(make_pool(id, "e2e", {"x x"}));
  }
  const auto numeric = mbr::mbr_combine_corpus(a, b);
  CHECK(numeric[0].segment_id == "1");
  CHECK(numeric[1].segment_id == "2");
  CHECK(numeric[2].segment_id == "10");

  a.clear();
  b.clear();
  for (const char* id : {"s10", "s2", "s1"}) {
    a.push_back(make_pool(id, "cascaded", {"x x"}));
    b.push_back(make_pool(id, "e2e", {"x x"}));
  }
  const auto lex = mbr::mbr_combine_corpus(a, b);
  CHECK(lex[0].segment_id == "s1");
  CHECK(lex[1].segment_id == "s10");
  CHECK(lex[2].segment_id == "s2");
}
