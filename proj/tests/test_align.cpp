#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "seclr/align.hpp"
#include "seclr/corpus.hpp"

using namespace seclr;

namespace {

// Two tiny vocabularies ("a","b","dog" / "x","y","ey","eey") shared by
// the matrix tests.
struct Vocabs {
  Vocabulary query = build_vocabulary({{"a", "b", "dog"}}, "query", 1, 100);
  Vocabulary target =
      build_vocabulary({{"x", "y", "ey", "eey"}}, "target", 1, 100);
};

double row_sum(const TranslationMatrix& m, TokenId q) {
  double s = 0.0;
  const auto* row = m.row(q);
  REQUIRE(row != nullptr);
  for (const auto& [t, p] : *row) s += p;
  return s;
}

}  // namespace

TEST_CASE("train_ibm1 on a single pair is a point mass") {
  ParallelCorpus corpus = corpus_from_token_pairs({{{"a"}, {"x"}}}, {});
  TranslationMatrix m = train_ibm1(corpus, 3);
  TokenId a = corpus.query_vocab.lookup("a");
  TokenId x = corpus.target_vocab.lookup("x");
  CHECK(m.prob(a, x) == doctest::Approx(1.0));
  CHECK(m.tag() == Normalization::kRow);
}

TEST_CASE("train_ibm1 concentrates on the cipher translation") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 400;
  opts.n_vocab = 50;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  TranslationMatrix m = train_ibm1(corpus, 10);
  size_t eligible = 0, concentrated = 0;
  for (TokenId q = 1; size_t(q) < corpus.query_vocab.size(); ++q) {
    if (corpus.query_vocab.frequency(q) < 5) continue;
    ++eligible;
    std::string cipher = "c" + corpus.query_vocab.surface(q).substr(1);
    if (m.prob(q, corpus.target_vocab.lookup(cipher)) >= 0.9) ++concentrated;
  }
  REQUIRE(eligible >= 20);
  CHECK(double(concentrated) >= 0.95 * double(eligible));
}

TEST_CASE("train_ibm1 log-likelihood never decreases") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 120;
  opts.n_vocab = 25;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  std::vector<double> trace;
  train_ibm1(corpus, 8, &trace);
  REQUIRE(trace.size() == 8);
  for (size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] >= trace[i - 1] - 1e-9);
}

TEST_CASE("train_ibm1 validates its inputs") {
  ParallelCorpus corpus = corpus_from_token_pairs({{{"a"}, {"x"}}}, {});
  CHECK_THROWS_AS(train_ibm1(corpus, 0), ConfigError);
  ParallelCorpus empty;
  CHECK_THROWS_AS(train_ibm1(empty, 1), RuntimeFailure);
}

TEST_CASE("translation matrix rejects sums that violate its tag") {
  TranslationMatrix::Cells bad{{1, {{1, 0.5}, {2, 0.4}}}};
  CHECK_THROWS_AS(TranslationMatrix(bad, Normalization::kRow),
                  RuntimeFailure);
  TranslationMatrix::Cells negative{{1, {{1, -0.2}, {2, 1.2}}}};
  CHECK_THROWS_AS(TranslationMatrix(negative, Normalization::kRaw),
                  RuntimeFailure);
  // Raw tag skips the sum check.
  TranslationMatrix::Cells counts{{1, {{1, 3.0}, {2, 1.0}}}};
  CHECK(TranslationMatrix(counts, Normalization::kRaw).prob(1, 1) == 3.0);
}

TEST_CASE("merging a matrix with itself changes nothing") {
  Vocabs v;
  TranslationMatrix::Cells cells{
      {v.query.lookup("a"), {{v.target.lookup("x"), 0.25},
                             {v.target.lookup("y"), 0.75}}}};
  TranslationMatrix m(cells, Normalization::kRow, v.query.content_hash(),
                      v.target.content_hash());
  TranslationMatrix merged = merge_matrices({m, m}, {1.0, 1.0});
  CHECK(merged.prob(v.query.lookup("a"), v.target.lookup("x")) ==
        doctest::Approx(0.25));
  CHECK(merged.prob(v.query.lookup("a"), v.target.lookup("y")) ==
        doctest::Approx(0.75));
}

TEST_CASE("merging point masses splits by the weights") {
  Vocabs v;
  TokenId a = v.query.lookup("a");
  TokenId x = v.target.lookup("x"), y = v.target.lookup("y");
  TranslationMatrix mx({{a, {{x, 1.0}}}}, Normalization::kRow);
  TranslationMatrix my({{a, {{y, 1.0}}}}, Normalization::kRow);
  TranslationMatrix equal = merge_matrices({mx, my}, {1.0, 1.0});
  CHECK(equal.prob(a, x) == doctest::Approx(0.5));
  CHECK(equal.prob(a, y) == doctest::Approx(0.5));
  TranslationMatrix skewed = merge_matrices({mx, my}, {0.75, 0.25});
  CHECK(skewed.prob(a, x) == doctest::Approx(0.75));
  CHECK(skewed.prob(a, y) == doctest::Approx(0.25));
}

TEST_CASE("merge weights are scale invariant") {
  Vocabs v;
  TokenId a = v.query.lookup("a");
  TokenId x = v.target.lookup("x"), y = v.target.lookup("y");
  TranslationMatrix mx({{a, {{x, 0.6}, {y, 0.4}}}}, Normalization::kRow);
  TranslationMatrix my({{a, {{y, 1.0}}}}, Normalization::kRow);
  TranslationMatrix small = merge_matrices({mx, my}, {0.2, 0.6});
  TranslationMatrix big = merge_matrices({mx, my}, {2.0, 6.0});
  CHECK(small.prob(a, x) == doctest::Approx(big.prob(a, x)).epsilon(1e-12));
  CHECK(small.prob(a, y) == doctest::Approx(big.prob(a, y)).epsilon(1e-12));
}

TEST_CASE("merge rejects mismatched vocabularies and bad weights") {
  Vocabs v;
  TokenId a = v.query.lookup("a");
  TranslationMatrix m1({{a, {{1, 1.0}}}}, Normalization::kRow,
                       v.query.content_hash(), v.target.content_hash());
  TranslationMatrix m2({{a, {{1, 1.0}}}}, Normalization::kRow,
                       0xdeadbeefULL, v.target.content_hash());
  CHECK_THROWS_AS(merge_matrices({m1, m2}, {1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(merge_matrices({m1, m1}, {1.0}), ConfigError);
  CHECK_THROWS_AS(merge_matrices({m1, m1}, {0.0, 0.0}), ConfigError);
}

TEST_CASE("column_normalize scales each column to unit mass") {
  TranslationMatrix raw({{1, {{7, 0.2}}}, {2, {{7, 0.2}}}},
                        Normalization::kRaw);
  TranslationMatrix col = column_normalize(raw);
  CHECK(col.tag() == Normalization::kColumn);
  CHECK(col.prob(1, 7) == doctest::Approx(0.5));
  CHECK(col.prob(2, 7) == doctest::Approx(0.5));
}

TEST_CASE("column_normalize turns counts into column probabilities") {
  TranslationMatrix counts({{1, {{7, 3.0}}}, {2, {{7, 1.0}}}},
                           Normalization::kRaw);
  TranslationMatrix col = column_normalize(counts);
  CHECK(col.prob(1, 7) == doctest::Approx(0.75));
  CHECK(col.prob(2, 7) == doctest::Approx(0.25));
}

TEST_CASE("column_normalize is idempotent") {
  TranslationMatrix counts(
      {{1, {{7, 3.0}, {8, 1.0}}}, {2, {{7, 1.0}, {8, 1.0}}}},
      Normalization::kRaw);
  TranslationMatrix once = column_normalize(counts);
  TranslationMatrix twice = column_normalize(once);
  for (TokenId q : {1, 2})
    for (TokenId t : {7, 8})
      CHECK(once.prob(q, t) == doctest::Approx(twice.prob(q, t)).epsilon(1e-12));
}

TEST_CASE("load_lexicon aggregates and row-normalizes weights") {
  fixtures::TempDir tmp("lex");
  Vocabs v;
  fixtures::write_file(tmp.path("l.tsv"), "dog\tey\t3\ndog\teey\t1\n");
  TranslationMatrix m = load_lexicon(tmp.path("l.tsv"), v.query, v.target);
  TokenId dog = v.query.lookup("dog");
  CHECK(m.prob(dog, v.target.lookup("ey")) == doctest::Approx(0.75));
  CHECK(m.prob(dog, v.target.lookup("eey")) == doctest::Approx(0.25));
  CHECK(m.tag() == Normalization::kRow);
}

TEST_CASE("load_lexicon single entry becomes a point mass") {
  fixtures::TempDir tmp("lex");
  Vocabs v;
  fixtures::write_file(tmp.path("l.tsv"), "a\tx\t5\n");
  TranslationMatrix m = load_lexicon(tmp.path("l.tsv"), v.query, v.target);
  CHECK(m.prob(v.query.lookup("a"), v.target.lookup("x")) ==
        doctest::Approx(1.0));
}

TEST_CASE("load_lexicon rejects nonpositive weights with the line number") {
  fixtures::TempDir tmp("lex");
  Vocabs v;
  fixtures::write_file(tmp.path("l.tsv"), "a\tx\t5\nb\ty\t-1\n");
  CHECK_THROWS_WITH_AS(load_lexicon(tmp.path("l.tsv"), v.query, v.target),
                       doctest::Contains(":2:"), ParseError);
}

TEST_CASE("load_lexicon drops out-of-vocabulary entries with a count") {
  fixtures::TempDir tmp("lex");
  Vocabs v;
  fixtures::write_file(tmp.path("l.tsv"), "a\tx\t5\nzzz\ty\t2\na\tqqq\t1\n");
  int64_t dropped = 0;
  TranslationMatrix m =
      load_lexicon(tmp.path("l.tsv"), v.query, v.target, &dropped);
  CHECK(dropped == 2);
  CHECK(m.prob(v.query.lookup("a"), v.target.lookup("x")) ==
        doctest::Approx(1.0));
}

TEST_CASE("matrix save and load round trip preserves everything") {
  fixtures::TempDir tmp("matrix");
  Vocabs v;
  TokenId a = v.query.lookup("a"), b = v.query.lookup("b");
  TokenId x = v.target.lookup("x"), y = v.target.lookup("y");
  TranslationMatrix m({{a, {{x, 0.25}, {y, 0.75}}}, {b, {{y, 1.0}}}},
                      Normalization::kRow, v.query.content_hash(),
                      v.target.content_hash());
  m.save(tmp.path("m.tsv"), v.query, v.target);
  TranslationMatrix loaded =
      TranslationMatrix::load(tmp.path("m.tsv"), v.query, v.target);
  CHECK(loaded.tag() == Normalization::kRow);
  CHECK(loaded.entry_count() == 3);
  CHECK(loaded.prob(a, x) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(loaded.prob(a, y) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(loaded.prob(b, y) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("matrix load rejects surfaces outside the vocabularies") {
  fixtures::TempDir tmp("matrix");
  Vocabs v;
  fixtures::write_file(tmp.path("m.tsv"),
                       "# normalization=row\nzzz\tx\t1.0\n");
  CHECK_THROWS_AS(TranslationMatrix::load(tmp.path("m.tsv"), v.query, v.target),
                  ParseError);
}

TEST_CASE("rationale restricts the row to the sentence and renormalizes") {
  TranslationMatrix m({{1, {{10, 0.2}, {11, 0.3}, {12, 0.5}}}},
                      Normalization::kRow);
  auto rho = rationale_distribution(1, {10, 12}, m);
  REQUIRE(rho.has_value());
  REQUIRE(rho->mass.size() == 2);
  CHECK(rho->mass[0] == doctest::Approx(0.2 / 0.7));
  CHECK(rho->mass[1] == doctest::Approx(0.5 / 0.7));
}

TEST_CASE("rationale with one translated word is a point mass") {
  TranslationMatrix m({{1, {{10, 0.4}, {11, 0.6}}}}, Normalization::kRow);
  auto rho = rationale_distribution(1, {99, 10, 98}, m);
  REQUIRE(rho.has_value());
  CHECK(rho->mass[0] == 0.0);
  CHECK(rho->mass[1] == doctest::Approx(1.0));
  CHECK(rho->mass[2] == 0.0);
}

TEST_CASE("rationale is absent for the exclusion cases") {
  TranslationMatrix m({{1, {{10, 1.0}}}}, Normalization::kRow);
  CHECK_FALSE(rationale_distribution(2, {10}, m).has_value());   // no row
  CHECK_FALSE(rationale_distribution(1, {11, 12}, m).has_value());  // no mass
}

TEST_CASE("rationale duplicates share the mass per position") {
  TranslationMatrix m({{1, {{10, 0.2}, {12, 0.8}}}}, Normalization::kRow);
  auto rho = rationale_distribution(1, {10, 10, 12}, m);
  REQUIRE(rho.has_value());
  CHECK(rho->mass[0] == doctest::Approx(0.2 / 1.2));
  CHECK(rho->mass[1] == doctest::Approx(0.2 / 1.2));
  CHECK(rho->mass[2] == doctest::Approx(0.8 / 1.2));
  double sum = rho->mass[0] + rho->mass[1] + rho->mass[2];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rationale support matches the positive alignment entries") {
  TranslationMatrix m({{1, {{10, 0.5}, {11, 0.5}}}}, Normalization::kRow);
  auto rho = rationale_distribution(1, {11, 99, 10, 11}, m);
  REQUIRE(rho.has_value());
  for (size_t i = 0; i < rho->mass.size(); ++i) {
    TokenId tok = std::vector<TokenId>{11, 99, 10, 11}[i];
    bool aligned = tok == 10 || tok == 11;
    CHECK((rho->mass[i] > 0.0) == aligned);
  }
}

TEST_CASE("em output rows always sum to one") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 80;
  opts.n_vocab = 15;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  TranslationMatrix m = train_ibm1(corpus, 4);
  for (const auto& [q, row] : m.rows()) {
    (void)row;
    CHECK(row_sum(m, q) == doctest::Approx(1.0).epsilon(1e-9));
  }
}
