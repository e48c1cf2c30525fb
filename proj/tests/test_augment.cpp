#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "seclr/augment.hpp"
#include "seclr/corpus.hpp"

using namespace seclr;

namespace {

// The worked sentence pair: six distinct English content words.
ParallelCorpus example_corpus() {
  return corpus_from_token_pairs(
      {{{"true", "president", "gaas", "attend", "meeting", "copenhagen"},
        {"ma", "runbaa", "madaxweyne", "gaas", "baaqday", "shirka",
         "copenhegan"}},
       {{"many", "candidates", "competing", "elections", "hopes", "winner"},
        {"musharraxiin", "tiro", "badan", "doorashada", "guuleysta"}},
       {{"rain", "falls", "north", "region"},
        {"roob", "wuxuu", "woqooyi", "gobolka"}}},
      {});
}

// Embeddings where every vocabulary word gets a distinct near-orthogonal
// direction, so cross-word cosines stay below any sensible threshold.
EmbeddingTable orthogonal_embeddings(const Vocabulary& vocab) {
  EmbeddingTable table(vocab.size(), vocab.size());
  std::vector<double> row(vocab.size(), 0.0);
  for (TokenId id = 1; size_t(id) < vocab.size(); ++id) {
    row[size_t(id)] = 1.0;
    table.set_row(id, row);
    table.mark_covered(id);
    row[size_t(id)] = 0.0;
  }
  return table;
}

}  // namespace

TEST_CASE("generate_positives emits one example per distinct content word") {
  ParallelCorpus corpus = example_corpus();
  std::vector<RelevanceExample> pos = generate_positives(corpus.pairs[0]);
  CHECK(pos.size() == 6);
  TokenId meeting = corpus.query_vocab.lookup("meeting");
  bool found = false;
  for (const auto& ex : pos) {
    CHECK(ex.label == 1);
    CHECK(ex.sentence == corpus.pairs[0].target);
    CHECK(ex.source_pair_id == corpus.pairs[0].pair_id);
    if (ex.query == meeting) found = true;
  }
  CHECK(found);
}

TEST_CASE("generate_positives collapses repeated words unless disabled") {
  ParallelCorpus corpus =
      corpus_from_token_pairs({{{"gaas", "gaas", "shirka"}, {"x"}}}, {});
  SentencePair pair = corpus.pairs[0];
  CHECK(generate_positives(pair).size() == 2);
  CHECK(generate_positives(pair, false).size() == 3);
}

TEST_CASE("generate_positives of an empty english side is empty") {
  SentencePair pair;
  pair.target = {1, 2};
  CHECK(generate_positives(pair).empty());
}

TEST_CASE("generate_positives never emits an unk query") {
  SentencePair pair;
  pair.english = {kUnkId, 2, kUnkId};
  pair.target = {5};
  std::vector<RelevanceExample> pos = generate_positives(pair);
  REQUIRE(pos.size() == 1);
  CHECK(pos[0].query == 2);
}

TEST_CASE("is_irrelevant accepts only dissimilar sentences") {
  ParallelCorpus corpus = example_corpus();
  EmbeddingTable emb = orthogonal_embeddings(corpus.query_vocab);
  TokenId meeting = corpus.query_vocab.lookup("meeting");
  // Its own sentence contains the word itself: cosine 1.
  CHECK_FALSE(is_irrelevant(meeting, corpus.pairs[0].english, emb, 0.4));
  // Orthogonal sentence: max cosine 0.
  CHECK(is_irrelevant(meeting, corpus.pairs[1].english, emb, 0.4));
}

TEST_CASE("is_irrelevant compares the max cosine against the threshold") {
  Vocabulary vocab = build_vocabulary({{"q", "w"}}, "query", 1, 10);
  EmbeddingTable emb(vocab.size(), 2);
  emb.set_row(vocab.lookup("q"), {1.0, 0.0});
  emb.mark_covered(vocab.lookup("q"));
  // cos(q, w) = 0.5 exactly.
  emb.set_row(vocab.lookup("w"), {0.5, std::sqrt(3.0) / 2.0});
  emb.mark_covered(vocab.lookup("w"));
  std::vector<TokenId> sentence{vocab.lookup("w")};
  CHECK_FALSE(is_irrelevant(vocab.lookup("q"), sentence, emb, 0.4));
  CHECK(is_irrelevant(vocab.lookup("q"), sentence, emb, 0.6));
}

TEST_CASE("is_irrelevant counts zero-norm vectors as dissimilar with a warning") {
  Vocabulary vocab = build_vocabulary({{"q", "z"}}, "query", 1, 10);
  EmbeddingTable emb(vocab.size(), 2);
  emb.set_row(vocab.lookup("q"), {1.0, 0.0});
  emb.mark_covered(vocab.lookup("q"));
  emb.set_row(vocab.lookup("z"), {0.0, 0.0});
  emb.mark_covered(vocab.lookup("z"));
  int64_t warnings = 0;
  CHECK(is_irrelevant(vocab.lookup("q"), {vocab.lookup("z")}, emb, 0.4,
                      &warnings));
  CHECK(warnings == 1);
}

TEST_CASE("sample_negative returns a sentence passing the certificate") {
  ParallelCorpus corpus = example_corpus();
  EmbeddingTable emb = orthogonal_embeddings(corpus.query_vocab);
  AugmentConfig config;
  Rng rng(13);
  TokenId meeting = corpus.query_vocab.lookup("meeting");
  auto neg = sample_negative(meeting, corpus, emb, config, rng);
  REQUIRE(neg.has_value());
  CHECK(neg->label == 0);
  CHECK(neg->query == meeting);
  REQUIRE(neg->source_pair_id >= 0);
  const SentencePair& witness = corpus.pairs[size_t(neg->source_pair_id)];
  CHECK(neg->sentence == witness.target);
  CHECK(is_irrelevant(meeting, witness.english, emb, config.lambda1));
}

TEST_CASE("sample_negative gives up when every sentence contains the query") {
  ParallelCorpus corpus = corpus_from_token_pairs(
      {{{"gaas"}, {"x"}}, {{"gaas", "shirka"}, {"y"}}}, {});
  EmbeddingTable emb = orthogonal_embeddings(corpus.query_vocab);
  AugmentConfig config;
  config.max_resample_tries = 25;
  Rng rng(5);
  CHECK_FALSE(
      sample_negative(corpus.query_vocab.lookup("gaas"), corpus, emb, config,
                      rng)
          .has_value());
}

TEST_CASE("sample_negative is reproducible for a fixed rng stream") {
  ParallelCorpus corpus = example_corpus();
  EmbeddingTable emb = orthogonal_embeddings(corpus.query_vocab);
  AugmentConfig config;
  TokenId q = corpus.query_vocab.lookup("rain");
  Rng r1(21), r2(21);
  auto a = sample_negative(q, corpus, emb, config, r1);
  auto b = sample_negative(q, corpus, emb, config, r2);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  CHECK(a->source_pair_id == b->source_pair_id);
}

TEST_CASE("build_training_set balances positives and negatives") {
  ParallelCorpus corpus = example_corpus();
  EmbeddingTable emb = orthogonal_embeddings(corpus.query_vocab);
  AugmentConfig config;
  TrainingSet set = build_training_set(corpus, emb, config);
  CHECK(set.stats.positives == 16);  // 6 + 6 + 4 distinct content words
  CHECK(set.stats.negatives + set.stats.skipped_negatives ==
        set.stats.positives * config.negatives_per_positive);
  CHECK(set.examples.size() ==
        size_t(set.stats.positives + set.stats.negatives));
}

TEST_CASE("training set balance holds on the cipher corpus") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 300;
  opts.n_vocab = 60;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  EmbeddingTable emb = fixtures::unit_embeddings(corpus.query_vocab, 16, 4);
  AugmentConfig config;
  config.negatives_per_positive = 2;
  TrainingSet set = build_training_set(corpus, emb, config);
  CHECK(set.stats.negatives ==
        config.negatives_per_positive * set.stats.positives -
            set.stats.skipped_negatives);
  // The skip rate contract: under 1% of positives.
  CHECK(set.stats.skipped_negatives * 100 < set.stats.positives);
}

TEST_CASE("every stored negative re-passes the dissimilarity certificate") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 200;
  opts.n_vocab = 40;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  EmbeddingTable emb = fixtures::unit_embeddings(corpus.query_vocab, 16, 4);
  AugmentConfig config;
  TrainingSet set = build_training_set(corpus, emb, config);
  size_t negatives = 0;
  for (const auto& ex : set.examples) {
    if (ex.label != 0) continue;
    ++negatives;
    const SentencePair& witness = corpus.pairs[size_t(ex.source_pair_id)];
    CHECK(ex.sentence == witness.target);
    CHECK(is_irrelevant(ex.query, witness.english, emb, config.lambda1));
  }
  CHECK(negatives == size_t(set.stats.negatives));
}

TEST_CASE("every positive's query occurs in its source english sentence") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 150;
  opts.n_vocab = 30;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  EmbeddingTable emb = fixtures::unit_embeddings(corpus.query_vocab, 16, 4);
  TrainingSet set = build_training_set(corpus, emb, {});
  for (const auto& ex : set.examples) {
    if (ex.label != 1) continue;
    const SentencePair& source = corpus.pairs[size_t(ex.source_pair_id)];
    CHECK(std::find(source.english.begin(), source.english.end(), ex.query) !=
          source.english.end());
    CHECK(ex.sentence == source.target);
  }
}

TEST_CASE("training set examples arrive in canonical order") {
  fixtures::CipherOptions opts;
  opts.n_pairs = 120;
  opts.n_vocab = 25;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  EmbeddingTable emb = fixtures::unit_embeddings(corpus.query_vocab, 16, 4);
  TrainingSet set = build_training_set(corpus, emb, {});
  for (size_t i = 1; i < set.examples.size(); ++i) {
    const auto& a = set.examples[i - 1];
    const auto& b = set.examples[i];
    auto key = [](const RelevanceExample& e) {
      return std::make_tuple(e.source_pair_id, e.query, e.label);
    };
    CHECK(key(a) <= key(b));
  }
}

TEST_CASE("training set serialization round trips byte-identically") {
  fixtures::TempDir tmp("augment");
  fixtures::CipherOptions opts;
  opts.n_pairs = 100;
  opts.n_vocab = 20;
  ParallelCorpus corpus = fixtures::cipher_corpus(opts);
  EmbeddingTable emb = fixtures::unit_embeddings(corpus.query_vocab, 16, 4);
  AugmentConfig config;
  config.seed = 77;

  TrainingSet first = build_training_set(corpus, emb, config);
  save_training_set(tmp.path("a.tsv"), first.examples, corpus.query_vocab,
                    corpus.target_vocab);
  TrainingSet second = build_training_set(corpus, emb, config);
  save_training_set(tmp.path("b.tsv"), second.examples, corpus.query_vocab,
                    corpus.target_vocab);
  CHECK(hash_file(tmp.path("a.tsv")) == hash_file(tmp.path("b.tsv")));

  std::vector<RelevanceExample> loaded =
      load_training_set(tmp.path("a.tsv"), corpus.query_vocab,
                        corpus.target_vocab);
  REQUIRE(loaded.size() == first.examples.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].label == first.examples[i].label);
    CHECK(loaded[i].query == first.examples[i].query);
    CHECK(loaded[i].sentence == first.examples[i].sentence);
    CHECK(loaded[i].source_pair_id == first.examples[i].source_pair_id);
  }
}

TEST_CASE("build_training_set with no resolvable queries is an error") {
  // Every English token of every pair is <unk>: zero positives.
  ParallelCorpus corpus;
  corpus.query_vocab = build_vocabulary({{"a"}}, "query", 1, 10);
  corpus.target_vocab = build_vocabulary({{"x"}}, "target", 1, 10);
  SentencePair pair;
  pair.pair_id = 0;
  pair.english = {kUnkId};
  pair.target = {1};
  corpus.pairs.push_back(pair);
  EmbeddingTable emb(corpus.query_vocab.size(), 4);
  CHECK_THROWS_AS(build_training_set(corpus, emb, {}), RuntimeFailure);
}

TEST_CASE("load_training_set validates its fields") {
  fixtures::TempDir tmp("augment");
  Vocabulary qv = build_vocabulary({{"a"}}, "query", 1, 10);
  Vocabulary tv = build_vocabulary({{"x"}}, "target", 1, 10);
  fixtures::write_file(tmp.path("bad_label.tsv"), "2\ta\tx\t0\n");
  CHECK_THROWS_AS(load_training_set(tmp.path("bad_label.tsv"), qv, tv),
                  ParseError);
  fixtures::write_file(tmp.path("bad_fields.tsv"), "1\ta\tx\n");
  CHECK_THROWS_AS(load_training_set(tmp.path("bad_fields.tsv"), qv, tv),
                  ParseError);
  fixtures::write_file(tmp.path("empty_sentence.tsv"), "1\ta\t\t0\n");
  CHECK_THROWS_AS(load_training_set(tmp.path("empty_sentence.tsv"), qv, tv),
                  ParseError);
}
