#include "seclr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "seclr/common.hpp"

namespace seclr {

std::vector<RelevanceExample> generate_positives(const SentencePair& pair,
                                                 bool dedupe) {
  std::vector<RelevanceExample> out;
  std::set<TokenId> seen;
  for (TokenId q : pair.english) {
    if (q == kUnkId) continue;
    if (dedupe && !seen.insert(q).second) continue;
    RelevanceExample ex;
    ex.label = 1;
    ex.query = q;
    ex.sentence = pair.target;
    ex.source_pair_id = pair.pair_id;
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

double norm(const double* v, size_t dim) {
  double s = 0.0;
  for (size_t k = 0; k < dim; ++k) s += v[k] * v[k];
  return std::sqrt(s);
}

}  // namespace

bool is_irrelevant(TokenId q, const std::vector<TokenId>& english_sentence,
                   const EmbeddingTable& embeddings, double lambda1,
                   int64_t* zero_norm_warnings) {
  if (q == kUnkId) return 0.0 <= lambda1;
  const size_t dim = embeddings.dim();
  const double* wq = embeddings.row(q);
  if (norm(wq, dim) <= 1e-12) {
    if (zero_norm_warnings) ++*zero_norm_warnings;
    return 0.0 <= lambda1;
  }
  for (TokenId tok : english_sentence) {
    double cos = 0.0;
    if (tok != kUnkId) {
      if (norm(embeddings.row(tok), dim) <= 1e-12) {
        if (zero_norm_warnings) ++*zero_norm_warnings;
      } else {
        cos = cosine(wq, embeddings.row(tok), dim);
      }
    }
    if (cos > lambda1) return false;
  }
  return true;
}

std::optional<RelevanceExample> sample_negative(TokenId q,
                                                const ParallelCorpus& corpus,
                                                const EmbeddingTable& embeddings,
                                                const AugmentConfig& config,
                                                Rng& rng,
                                                int64_t* zero_norm_warnings) {
  if (corpus.pairs.empty())
    throw RuntimeFailure("cannot sample negatives from an empty corpus");
  for (int attempt = 0; attempt < config.max_resample_tries; ++attempt) {
    const SentencePair& candidate = corpus.pairs[rng.bounded(corpus.pairs.size())];
    if (!is_irrelevant(q, candidate.english, embeddings, config.lambda1,
                       zero_norm_warnings))
      continue;
    RelevanceExample ex;
    ex.label = 0;
    ex.query = q;
    ex.sentence = candidate.target;
    ex.source_pair_id = candidate.pair_id;
    return ex;
  }
  return std::nullopt;
}

TrainingSet build_training_set(const ParallelCorpus& corpus,
                               const EmbeddingTable& embeddings,
                               const AugmentConfig& config) {
  if (corpus.pairs.empty())
    throw RuntimeFailure("cannot build a training set from an empty corpus");
  if (config.negatives_per_positive < 1)
    throw ConfigError("negatives_per_positive must be at least 1");
  if (config.lambda1 < -1.0 || config.lambda1 > 1.0)
    throw ConfigError("lambda1 must lie in [-1, 1]");

  TrainingSet result;
  result.stats.embedding_coverage = embeddings.coverage();

  for (const auto& pair : corpus.pairs) {
    // Each source pair owns an rng substream so the negatives drawn
    // for it do not depend on how many other pairs were processed.
    Rng rng(config.seed, uint64_t(uint32_t(pair.pair_id)));

    for (TokenId q : pair.english)
      if (q == kUnkId) ++result.stats.unk_queries_skipped;

    for (auto& positive : generate_positives(pair, config.dedupe_queries)) {
      TokenId q = positive.query;
      result.examples.push_back(std::move(positive));
      ++result.stats.positives;
      for (int k = 0; k < config.negatives_per_positive; ++k) {
        auto negative = sample_negative(q, corpus, embeddings, config, rng,
                                        &result.stats.zero_norm_warnings);
        if (!negative) {
          ++result.stats.skipped_negatives;
          continue;
        }
        result.examples.push_back(std::move(*negative));
        ++result.stats.negatives;
      }
    }
  }
  if (result.stats.positives == 0)
    throw RuntimeFailure("training set generation produced no positives");
  if (result.stats.skipped_negatives * 100 >= result.stats.positives)
    std::cerr << "warning: " << result.stats.skipped_negatives
              << " negatives could not be sampled for "
              << result.stats.positives
              << " positives; classes are noticeably unbalanced\n";

  std::stable_sort(result.examples.begin(), result.examples.end(),
                   [](const RelevanceExample& a, const RelevanceExample& b) {
                     if (a.source_pair_id != b.source_pair_id)
                       return a.source_pair_id < b.source_pair_id;
                     if (a.query != b.query) return a.query < b.query;
                     return a.label < b.label;
                   });
  return result;
}

void save_training_set(const std::string& path,
                       const std::vector<RelevanceExample>& examples,
                       const Vocabulary& query_vocab,
                       const Vocabulary& target_vocab) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write training set file: " + path);
  for (const auto& ex : examples) {
    out << ex.label << '\t' << query_vocab.surface(ex.query) << '\t';
    for (size_t i = 0; i < ex.sentence.size(); ++i) {
      if (i) out << ' ';
      out << target_vocab.surface(ex.sentence[i]);
    }
    out << '\t' << ex.source_pair_id << '\n';
  }
  if (!out) throw RuntimeFailure("write failed: " + path);
}

std::vector<RelevanceExample> load_training_set(const std::string& path,
                                                const Vocabulary& query_vocab,
                                                const Vocabulary& target_vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open training set file: " + path);
  std::vector<RelevanceExample> examples;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string label_text, query_surface, sentence_text, pair_text;
    if (!std::getline(fields, label_text, '\t') ||
        !std::getline(fields, query_surface, '\t') ||
        !std::getline(fields, sentence_text, '\t') ||
        !std::getline(fields, pair_text))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 4 tab-separated fields");

    RelevanceExample ex;
    if (label_text == "0")
      ex.label = 0;
    else if (label_text == "1")
      ex.label = 1;
    else
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": label must be 0 or 1, got " + label_text);
    ex.query = query_vocab.lookup(query_surface);

    std::istringstream tokens(sentence_text);
    std::string tok;
    while (tokens >> tok) ex.sentence.push_back(target_vocab.lookup(tok));
    if (ex.sentence.empty())
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": empty sentence field");

    try {
      ex.source_pair_id = std::stoi(pair_text);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": bad pair id field");
    }
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw ParseError(path + ": empty training set file");
  return examples;
}

}  // namespace seclr
