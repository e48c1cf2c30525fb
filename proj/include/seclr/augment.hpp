#ifndef SECLR_AUGMENT_HPP
#define SECLR_AUGMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seclr/align.hpp"
#include "seclr/common.hpp"
#include "seclr/corpus.hpp"
#include "seclr/embeddings.hpp"

namespace seclr {

// One synthetic relevance judgment: does this target-language sentence
// answer the one-word query? For positives source_pair_id is the pair
// whose English side contained the query; for negatives it is the
// witness pair whose English side passed the dissimilarity check, so
// the certificate can be re-verified from the stored id alone.
struct RelevanceExample {
  int label = 0;
  TokenId query = kUnkId;
  std::vector<TokenId> sentence;
  int32_t source_pair_id = -1;
  std::optional<RationaleDistribution> rationale;
};

struct AugmentConfig {
  double lambda1 = 0.4;
  int negatives_per_positive = 1;
  int max_resample_tries = 100;
  uint64_t seed = 0;
  // Repeated unigrams in one sentence normally collapse to a single
  // positive; identical duplicates add nothing.
  bool dedupe_queries = true;
};

struct AugmentStats {
  int64_t positives = 0;
  int64_t negatives = 0;
  int64_t skipped_negatives = 0;     // resampling exhausted its budget
  int64_t unk_queries_skipped = 0;   // <unk> cannot be a query
  int64_t zero_norm_warnings = 0;
  double embedding_coverage = 0.0;
};

struct TrainingSet {
  std::vector<RelevanceExample> examples;
  AugmentStats stats;
};

// One positive (q, target side, r=1) per query unigram of the English
// side. Empty English side yields nothing.
std::vector<RelevanceExample> generate_positives(const SentencePair& pair,
                                                 bool dedupe = true);

// True when no word of the English sentence is similar to q:
// max cosine ≤ λ₁. <unk> counts as cosine 0; a zero-norm vector also
// scores 0 and bumps *zero_norm_warnings when given.
bool is_irrelevant(TokenId q, const std::vector<TokenId>& english_sentence,
                   const EmbeddingTable& embeddings, double lambda1,
                   int64_t* zero_norm_warnings = nullptr);

// Draws random pairs until one's English side passes is_irrelevant and
// returns (q, its target side, r=0); gives up after max_resample_tries
// draws.
std::optional<RelevanceExample> sample_negative(TokenId q,
                                                const ParallelCorpus& corpus,
                                                const EmbeddingTable& embeddings,
                                                const AugmentConfig& config,
                                                Rng& rng,
                                                int64_t* zero_norm_warnings =
                                                    nullptr);

// All positives plus negatives_per_positive sampled negatives each
// (minus exhausted ones). Deterministic for a fixed seed: every source
// pair gets its own rng substream keyed (seed, pair_id), and the
// output is sorted by (source_pair_id, query token, label).
TrainingSet build_training_set(const ParallelCorpus& corpus,
                               const EmbeddingTable& embeddings,
                               const AugmentConfig& config);

// Line format "label<TAB>query<TAB>space-joined sentence<TAB>pair_id",
// token surfaces resolved through the vocabularies.
void save_training_set(const std::string& path,
                       const std::vector<RelevanceExample>& examples,
                       const Vocabulary& query_vocab,
                       const Vocabulary& target_vocab);
std::vector<RelevanceExample> load_training_set(const std::string& path,
                                                const Vocabulary& query_vocab,
                                                const Vocabulary& target_vocab);

}  // namespace seclr

#endif  // SECLR_AUGMENT_HPP
