#ifndef SECLR_CORPUS_HPP
#define SECLR_CORPUS_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "seclr/text.hpp"

namespace seclr {

using TokenId = int32_t;

// Id 0 is reserved in every vocabulary: unknown surfaces map to it at
// lookup time instead of erroring, so evaluation queries may contain
// words never seen in the parallel corpus.
inline constexpr TokenId kUnkId = 0;
inline constexpr const char* kUnkSurface = "<unk>";

class Vocabulary {
 public:
  Vocabulary() : Vocabulary("") {}
  explicit Vocabulary(std::string lang_tag);

  // Appends a surface with its frequency; surfaces must be unique.
  TokenId add(const std::string& surface, int64_t frequency);

  // The <unk> row carries the total mass of filtered-out tokens.
  void set_unk_frequency(int64_t frequency) { freqs_[kUnkId] = frequency; }

  // kUnkId when the surface is not present.
  TokenId lookup(const std::string& surface) const;
  bool contains(const std::string& surface) const;

  const std::string& surface(TokenId id) const;
  int64_t frequency(TokenId id) const;

  // Includes the reserved <unk> entry.
  size_t size() const { return surfaces_.size(); }
  const std::string& lang() const { return lang_; }

  // Stable content hash over (lang, surfaces, frequencies); model files
  // record it so a model is never scored against the wrong vocabulary.
  uint64_t content_hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path, std::string lang_tag);

 private:
  std::vector<std::string> surfaces_;
  std::vector<int64_t> freqs_;
  std::unordered_map<std::string, TokenId> index_;
  std::string lang_;
};

// Frequency >= min_count, truncated to max_size by descending frequency
// with lexicographic tie-break; deterministic. Errors when nothing
// survives. max_size excludes the reserved <unk> entry.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& streams,
                            std::string lang_tag, int64_t min_count,
                            size_t max_size);

struct SentencePair {
  std::vector<TokenId> english;  // query-language side
  std::vector<TokenId> target;
  int32_t pair_id = 0;
};

struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  Vocabulary query_vocab;
  Vocabulary target_vocab;
  // Pairs with an empty side after preprocessing, dropped at load.
  int64_t dropped_pairs = 0;
};

struct PreprocessOptions {
  StopwordSet query_stopwords;
  StopwordSet target_stopwords;
  int64_t vocab_min_count = 1;
  size_t vocab_max_size = std::numeric_limits<size_t>::max();
  std::string query_lang = "query";
  std::string target_lang = "target";
};

// UTF-8 TSV, one pair per line: "english<TAB>target". Both sides run
// through normalize_text; pairs with an empty side are dropped and
// counted. Wrong field count or invalid UTF-8 is a ParseError naming
// the line.
ParallelCorpus load_parallel(const std::string& path,
                             const PreprocessOptions& opts);

// Assembles a corpus from already-tokenized sides: builds both
// vocabularies, encodes (out-of-vocabulary tokens become <unk>), drops
// empty pairs and assigns dense pair ids. Shared by the loader, the
// ablation harness and test fixtures.
ParallelCorpus corpus_from_token_pairs(
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
        sides,
    const PreprocessOptions& opts);

struct CorpusSplits {
  ParallelCorpus train;
  ParallelCorpus validation;
  ParallelCorpus test;
  uint64_t seed = 0;
};

// Seeded uniform shuffle then a 96/3/1 cut. Splits keep the parent
// vocabularies and the original pair ids (they are views of the source
// corpus, so split membership stays traceable). Corpora under 100
// pairs are split anyway with a warning on stderr.
CorpusSplits split_corpus(const ParallelCorpus& corpus, uint64_t seed);

// Uniform subset of exactly round(fraction * N) pairs, original order
// and ids preserved. fraction must be in (0, 1]; an empty result is an
// error.
ParallelCorpus subsample(const ParallelCorpus& corpus, double fraction,
                         uint64_t seed);

}  // namespace seclr

#endif  // SECLR_CORPUS_HPP
