#ifndef SECLR_ALIGN_HPP
#define SECLR_ALIGN_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seclr/corpus.hpp"

namespace seclr {

enum class Normalization { kRaw, kRow, kColumn };

const char* normalization_name(Normalization tag);
Normalization normalization_from_name(const std::string& name);

// Per-position probability mass over one sentence; entries align with
// sentence positions and sum to 1. Duplicate tokens each hold their
// own share.
struct RationaleDistribution {
  std::vector<double> mass;
};

// Sparse translation table A[q,s]. Row form stores t(s|q) with every
// row summing to 1; column form stores the reverse normalization used
// by probabilistic query translation. The constructor verifies the
// sums against the tag (1e-9), so a live instance is always
// consistent. Vocabulary content hashes travel with the table to catch
// cross-run mixups; 0 means unknown.
class TranslationMatrix {
 public:
  using Row = std::map<TokenId, double>;
  using Cells = std::map<TokenId, Row>;

  TranslationMatrix() = default;
  TranslationMatrix(Cells cells, Normalization tag,
                    uint64_t query_vocab_hash = 0,
                    uint64_t target_vocab_hash = 0);

  Normalization tag() const { return tag_; }
  const Cells& rows() const { return cells_; }
  const Row* row(TokenId q) const;
  double prob(TokenId q, TokenId s) const;
  size_t entry_count() const;

  uint64_t query_vocab_hash() const { return query_vocab_hash_; }
  uint64_t target_vocab_hash() const { return target_vocab_hash_; }

  // TSV "q<TAB>s<TAB>prob" preceded by a "# normalization=<tag>"
  // header; surfaces resolved through the given vocabularies.
  void save(const std::string& path, const Vocabulary& query_vocab,
            const Vocabulary& target_vocab) const;
  static TranslationMatrix load(const std::string& path,
                                const Vocabulary& query_vocab,
                                const Vocabulary& target_vocab);

 private:
  Cells cells_;
  Normalization tag_ = Normalization::kRaw;
  uint64_t query_vocab_hash_ = 0;
  uint64_t target_vocab_hash_ = 0;
};

// Vanilla IBM Model 1 EM in the query→target direction, uniform
// initialization over co-occurring pairs, no smoothing. Appends the
// corpus log-likelihood measured before each update to ll_trace when
// given, and insists the sequence never decreases.
TranslationMatrix train_ibm1(const ParallelCorpus& corpus, int iterations,
                             std::vector<double>* ll_trace = nullptr);

// Weighted per-row average of row-normalized tables, renormalized, so
// scaling all weights by a constant changes nothing.
TranslationMatrix merge_matrices(const std::vector<TranslationMatrix>& tables,
                                 const std::vector<double>& weights);

// Rescales so every stored target token's column sums to 1. Accepts
// raw counts or a row-normalized table; zero-mass columns are dropped
// with a warning.
TranslationMatrix column_normalize(const TranslationMatrix& table);

// Ingests an external lexicon, TSV "query<TAB>target<TAB>weight" with
// positive weights; duplicate entries aggregate, out-of-vocabulary
// lines are skipped (counted in *dropped when given), rows come back
// normalized.
TranslationMatrix load_lexicon(const std::string& path,
                               const Vocabulary& query_vocab,
                               const Vocabulary& target_vocab,
                               int64_t* dropped = nullptr);

// ρ for query q over the positions of sentence: A's row restricted to
// the tokens present and renormalized. Absent when q has no row or no
// sentence token carries mass — the untrainable-rationale cases.
std::optional<RationaleDistribution> rationale_distribution(
    TokenId q, const std::vector<TokenId>& sentence,
    const TranslationMatrix& table);

}  // namespace seclr

#endif  // SECLR_ALIGN_HPP
