#ifndef SECLR_RETRIEVAL_HPP
#define SECLR_RETRIEVAL_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "seclr/align.hpp"
#include "seclr/corpus.hpp"
#include "seclr/embeddings.hpp"
#include "seclr/model.hpp"
#include "seclr/text.hpp"

namespace seclr {

struct Document {
  std::string doc_id;
  std::vector<std::vector<TokenId>> sentences;
};

struct QueryRecord {
  std::string query_id;
  std::vector<TokenId> tokens;
};

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
};

struct RunFile {
  std::vector<RunEntry> entries;
  std::string run_tag = "seclr";
};

// JSON lines, one document per line: {"doc_id": ..., "sentences":
// [...]}. Sentences are preprocessed and encoded; a document whose
// sentences all normalize away keeps one empty sentence so it still
// appears (at floor score) in every ranking. Duplicate ids are errors.
std::vector<Document> load_documents(const std::string& path,
                                     const StopwordSet& stopwords,
                                     const Vocabulary& vocab);

// TSV "query_id<TAB>query text". A query that normalizes to nothing is
// an error naming the id — there is nothing to score.
std::vector<QueryRecord> load_queries(const std::string& path,
                                      const StopwordSet& stopwords,
                                      const Vocabulary& vocab);

// One sentence-level relevance score; implementations carry their own
// scale (probability, cosine, log-probability) and rankings never mix
// scales.
class SentenceScorer {
 public:
  virtual ~SentenceScorer() = default;
  virtual double score(const std::vector<TokenId>& query,
                       const std::vector<TokenId>& sentence) const = 0;
  virtual std::string name() const = 0;
};

// σ(min-max similarity) under trained model parameters.
class SeclrScorer : public SentenceScorer {
 public:
  explicit SeclrScorer(const ModelParams& params) : params_(&params) {}
  double score(const std::vector<TokenId>& query,
               const std::vector<TokenId>& sentence) const override;
  std::string name() const override { return "seclr"; }

 private:
  const ModelParams* params_;
};

// min over query words of the best cosine against any sentence word,
// under external (pretrained) embeddings; any word that is <unk> or
// uncovered scores the floor -1.
double cosine_min_max_score(const std::vector<TokenId>& query,
                            const std::vector<TokenId>& sentence,
                            const EmbeddingTable& query_embeddings,
                            const EmbeddingTable& target_embeddings);

class CosineScorer : public SentenceScorer {
 public:
  CosineScorer(const EmbeddingTable& query_embeddings,
               const EmbeddingTable& target_embeddings)
      : query_(&query_embeddings), target_(&target_embeddings) {}
  double score(const std::vector<TokenId>& query,
               const std::vector<TokenId>& sentence) const override;
  std::string name() const override { return "cosine"; }

 private:
  const EmbeddingTable* query_;
  const EmbeddingTable* target_;
};

// Unigram probabilities over query-language tokens; lookups outside
// the table fall back to a 1e-10 floor.
using BackgroundModel = std::map<TokenId, double>;

double background_prob(const BackgroundModel& background, TokenId q);

// Expected translated term frequency Σ_{s∈S} A_col[q,s], duplicates
// counted per position.
double psq_expected_tf(TokenId q, const std::vector<TokenId>& sentence,
                       const TranslationMatrix& a_col);

// Two-state mixture of translated term frequency and background:
// Σ_{q∈Q} log(a0·tf/|S| + (1-a0)·background[q]). Finite for every
// input thanks to the background floor.
double psq_sentence_prob(const std::vector<TokenId>& query,
                         const std::vector<TokenId>& sentence,
                         const TranslationMatrix& a_col,
                         const BackgroundModel& background, double a0);

// background[q] ∝ expected translated count of q over all sentences of
// the collection.
BackgroundModel estimate_background(
    const std::vector<std::vector<TokenId>>& sentences,
    const TranslationMatrix& a_col);
BackgroundModel estimate_background(const ParallelCorpus& corpus,
                                    const TranslationMatrix& a_col);
BackgroundModel estimate_background(const std::vector<Document>& documents,
                                    const TranslationMatrix& a_col);

class PsqScorer : public SentenceScorer {
 public:
  PsqScorer(const TranslationMatrix& a_col, const BackgroundModel& background,
            double a0);
  double score(const std::vector<TokenId>& query,
               const std::vector<TokenId>& sentence) const override;
  std::string name() const override { return "psq"; }

 private:
  const TranslationMatrix* a_col_;
  const BackgroundModel* background_;
  double a0_;
};

// Document relevance is the best sentence's relevance.
double score_document(const QueryRecord& query, const Document& document,
                      const SentenceScorer& scorer);

// Scores every (query, document) pair; per query, ranks descend by
// score with ties broken by doc_id, starting at 1.
RunFile rank_collection(const std::vector<QueryRecord>& queries,
                        const std::vector<Document>& documents,
                        const SentenceScorer& scorer,
                        const std::string& run_tag);

// TREC run lines "query_id Q0 doc_id rank score run_tag".
void save_run(const std::string& path, const RunFile& run);
RunFile load_run(const std::string& path);

}  // namespace seclr

#endif  // SECLR_RETRIEVAL_HPP
