#ifndef SECLR_EVAL_HPP
#define SECLR_EVAL_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seclr/augment.hpp"
#include "seclr/corpus.hpp"
#include "seclr/model.hpp"
#include "seclr/retrieval.hpp"

namespace seclr {

// Binary relevance judgments, query then document.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> rel;

  // Relevant documents recorded for this query (rel = 1).
  int64_t relevant_count(const std::string& query_id) const;
};

// TREC format "query_id <iter> doc_id rel", rel ∈ {0,1}; the iteration
// column is carried by the format but ignored.
Qrels load_qrels(const std::string& path);

// Mean over relevant ranks of precision-at-rank, divided by the total
// number of relevant documents in the qrels (trec_eval convention:
// relevant documents missing from the ranking count against the
// score). Absent when the qrels hold no relevant document for the
// query. Duplicate doc ids in the ranking are an error.
std::optional<double> average_precision(
    const std::vector<std::string>& ranked_doc_ids, const Qrels& qrels,
    const std::string& query_id);

struct EvalReport {
  std::vector<std::pair<std::string, double>> per_query;  // evaluated only
  std::vector<std::string> skipped;  // zero-relevant queries
  double map = 0.0;
};

// MAP over the queries with at least one relevant document; the rest
// are listed as skipped. No evaluable query at all is an error.
EvalReport mean_average_precision(const RunFile& run, const Qrels& qrels);

// CSV "query_id,ap" per query (skipped queries get an empty ap), with
// a final summary row "all,<map>".
void save_eval_report(const std::string& path, const EvalReport& report);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;             // two-tailed
  double p_bonferroni = 1.0;  // min(1, comparisons · p)
};

// Paired two-tailed t-test over per-query score differences: sample
// standard deviation, n-1 degrees of freedom. Zero variance
// degenerates to (t=0, p=1) when the means agree and p=0 when they
// don't.
TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b, int comparisons);

// N_k(y): for every query row, the k most cosine-similar target rows
// (ties by index) each get a count. Rows are laid out
// consecutively, row-major.
std::vector<int64_t> neighborhood_counts(const double* query_rows,
                                         size_t n_query,
                                         const double* target_rows,
                                         size_t n_target, size_t dim, int k);

// Population third standardized moment; a zero-variance input is
// defined as skewness 0 (with a warning).
double skewness(const std::vector<int64_t>& counts);

struct HubnessReport {
  int k = 10;
  std::vector<int64_t> counts;  // per included target row
  double mean = 0.0;
  double sigma = 0.0;
  double skew = 0.0;
};

// Hubness of the model's trained embeddings: query rows against target
// rows, <unk> excluded. max_query/max_target keep only the most
// frequent tokens (vocabulary ids are frequency-ordered); 0 keeps all.
HubnessReport hubness_report(const ModelParams& params, int k,
                             size_t max_query = 0, size_t max_target = 0);

struct AblationRow {
  double fraction = 0.0;
  std::string method;
  std::string set_name;
  double map = 0.0;
};

struct EvalSet {
  std::string name;
  std::vector<QueryRecord> queries;
  std::vector<Document> documents;
  Qrels qrels;
};

struct AblationOptions {
  std::vector<double> fractions = {0.05, 0.1, 0.25, 0.5, 1.0};
  std::vector<std::string> methods = {"seclr", "seclr-rt", "psq"};
  uint64_t seed = 0;
  size_t dim = 32;
  Metric metric = Metric::kDot;
  AugmentConfig augment;
  TrainConfig train_config;
  int ibm1_iterations = 10;
  double psq_a0 = 0.3;
  // Query-side pretrained vectors: required by augmentation; also
  // initializes the model's query rows.
  const EmbeddingTable* pretrained_query = nullptr;
};

// For each fraction, one shared subsample feeds augmentation,
// alignment, and every method; each (fraction, method) is trained,
// ranked and scored against every evaluation set. Deterministic for a
// fixed seed.
std::vector<AblationRow> ablation_run(const ParallelCorpus& corpus,
                                      const std::vector<EvalSet>& eval_sets,
                                      const AblationOptions& options);

// CSV "fraction,method,set,map", fractions ascending.
void save_ablation(const std::string& path,
                   const std::vector<AblationRow>& rows);

}  // namespace seclr

#endif  // SECLR_EVAL_HPP
