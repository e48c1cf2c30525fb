#ifndef SECLR_MODEL_HPP
#define SECLR_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seclr/align.hpp"
#include "seclr/augment.hpp"
#include "seclr/corpus.hpp"
#include "seclr/embeddings.hpp"

namespace seclr {

enum class Metric { kDot, kCosine };

const char* metric_name(Metric metric);
Metric metric_from_name(const std::string& name);

// The model's only parameter: one embedding row per joint-vocabulary
// entry, query rows first, then target rows. The <unk> row of either
// side stays zero and never receives gradient.
struct ModelParams {
  size_t n_query = 0;
  size_t n_target = 0;
  size_t dim = 0;
  Metric metric = Metric::kDot;
  double floor_logit = -10.0;
  uint64_t query_vocab_hash = 0;
  uint64_t target_vocab_hash = 0;
  std::vector<double> weights;  // (n_query + n_target) x dim, row-major

  size_t rows() const { return n_query + n_target; }
  size_t query_row(TokenId q) const;
  size_t target_row(TokenId s) const;
  double* row(size_t r);
  const double* row(size_t r) const;
};

// Fresh parameters with uniform noise in [-0.5/dim, 0.5/dim]. Query
// rows covered by `pretrained` (when given) are copied from it
// instead, which is how pretrained English vectors enter the model.
ModelParams init_model(const Vocabulary& query_vocab,
                       const Vocabulary& target_vocab, size_t dim,
                       Metric metric, uint64_t seed,
                       const EmbeddingTable* pretrained = nullptr);

// Versioned little-endian binary: header (vocab hashes, shape, metric,
// floor logit) followed by the raw rows.
void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);

struct UnigramScore {
  double z = 0.0;
  std::optional<size_t> argmax;  // sentence position; absent at the floor
};

// max over sentence positions of sim(w_q, w_s), ties to the lowest
// position. An <unk> query, or a sentence with no scorable token,
// yields the floor logit and no argmax.
UnigramScore logit_unigram(TokenId q, const std::vector<TokenId>& sentence,
                           const ModelParams& params);

// min over query tokens of their unigram logits — every query word
// must be matched somewhere, so the weakest word decides.
double logit_query(const std::vector<TokenId>& query,
                   const std::vector<TokenId>& sentence,
                   const ModelParams& params);

// Overflow-safe logistic sigmoid.
double relevance_prob(double z);

// Softmax (max-subtracted) of the per-position similarities: the
// model's attention α over sentence positions.
std::vector<double> attention_distribution(TokenId q,
                                           const std::vector<TokenId>& sentence,
                                           const ModelParams& params);

struct LossBreakdown {
  double l_rel = 0.0;
  std::optional<double> l_rat;  // absent for the exclusion cases
  double total = 0.0;
};

// l_rel = -log p(r|q,S); l_rat = KL(ρ‖α) only for positives whose
// rationale exists (query has a row in A and some sentence token
// carries translation mass); total = l_rel + λ₂·l_rat.
LossBreakdown example_loss(const RelevanceExample& ex,
                           const ModelParams& params,
                           const TranslationMatrix* alignment, double lambda2);

// Rows of ∂L/∂W, keyed by joint row index; only the query row and the
// touched sentence rows appear.
using SparseGradient = std::map<size_t, std::vector<double>>;

SparseGradient example_gradients(const RelevanceExample& ex,
                                 const ModelParams& params,
                                 const TranslationMatrix* alignment,
                                 double lambda2);

// Lazy adaptive-moment state: rows get moments and a step counter the
// first time they receive gradient; untouched rows never change.
class AdamState {
 public:
  AdamState(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  void step(ModelParams& params, const SparseGradient& grad, double lr);

  bool has_row(size_t row) const { return moments_.count(row) != 0; }

 private:
  struct RowState {
    std::vector<double> m, v;
    int64_t t = 0;
  };
  double beta1_, beta2_, epsilon_;
  std::map<size_t, RowState> moments_;
};

struct TrainConfig {
  double learning_rate = 0.001;
  double lambda2 = 3.0;
  int max_epochs = 20;
  int patience = 3;
  uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_l_rel = 0.0;
  std::optional<double> mean_l_rat;
  double val_loss = 0.0;
};

struct TrainResult {
  ModelParams params;  // snapshot of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = -1;
  int64_t skipped_unk_queries = 0;
};

// Per-example updates over a seeded shuffle each epoch; early-stops
// after `patience` epochs without validation improvement; non-finite
// loss aborts with diagnostics. Pass alignment (with lambda2 > 0) for
// rationale training, null for the plain relevance objective.
TrainResult train(const std::vector<RelevanceExample>& train_set,
                  const std::vector<RelevanceExample>& validation_set,
                  ModelParams init, const TranslationMatrix* alignment,
                  const TrainConfig& config);

// CSV "epoch,l_rel,l_rat,val_loss"; l_rat empty when absent.
void save_training_log(const std::string& path,
                       const std::vector<EpochLog>& log);

}  // namespace seclr

#endif  // SECLR_MODEL_HPP
