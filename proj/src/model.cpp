#include "seclr/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>

#include "seclr/common.hpp"

namespace seclr {

const char* metric_name(Metric metric) {
  switch (metric) {
    case Metric::kDot: return "dot";
    case Metric::kCosine: return "cosine";
  }
  throw RuntimeFailure("unknown metric");
}

Metric metric_from_name(const std::string& name) {
  if (name == "dot") return Metric::kDot;
  if (name == "cosine") return Metric::kCosine;
  throw ConfigError("unknown similarity metric: " + name);
}

size_t ModelParams::query_row(TokenId q) const {
  if (q < 0 || size_t(q) >= n_query)
    throw RuntimeFailure("query token out of range: " + std::to_string(q));
  return size_t(q);
}

size_t ModelParams::target_row(TokenId s) const {
  if (s < 0 || size_t(s) >= n_target)
    throw RuntimeFailure("target token out of range: " + std::to_string(s));
  return n_query + size_t(s);
}

double* ModelParams::row(size_t r) {
  if (r >= rows()) throw RuntimeFailure("row out of range: " + std::to_string(r));
  return weights.data() + r * dim;
}

const double* ModelParams::row(size_t r) const {
  if (r >= rows()) throw RuntimeFailure("row out of range: " + std::to_string(r));
  return weights.data() + r * dim;
}

ModelParams init_model(const Vocabulary& query_vocab,
                       const Vocabulary& target_vocab, size_t dim,
                       Metric metric, uint64_t seed,
                       const EmbeddingTable* pretrained) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  ModelParams params;
  params.n_query = query_vocab.size();
  params.n_target = target_vocab.size();
  params.dim = dim;
  params.metric = metric;
  params.query_vocab_hash = query_vocab.content_hash();
  params.target_vocab_hash = target_vocab.content_hash();
  params.weights.assign(params.rows() * dim, 0.0);

  Rng rng(seed);
  const double half = 0.5 / double(dim);
  for (size_t r = 0; r < params.rows(); ++r) {
    if (r == 0 || r == params.n_query) continue;  // <unk> rows stay zero
    double* w = params.row(r);
    for (size_t k = 0; k < dim; ++k) w[k] = rng.uniform(-half, half);
  }
  if (pretrained) {
    if (pretrained->dim() != dim)
      throw ConfigError("pretrained embeddings have dimension " +
                        std::to_string(pretrained->dim()) + ", model wants " +
                        std::to_string(dim));
    if (pretrained->rows() != params.n_query)
      throw ConfigError("pretrained embeddings cover a different vocabulary");
    for (size_t q = 1; q < params.n_query; ++q)
      if (pretrained->covered(TokenId(q)))
        std::memcpy(params.row(q), pretrained->row(TokenId(q)),
                    dim * sizeof(double));
  }
  return params;
}

namespace {

constexpr double kNormGuard = 1e-12;

double dot(const double* a, const double* b, size_t dim) {
  double s = 0.0;
  for (size_t k = 0; k < dim; ++k) s += a[k] * b[k];
  return s;
}

double similarity(const ModelParams& p, size_t row_q, size_t row_s) {
  if (p.metric == Metric::kDot) return dot(p.row(row_q), p.row(row_s), p.dim);
  return cosine(p.row(row_q), p.row(row_s), p.dim);
}

// log(1 + e^x) without overflow; -log σ(z) = softplus(-z).
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

UnigramScore logit_unigram(TokenId q, const std::vector<TokenId>& sentence,
                           const ModelParams& params) {
  UnigramScore out;
  out.z = params.floor_logit;
  if (q == kUnkId) return out;
  const size_t qr = params.query_row(q);
  bool found = false;
  for (size_t i = 0; i < sentence.size(); ++i) {
    if (sentence[i] == kUnkId) continue;
    double z = similarity(params, qr, params.target_row(sentence[i]));
    if (!found || z > out.z) {
      out.z = z;
      out.argmax = i;
      found = true;
    }
  }
  if (!found) out.argmax.reset();
  return out;
}

double logit_query(const std::vector<TokenId>& query,
                   const std::vector<TokenId>& sentence,
                   const ModelParams& params) {
  if (query.empty()) throw RuntimeFailure("cannot score an empty query");
  double z = std::numeric_limits<double>::infinity();
  for (TokenId q : query) z = std::min(z, logit_unigram(q, sentence, params).z);
  return z;
}

double relevance_prob(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> attention_distribution(TokenId q,
                                           const std::vector<TokenId>& sentence,
                                           const ModelParams& params) {
  if (sentence.empty())
    throw RuntimeFailure("attention over an empty sentence");
  if (q == kUnkId)
    throw RuntimeFailure("attention for an out-of-vocabulary query");
  const size_t qr = params.query_row(q);
  std::vector<double> alpha(sentence.size());
  double max_z = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sentence.size(); ++i) {
    // <unk> rows are zero vectors, so they contribute similarity 0
    // like any other position; softmax keeps every position > 0.
    alpha[i] = similarity(params, qr, params.target_row(sentence[i]));
    max_z = std::max(max_z, alpha[i]);
  }
  double sum = 0.0;
  for (double& a : alpha) {
    a = std::exp(a - max_z);
    sum += a;
  }
  for (double& a : alpha) a /= sum;
  return alpha;
}

namespace {

std::optional<RationaleDistribution> example_rationale(
    const RelevanceExample& ex, const TranslationMatrix* alignment) {
  if (ex.rationale) return *ex.rationale;
  if (!alignment) return std::nullopt;
  return rationale_distribution(ex.query, ex.sentence, *alignment);
}

bool wants_rationale(const RelevanceExample& ex,
                     const TranslationMatrix* alignment, double lambda2) {
  return lambda2 > 0.0 && alignment != nullptr && ex.label == 1 &&
         ex.query != kUnkId && !ex.sentence.empty();
}

}  // namespace

LossBreakdown example_loss(const RelevanceExample& ex,
                           const ModelParams& params,
                           const TranslationMatrix* alignment, double lambda2) {
  LossBreakdown out;
  UnigramScore score = logit_unigram(ex.query, ex.sentence, params);
  out.l_rel = ex.label == 1 ? softplus(-score.z) : softplus(score.z);
  out.total = out.l_rel;

  if (!wants_rationale(ex, alignment, lambda2)) return out;
  auto rho = example_rationale(ex, alignment);
  if (!rho) return out;

  std::vector<double> alpha = attention_distribution(ex.query, ex.sentence, params);
  double kl = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i)
    if (rho->mass[i] > 0.0) kl += rho->mass[i] * std::log(rho->mass[i] / alpha[i]);
  if (kl < 0.0) {
    if (kl < -1e-12)
      throw RuntimeFailure("KL divergence came out negative: " +
                           std::to_string(kl));
    kl = 0.0;  // rounding noise at ρ ≈ α
  }
  out.l_rat = kl;
  out.total = out.l_rel + lambda2 * kl;
  return out;
}

namespace {

// Adds coeff · ∂sim(w_q, w_s)/∂w into the gradient rows of both ends.
// The target side is skipped for <unk> (untrainable); the query row is
// always accumulated — for a zero <unk> partner the contribution is
// zero anyway.
void add_similarity_gradient(const ModelParams& params, TokenId q,
                             TokenId s_token, double coeff,
                             SparseGradient& grad) {
  const size_t dim = params.dim;
  const size_t qr = params.query_row(q);
  const size_t sr = params.target_row(s_token);
  const double* u = params.row(qr);
  const double* v = params.row(sr);

  auto row_of = [&](size_t r) -> std::vector<double>& {
    auto it = grad.find(r);
    if (it == grad.end())
      it = grad.emplace(r, std::vector<double>(dim, 0.0)).first;
    return it->second;
  };

  if (params.metric == Metric::kDot) {
    std::vector<double>& gq = row_of(qr);
    for (size_t k = 0; k < dim; ++k) gq[k] += coeff * v[k];
    if (s_token != kUnkId) {
      std::vector<double>& gs = row_of(sr);
      for (size_t k = 0; k < dim; ++k) gs[k] += coeff * u[k];
    }
    return;
  }

  double nu = std::sqrt(dot(u, u, dim));
  double nv = std::sqrt(dot(v, v, dim));
  if (nu <= kNormGuard || nv <= kNormGuard) return;  // sim pinned at 0
  double z = dot(u, v, dim) / (nu * nv);
  std::vector<double>& gq = row_of(qr);
  for (size_t k = 0; k < dim; ++k)
    gq[k] += coeff * (v[k] / (nu * nv) - z * u[k] / (nu * nu));
  if (s_token != kUnkId) {
    std::vector<double>& gs = row_of(sr);
    for (size_t k = 0; k < dim; ++k)
      gs[k] += coeff * (u[k] / (nu * nv) - z * v[k] / (nv * nv));
  }
}

}  // namespace

SparseGradient example_gradients(const RelevanceExample& ex,
                                 const ModelParams& params,
                                 const TranslationMatrix* alignment,
                                 double lambda2) {
  SparseGradient grad;
  if (ex.query == kUnkId) return grad;  // untrainable example

  UnigramScore score = logit_unigram(ex.query, ex.sentence, params);
  if (score.argmax) {
    // ∂l_rel/∂z = σ(z) − r, through the single argmax position.
    double gz = relevance_prob(score.z) - double(ex.label);
    add_similarity_gradient(params, ex.query, ex.sentence[*score.argmax], gz,
                            grad);
  }

  if (wants_rationale(ex, alignment, lambda2)) {
    auto rho = example_rationale(ex, alignment);
    if (rho) {
      // ∂(λ₂·KL(ρ‖α))/∂z_i = λ₂(α_i − ρ_i), at every position.
      std::vector<double> alpha =
          attention_distribution(ex.query, ex.sentence, params);
      for (size_t i = 0; i < alpha.size(); ++i) {
        double c = lambda2 * (alpha[i] - rho->mass[i]);
        if (c == 0.0) continue;
        add_similarity_gradient(params, ex.query, ex.sentence[i], c, grad);
      }
    }
  }
  return grad;
}

AdamState::AdamState(double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamState::step(ModelParams& params, const SparseGradient& grad,
                     double lr) {
  for (const auto& [r, g] : grad) {
    if (g.size() != params.dim)
      throw RuntimeFailure("gradient row " + std::to_string(r) +
                           " has wrong dimension");
    for (double v : g)
      if (!std::isfinite(v))
        throw RuntimeFailure("non-finite gradient for row " +
                             std::to_string(r));

    RowState& st = moments_[r];
    if (st.m.empty()) {
      st.m.assign(params.dim, 0.0);
      st.v.assign(params.dim, 0.0);
    }
    // Each row keeps its own step count: bias correction sees how
    // often the row was touched, not how many global steps happened.
    st.t += 1;
    const double bc1 = 1.0 - std::pow(beta1_, double(st.t));
    const double bc2 = 1.0 - std::pow(beta2_, double(st.t));
    double* w = params.row(r);
    for (size_t k = 0; k < params.dim; ++k) {
      st.m[k] = beta1_ * st.m[k] + (1.0 - beta1_) * g[k];
      st.v[k] = beta2_ * st.v[k] + (1.0 - beta2_) * g[k] * g[k];
      w[k] -= lr * (st.m[k] / bc1) / (std::sqrt(st.v[k] / bc2) + epsilon_);
    }
  }
}

TrainResult train(const std::vector<RelevanceExample>& train_set,
                  const std::vector<RelevanceExample>& validation_set,
                  ModelParams init, const TranslationMatrix* alignment,
                  const TrainConfig& config) {
  if (train_set.empty()) throw RuntimeFailure("empty training set");
  if (validation_set.empty()) throw RuntimeFailure("empty validation set");
  if (!(config.learning_rate > 0.0))
    throw ConfigError("learning rate must be positive");
  if (config.lambda2 < 0.0) throw ConfigError("lambda2 must be nonnegative");
  if (config.patience < 1) throw ConfigError("patience must be at least 1");
  if (config.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");

  TrainResult result;
  std::vector<size_t> train_idx, val_idx;
  for (size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].query == kUnkId)
      ++result.skipped_unk_queries;
    else
      train_idx.push_back(i);
  }
  for (size_t i = 0; i < validation_set.size(); ++i) {
    if (validation_set[i].query == kUnkId)
      ++result.skipped_unk_queries;
    else
      val_idx.push_back(i);
  }
  if (train_idx.empty())
    throw RuntimeFailure("every training example has an <unk> query");
  if (val_idx.empty())
    throw RuntimeFailure("every validation example has an <unk> query");

  ModelParams params = std::move(init);
  AdamState adam;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng rng(config.seed, uint64_t(epoch));
    for (size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1], train_idx[rng.bounded(i)]);

    double sum_rel = 0.0, sum_rat = 0.0;
    int64_t n_rat = 0;
    for (size_t idx : train_idx) {
      const RelevanceExample& ex = train_set[idx];
      LossBreakdown lb = example_loss(ex, params, alignment, config.lambda2);
      if (!std::isfinite(lb.total))
        throw RuntimeFailure("training diverged at epoch " +
                             std::to_string(epoch) + ": loss " +
                             std::to_string(lb.total) + " on example " +
                             std::to_string(idx));
      sum_rel += lb.l_rel;
      if (lb.l_rat) {
        sum_rat += *lb.l_rat;
        ++n_rat;
      }
      adam.step(params, example_gradients(ex, params, alignment, config.lambda2),
                config.learning_rate);
    }

    double val_loss = 0.0;
    for (size_t idx : val_idx)
      val_loss +=
          example_loss(validation_set[idx], params, alignment, config.lambda2)
              .total;
    val_loss /= double(val_idx.size());
    if (!std::isfinite(val_loss))
      throw RuntimeFailure("validation loss diverged at epoch " +
                           std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_l_rel = sum_rel / double(train_idx.size());
    if (n_rat > 0) entry.mean_l_rat = sum_rat / double(n_rat);
    entry.val_loss = val_loss;
    result.log.push_back(entry);

    if (val_loss < best_val) {
      best_val = val_loss;
      result.best_epoch = epoch;
      result.params = params;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= config.patience) {
      break;
    }
  }
  return result;
}

void save_training_log(const std::string& path,
                       const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write training log: " + path);
  out << "epoch,l_rel,l_rat,val_loss\n" << std::setprecision(17);
  for (const auto& e : log) {
    out << e.epoch << ',' << e.mean_l_rel << ',';
    if (e.mean_l_rat) out << *e.mean_l_rat;
    out << ',' << e.val_loss << '\n';
  }
  if (!out) throw RuntimeFailure("write failed: " + path);
}

namespace {

constexpr char kModelMagic[8] = {'S', 'E', 'C', 'L', 'R', 'M', 'D', 'L'};
constexpr uint32_t kModelVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError(path + ": truncated model file");
  return value;
}

}  // namespace

void save_model(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write model file: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  write_pod(out, kModelVersion);
  write_pod(out, params.query_vocab_hash);
  write_pod(out, params.target_vocab_hash);
  write_pod(out, uint32_t(params.n_query));
  write_pod(out, uint32_t(params.n_target));
  write_pod(out, uint32_t(params.dim));
  write_pod(out, uint8_t(params.metric == Metric::kCosine ? 1 : 0));
  write_pod(out, params.floor_logit);
  out.write(reinterpret_cast<const char*>(params.weights.data()),
            std::streamsize(params.weights.size() * sizeof(double)));
  if (!out) throw RuntimeFailure("write failed: " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw ParseError(path + ": not a model file");
  uint32_t version = read_pod<uint32_t>(in, path);
  if (version != kModelVersion)
    throw ParseError(path + ": unsupported model version " +
                     std::to_string(version));
  ModelParams params;
  params.query_vocab_hash = read_pod<uint64_t>(in, path);
  params.target_vocab_hash = read_pod<uint64_t>(in, path);
  params.n_query = read_pod<uint32_t>(in, path);
  params.n_target = read_pod<uint32_t>(in, path);
  params.dim = read_pod<uint32_t>(in, path);
  uint8_t metric = read_pod<uint8_t>(in, path);
  if (metric > 1) throw ParseError(path + ": unknown metric byte");
  params.metric = metric == 1 ? Metric::kCosine : Metric::kDot;
  params.floor_logit = read_pod<double>(in, path);
  if (params.dim == 0 || params.rows() == 0)
    throw ParseError(path + ": empty model");
  params.weights.resize(params.rows() * params.dim);
  in.read(reinterpret_cast<char*>(params.weights.data()),
          std::streamsize(params.weights.size() * sizeof(double)));
  if (!in) throw ParseError(path + ": truncated model file");
  for (double w : params.weights)
    if (!std::isfinite(w))
      throw ParseError(path + ": non-finite weight in model file");
  return params;
}

}  // namespace seclr
