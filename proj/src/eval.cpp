#include "seclr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "seclr/common.hpp"

namespace seclr {

int64_t Qrels::relevant_count(const std::string& query_id) const {
  auto it = rel.find(query_id);
  if (it == rel.end()) return 0;
  int64_t n = 0;
  for (const auto& [doc, r] : it->second) n += r;
  return n;
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open qrels file: " + path);
  Qrels qrels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string query_id, iteration, doc_id, rel_text;
    if (!(fields >> query_id >> iteration >> doc_id >> rel_text))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 'query_id iter doc_id rel'");
    int rel_value;
    if (rel_text == "0")
      rel_value = 0;
    else if (rel_text == "1")
      rel_value = 1;
    else
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": relevance must be 0 or 1, got " + rel_text);
    if (!qrels.rel[query_id].emplace(doc_id, rel_value).second)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": duplicate judgment for (" + query_id + ", " +
                       doc_id + ")");
  }
  if (qrels.rel.empty()) throw ParseError(path + ": empty qrels file");
  return qrels;
}

std::optional<double> average_precision(
    const std::vector<std::string>& ranked_doc_ids, const Qrels& qrels,
    const std::string& query_id) {
  const int64_t total_relevant = qrels.relevant_count(query_id);
  if (total_relevant == 0) return std::nullopt;

  auto judged = qrels.rel.find(query_id);
  std::set<std::string> seen;
  int64_t hits = 0;
  double precision_sum = 0.0;
  for (size_t i = 0; i < ranked_doc_ids.size(); ++i) {
    const std::string& doc = ranked_doc_ids[i];
    if (!seen.insert(doc).second)
      throw RuntimeFailure("duplicate doc_id in ranking for query " +
                           query_id + ": " + doc);
    auto it = judged->second.find(doc);
    if (it == judged->second.end() || it->second == 0) continue;
    ++hits;
    precision_sum += double(hits) / double(i + 1);
  }
  return precision_sum / double(total_relevant);
}

EvalReport mean_average_precision(const RunFile& run, const Qrels& qrels) {
  // Rebuild per-query rankings; the run may come from a file in any
  // order, so order by the recorded ranks.
  std::vector<std::string> query_order;
  std::map<std::string, std::vector<std::pair<int, std::string>>> by_query;
  for (const auto& e : run.entries) {
    auto [it, inserted] = by_query.try_emplace(e.query_id);
    if (inserted) query_order.push_back(e.query_id);
    it->second.emplace_back(e.rank, e.doc_id);
  }

  EvalReport report;
  double sum = 0.0;
  for (const auto& query_id : query_order) {
    auto& ranked = by_query[query_id];
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> doc_ids;
    doc_ids.reserve(ranked.size());
    for (auto& [rank, doc] : ranked) doc_ids.push_back(std::move(doc));
    auto ap = average_precision(doc_ids, qrels, query_id);
    if (!ap) {
      report.skipped.push_back(query_id);
      continue;
    }
    report.per_query.emplace_back(query_id, *ap);
    sum += *ap;
  }
  if (report.per_query.empty())
    throw RuntimeFailure(
        "no evaluable query: every run query lacks relevant documents in the "
        "qrels");
  report.map = sum / double(report.per_query.size());
  return report;
}

void save_eval_report(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write evaluation report: " + path);
  out << "query_id,ap\n" << std::setprecision(17);
  for (const auto& [query_id, ap] : report.per_query)
    out << query_id << ',' << ap << '\n';
  for (const auto& query_id : report.skipped) out << query_id << ",\n";
  out << "all," << report.map << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b, int comparisons) {
  if (a.size() != b.size())
    throw RuntimeFailure("paired test needs equal-length score vectors, got " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  const size_t n = a.size();
  if (n < 2)
    throw RuntimeFailure("paired test needs at least 2 paired scores");
  if (comparisons < 1) throw ConfigError("comparisons must be at least 1");

  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= double(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / double(n - 1));

  TTestResult result;
  if (sd == 0.0) {
    // Identical differences everywhere: no variance to test against.
    if (mean == 0.0) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = mean > 0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
      result.p = 0.0;
    }
  } else {
    result.t = mean / (sd / std::sqrt(double(n)));
    boost::math::students_t dist(double(n - 1));
    result.p = 2.0 * boost::math::cdf(boost::math::complement(
                         dist, std::abs(result.t)));
  }
  result.p_bonferroni = std::min(1.0, double(comparisons) * result.p);
  return result;
}

std::vector<int64_t> neighborhood_counts(const double* query_rows,
                                         size_t n_query,
                                         const double* target_rows,
                                         size_t n_target, size_t dim, int k) {
  if (k < 1) throw ConfigError("neighborhood size k must be at least 1");
  if (n_query == 0 || n_target == 0)
    throw RuntimeFailure("neighborhood counting over an empty vocabulary");

  std::vector<int64_t> counts(n_target, 0);
  const size_t top = std::min(size_t(k), n_target);
  std::vector<std::pair<double, size_t>> sims(n_target);
  for (size_t x = 0; x < n_query; ++x) {
    const double* q = query_rows + x * dim;
    for (size_t y = 0; y < n_target; ++y)
      sims[y] = {cosine(q, target_rows + y * dim, dim), y};
    std::partial_sort(sims.begin(), sims.begin() + std::ptrdiff_t(top),
                      sims.end(), [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    for (size_t i = 0; i < top; ++i) ++counts[sims[i].second];
  }
  return counts;
}

double skewness(const std::vector<int64_t>& counts) {
  if (counts.size() < 2)
    throw RuntimeFailure("skewness needs at least 2 counts");
  const double n = double(counts.size());
  double mean = 0.0;
  for (int64_t c : counts) mean += double(c);
  mean /= n;
  double m2 = 0.0, m3 = 0.0;
  for (int64_t c : counts) {
    double d = double(c) - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (m2 == 0.0) {
    std::cerr << "warning: skewness of constant counts defined as 0\n";
    return 0.0;
  }
  return m3 / std::pow(m2, 1.5);
}

HubnessReport hubness_report(const ModelParams& params, int k,
                             size_t max_query, size_t max_target) {
  size_t n_query = params.n_query - 1;  // skip <unk>
  size_t n_target = params.n_target - 1;
  if (max_query > 0) n_query = std::min(n_query, max_query);
  if (max_target > 0) n_target = std::min(n_target, max_target);
  // Vocabulary ids are frequency-ordered, so rows 1..n are the n most
  // frequent tokens and sit contiguously after the <unk> row.
  HubnessReport report;
  report.k = k;
  report.counts = neighborhood_counts(params.row(1), n_query,
                                      params.row(params.n_query + 1), n_target,
                                      params.dim, k);
  double mean = 0.0;
  for (int64_t c : report.counts) mean += double(c);
  mean /= double(report.counts.size());
  double m2 = 0.0;
  for (int64_t c : report.counts) {
    double d = double(c) - mean;
    m2 += d * d;
  }
  report.mean = mean;
  report.sigma = std::sqrt(m2 / double(report.counts.size()));
  report.skew = skewness(report.counts);
  return report;
}

namespace {

uint64_t derive_seed(uint64_t seed, uint64_t tag) {
  Rng rng(seed, tag);
  return rng.next();
}

}  // namespace

std::vector<AblationRow> ablation_run(const ParallelCorpus& corpus,
                                      const std::vector<EvalSet>& eval_sets,
                                      const AblationOptions& options) {
  if (eval_sets.empty()) throw ConfigError("no evaluation sets");
  if (!options.pretrained_query)
    throw ConfigError("ablation needs query-side pretrained embeddings");
  if (options.fractions.empty()) throw ConfigError("no fractions to sweep");
  std::vector<double> fractions = options.fractions;
  std::sort(fractions.begin(), fractions.end());
  for (double f : fractions)
    if (!(f > 0.0) || f > 1.0)
      throw ConfigError("ablation fractions must lie in (0, 1]");
  for (const auto& m : options.methods)
    if (m != "seclr" && m != "seclr-rt" && m != "psq")
      throw ConfigError("unknown ablation method: " + m);

  std::vector<AblationRow> rows;
  for (size_t fi = 0; fi < fractions.size(); ++fi) {
    const double fraction = fractions[fi];
    ParallelCorpus sub =
        subsample(corpus, fraction, derive_seed(options.seed, 0x100 + fi));
    CorpusSplits splits =
        split_corpus(sub, derive_seed(options.seed, 0x200 + fi));
    if (splits.validation.pairs.empty())
      throw RuntimeFailure("fraction " + std::to_string(fraction) +
                           " leaves no validation pairs; corpus too small");

    AugmentConfig augment_config = options.augment;
    augment_config.seed = derive_seed(options.seed, 0x300 + fi);
    TrainingSet train_examples =
        build_training_set(splits.train, *options.pretrained_query,
                           augment_config);
    augment_config.seed = derive_seed(options.seed, 0x400 + fi);
    TrainingSet val_examples =
        build_training_set(splits.validation, *options.pretrained_query,
                           augment_config);

    TranslationMatrix alignment = train_ibm1(sub, options.ibm1_iterations);

    for (size_t mi = 0; mi < options.methods.size(); ++mi) {
      const std::string& method = options.methods[mi];
      std::unique_ptr<SentenceScorer> scorer;
      TranslationMatrix a_col;
      ModelParams trained;

      if (method == "seclr" || method == "seclr-rt") {
        ModelParams init = init_model(
            sub.query_vocab, sub.target_vocab, options.dim, options.metric,
            derive_seed(options.seed, 0x500 + fi * 16 + mi),
            options.pretrained_query);
        TrainConfig train_config = options.train_config;
        train_config.seed = derive_seed(options.seed, 0x600 + fi * 16 + mi);
        if (method == "seclr") train_config.lambda2 = 0.0;
        const TranslationMatrix* a =
            method == "seclr-rt" ? &alignment : nullptr;
        trained = train(train_examples.examples, val_examples.examples,
                        std::move(init), a, train_config)
                      .params;
        scorer = std::make_unique<SeclrScorer>(trained);
      } else {
        a_col = column_normalize(alignment);
      }

      for (const auto& set : eval_sets) {
        BackgroundModel background;
        if (method == "psq") {
          background = estimate_background(set.documents, a_col);
          scorer = std::make_unique<PsqScorer>(a_col, background,
                                               options.psq_a0);
        }
        RunFile run =
            rank_collection(set.queries, set.documents, *scorer, method);
        EvalReport report = mean_average_precision(run, set.qrels);
        rows.push_back({fraction, method, set.name, report.map});
      }
    }
  }
  return rows;
}

void save_ablation(const std::string& path,
                   const std::vector<AblationRow>& rows) {
  std::vector<AblationRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const AblationRow& a, const AblationRow& b) {
                     return a.fraction < b.fraction;
                   });
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write ablation table: " + path);
  out << "fraction,method,set,map\n" << std::setprecision(17);
  for (const auto& row : sorted)
    out << row.fraction << ',' << row.method << ',' << row.set_name << ','
        << row.map << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

}  // namespace seclr
