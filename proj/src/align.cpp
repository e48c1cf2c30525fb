#include "seclr/align.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "seclr/common.hpp"

namespace seclr {

const char* normalization_name(Normalization tag) {
  switch (tag) {
    case Normalization::kRaw: return "raw";
    case Normalization::kRow: return "row";
    case Normalization::kColumn: return "column";
  }
  throw RuntimeFailure("unknown normalization tag");
}

Normalization normalization_from_name(const std::string& name) {
  if (name == "raw") return Normalization::kRaw;
  if (name == "row") return Normalization::kRow;
  if (name == "column") return Normalization::kColumn;
  throw ParseError("unknown normalization tag: " + name);
}

namespace {

constexpr double kSumTolerance = 1e-9;

void check_sums(const TranslationMatrix::Cells& cells, Normalization tag) {
  for (const auto& [q, row] : cells)
    for (const auto& [s, v] : row)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw RuntimeFailure("translation probability out of range for (" +
                             std::to_string(q) + "," + std::to_string(s) +
                             "): " + std::to_string(v));
  if (tag == Normalization::kRow) {
    for (const auto& [q, row] : cells) {
      double sum = 0.0;
      for (const auto& [s, v] : row) sum += v;
      if (std::abs(sum - 1.0) > kSumTolerance)
        throw RuntimeFailure("row " + std::to_string(q) +
                             " does not sum to 1: " + std::to_string(sum));
    }
  } else if (tag == Normalization::kColumn) {
    std::map<TokenId, double> col_sums;
    for (const auto& [q, row] : cells)
      for (const auto& [s, v] : row) col_sums[s] += v;
    for (const auto& [s, sum] : col_sums)
      if (std::abs(sum - 1.0) > kSumTolerance)
        throw RuntimeFailure("column " + std::to_string(s) +
                             " does not sum to 1: " + std::to_string(sum));
  }
}

}  // namespace

TranslationMatrix::TranslationMatrix(Cells cells, Normalization tag,
                                     uint64_t query_vocab_hash,
                                     uint64_t target_vocab_hash)
    : cells_(std::move(cells)),
      tag_(tag),
      query_vocab_hash_(query_vocab_hash),
      target_vocab_hash_(target_vocab_hash) {
  check_sums(cells_, tag_);
}

const TranslationMatrix::Row* TranslationMatrix::row(TokenId q) const {
  auto it = cells_.find(q);
  return it == cells_.end() ? nullptr : &it->second;
}

double TranslationMatrix::prob(TokenId q, TokenId s) const {
  const Row* r = row(q);
  if (!r) return 0.0;
  auto it = r->find(s);
  return it == r->end() ? 0.0 : it->second;
}

size_t TranslationMatrix::entry_count() const {
  size_t n = 0;
  for (const auto& [q, row] : cells_) n += row.size();
  return n;
}

void TranslationMatrix::save(const std::string& path,
                             const Vocabulary& query_vocab,
                             const Vocabulary& target_vocab) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write matrix file: " + path);
  out << "# normalization=" << normalization_name(tag_) << '\n';
  out << std::setprecision(17);
  for (const auto& [q, row] : cells_)
    for (const auto& [s, v] : row)
      out << query_vocab.surface(q) << '\t' << target_vocab.surface(s) << '\t'
          << v << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

TranslationMatrix TranslationMatrix::load(const std::string& path,
                                          const Vocabulary& query_vocab,
                                          const Vocabulary& target_vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path + ": empty matrix file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string prefix = "# normalization=";
  if (line.rfind(prefix, 0) != 0)
    throw ParseError(path + ": missing normalization header");
  Normalization tag = normalization_from_name(line.substr(prefix.size()));

  Cells cells;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string q_surface, s_surface, prob_text;
    if (!std::getline(fields, q_surface, '\t') ||
        !std::getline(fields, s_surface, '\t') ||
        !std::getline(fields, prob_text))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 3 tab-separated fields");
    TokenId q = query_vocab.lookup(q_surface);
    TokenId s = target_vocab.lookup(s_surface);
    if ((q == kUnkId && q_surface != kUnkSurface) ||
        (s == kUnkId && s_surface != kUnkSurface))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": surface not in vocabulary: " +
                       (q == kUnkId ? q_surface : s_surface));
    double v = 0.0;
    try {
      v = std::stod(prob_text);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": bad probability field");
    }
    if (!cells[q].emplace(s, v).second)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": duplicate entry for (" + q_surface + ", " +
                       s_surface + ")");
  }
  return TranslationMatrix(std::move(cells), tag, query_vocab.content_hash(),
                           target_vocab.content_hash());
}

TranslationMatrix train_ibm1(const ParallelCorpus& corpus, int iterations,
                             std::vector<double>* ll_trace) {
  if (iterations < 1)
    throw ConfigError("alignment needs at least 1 EM iteration, got " +
                      std::to_string(iterations));
  if (corpus.pairs.empty())
    throw RuntimeFailure("cannot align an empty corpus");

  // t(s|q), initialized uniform over each query word's co-occurring
  // target words.
  TranslationMatrix::Cells t;
  for (const auto& pair : corpus.pairs)
    for (TokenId q : pair.english) {
      auto& row = t[q];
      for (TokenId s : pair.target) row.emplace(s, 0.0);
    }
  for (auto& [q, row] : t) {
    const double u = 1.0 / double(row.size());
    for (auto& [s, v] : row) v = u;
  }

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < iterations; ++iter) {
    TranslationMatrix::Cells counts;
    double ll = 0.0;
    for (const auto& pair : corpus.pairs) {
      for (TokenId s : pair.target) {
        // E-step: posterior over the query positions that may have
        // produced s; duplicates contribute once per position.
        double denom = 0.0;
        for (TokenId q : pair.english) denom += t.find(q)->second.find(s)->second;
        ll += std::log(denom / double(pair.english.size()));
        for (TokenId q : pair.english) {
          double v = t.find(q)->second.find(s)->second;
          counts[q][s] += v / denom;
        }
      }
    }
    if (ll < prev_ll - kSumTolerance)
      throw RuntimeFailure("EM log-likelihood decreased at iteration " +
                           std::to_string(iter) + ": " +
                           std::to_string(prev_ll) + " -> " +
                           std::to_string(ll));
    prev_ll = ll;
    if (ll_trace) ll_trace->push_back(ll);

    // M-step: row-normalize the expected counts.
    for (auto& [q, row] : counts) {
      double sum = 0.0;
      for (const auto& [s, v] : row) sum += v;
      for (auto& [s, v] : row) v /= sum;
    }
    t = std::move(counts);
  }
  return TranslationMatrix(std::move(t), Normalization::kRow,
                           corpus.query_vocab.content_hash(),
                           corpus.target_vocab.content_hash());
}

TranslationMatrix merge_matrices(const std::vector<TranslationMatrix>& tables,
                                 const std::vector<double>& weights) {
  if (tables.empty()) throw ConfigError("nothing to merge");
  if (tables.size() != weights.size())
    throw ConfigError("got " + std::to_string(tables.size()) +
                      " matrices but " + std::to_string(weights.size()) +
                      " weights");
  double weight_sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("merge weights must be nonnegative");
    weight_sum += w;
  }
  if (weight_sum <= 0.0) throw ConfigError("merge weights are all zero");

  uint64_t qhash = 0, thash = 0;
  for (const auto& table : tables) {
    if (table.tag() != Normalization::kRow)
      throw ConfigError("merge expects row-normalized matrices");
    if (table.query_vocab_hash() != 0) {
      if (qhash != 0 && qhash != table.query_vocab_hash())
        throw ConfigError("merging matrices over different query vocabularies");
      qhash = table.query_vocab_hash();
    }
    if (table.target_vocab_hash() != 0) {
      if (thash != 0 && thash != table.target_vocab_hash())
        throw ConfigError("merging matrices over different target vocabularies");
      thash = table.target_vocab_hash();
    }
  }

  TranslationMatrix::Cells merged;
  for (size_t i = 0; i < tables.size(); ++i) {
    if (weights[i] == 0.0) continue;
    for (const auto& [q, row] : tables[i].rows())
      for (const auto& [s, v] : row) merged[q][s] += weights[i] * v;
  }
  for (auto& [q, row] : merged) {
    double sum = 0.0;
    for (const auto& [s, v] : row) sum += v;
    for (auto& [s, v] : row) v /= sum;
  }
  return TranslationMatrix(std::move(merged), Normalization::kRow, qhash,
                           thash);
}

TranslationMatrix column_normalize(const TranslationMatrix& table) {
  std::map<TokenId, double> col_sums;
  for (const auto& [q, row] : table.rows())
    for (const auto& [s, v] : row) col_sums[s] += v;

  int64_t dropped = 0;
  TranslationMatrix::Cells cells;
  for (const auto& [q, row] : table.rows())
    for (const auto& [s, v] : row) {
      if (col_sums[s] <= 0.0) {
        ++dropped;
        continue;
      }
      cells[q][s] = v / col_sums[s];
    }
  if (dropped > 0)
    std::cerr << "warning: dropped " << dropped
              << " entries in zero-mass columns during column normalization\n";
  return TranslationMatrix(std::move(cells), Normalization::kColumn,
                           table.query_vocab_hash(),
                           table.target_vocab_hash());
}

TranslationMatrix load_lexicon(const std::string& path,
                               const Vocabulary& query_vocab,
                               const Vocabulary& target_vocab,
                               int64_t* dropped) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open lexicon file: " + path);

  TranslationMatrix::Cells cells;
  int64_t oov = 0;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string q_surface, s_surface, weight_text;
    if (!std::getline(fields, q_surface, '\t') ||
        !std::getline(fields, s_surface, '\t') ||
        !std::getline(fields, weight_text))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 3 tab-separated fields");
    double w = 0.0;
    try {
      w = std::stod(weight_text);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": bad weight field");
    }
    if (!(w > 0.0))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": lexicon weight must be positive, got " + weight_text);
    TokenId q = query_vocab.lookup(q_surface);
    TokenId s = target_vocab.lookup(s_surface);
    if ((q == kUnkId && q_surface != kUnkSurface) ||
        (s == kUnkId && s_surface != kUnkSurface)) {
      ++oov;
      continue;
    }
    cells[q][s] += w;
  }
  if (cells.empty())
    throw ParseError(path + ": no in-vocabulary lexicon entries");
  if (oov > 0)
    std::cerr << "warning: skipped " << oov
              << " out-of-vocabulary lexicon entries\n";
  if (dropped) *dropped = oov;

  for (auto& [q, row] : cells) {
    double sum = 0.0;
    for (const auto& [s, v] : row) sum += v;
    for (auto& [s, v] : row) v /= sum;
  }
  return TranslationMatrix(std::move(cells), Normalization::kRow,
                           query_vocab.content_hash(),
                           target_vocab.content_hash());
}

std::optional<RationaleDistribution> rationale_distribution(
    TokenId q, const std::vector<TokenId>& sentence,
    const TranslationMatrix& table) {
  if (table.tag() != Normalization::kRow)
    throw RuntimeFailure("rationale distribution needs a row-normalized matrix");
  const TranslationMatrix::Row* row = table.row(q);
  if (!row) return std::nullopt;

  RationaleDistribution rho;
  rho.mass.assign(sentence.size(), 0.0);
  double sum = 0.0;
  for (size_t i = 0; i < sentence.size(); ++i) {
    auto it = row->find(sentence[i]);
    if (it == row->end()) continue;
    rho.mass[i] = it->second;
    sum += it->second;
  }
  if (sum <= 0.0) return std::nullopt;
  for (double& m : rho.mass) m /= sum;
  return rho;
}

}  // namespace seclr
