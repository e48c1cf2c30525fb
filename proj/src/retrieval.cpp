#include "seclr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "seclr/common.hpp"

namespace seclr {

std::vector<Document> load_documents(const std::string& path,
                                     const StopwordSet& stopwords,
                                     const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open document file: " + path);
  std::vector<Document> docs;
  std::set<std::string> seen_ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("doc_id") ||
        !record.contains("sentences") || !record["doc_id"].is_string() ||
        !record["sentences"].is_array())
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected {\"doc_id\": string, \"sentences\": array}");

    Document doc;
    doc.doc_id = record["doc_id"].get<std::string>();
    if (doc.doc_id.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": empty doc_id");
    if (!seen_ids.insert(doc.doc_id).second)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": duplicate doc_id " + doc.doc_id);
    for (const auto& raw : record["sentences"]) {
      if (!raw.is_string())
        throw ParseError(path + ":" + std::to_string(line_no) +
                         ": sentences must be strings");
      std::vector<std::string> tokens;
      try {
        tokens = normalize_text(raw.get<std::string>(), stopwords);
      } catch (const ParseError& e) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " +
                         e.what());
      }
      if (tokens.empty()) continue;
      std::vector<TokenId> ids;
      ids.reserve(tokens.size());
      for (const auto& tok : tokens) ids.push_back(vocab.lookup(tok));
      doc.sentences.push_back(std::move(ids));
    }
    // Nothing scorable survived; keep the document rankable anyway.
    if (doc.sentences.empty()) doc.sentences.emplace_back();
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw ParseError(path + ": no documents");
  return docs;
}

std::vector<QueryRecord> load_queries(const std::string& path,
                                      const StopwordSet& stopwords,
                                      const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open query file: " + path);
  std::vector<QueryRecord> queries;
  std::set<std::string> seen_ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 2 tab-separated fields");
    QueryRecord query;
    query.query_id = line.substr(0, tab);
    if (query.query_id.empty())
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": empty query_id");
    if (!seen_ids.insert(query.query_id).second)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": duplicate query_id " + query.query_id);
    std::vector<std::string> tokens;
    try {
      tokens = normalize_text(std::string_view(line).substr(tab + 1),
                              stopwords);
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (tokens.empty())
      throw ParseError(path + ":" + std::to_string(line_no) + ": query " +
                       query.query_id + " is empty after preprocessing");
    for (const auto& tok : tokens) query.tokens.push_back(vocab.lookup(tok));
    queries.push_back(std::move(query));
  }
  if (queries.empty()) throw ParseError(path + ": no queries");
  return queries;
}

double SeclrScorer::score(const std::vector<TokenId>& query,
                          const std::vector<TokenId>& sentence) const {
  return relevance_prob(logit_query(query, sentence, *params_));
}

namespace {

bool oov(const EmbeddingTable& table, TokenId id) {
  return id == kUnkId || !table.covered(id);
}

}  // namespace

double cosine_min_max_score(const std::vector<TokenId>& query,
                            const std::vector<TokenId>& sentence,
                            const EmbeddingTable& query_embeddings,
                            const EmbeddingTable& target_embeddings) {
  if (query.empty()) throw RuntimeFailure("cannot score an empty query");
  double min_score = 1.0;
  for (TokenId q : query) {
    double best = -1.0;
    if (!oov(query_embeddings, q)) {
      for (TokenId s : sentence) {
        if (oov(target_embeddings, s)) continue;
        best = std::max(best, cosine(query_embeddings.row(q),
                                     target_embeddings.row(s),
                                     query_embeddings.dim()));
      }
    }
    min_score = std::min(min_score, best);
  }
  return min_score;
}

double CosineScorer::score(const std::vector<TokenId>& query,
                           const std::vector<TokenId>& sentence) const {
  return cosine_min_max_score(query, sentence, *query_, *target_);
}

double background_prob(const BackgroundModel& background, TokenId q) {
  auto it = background.find(q);
  return it == background.end() ? 1e-10 : it->second;
}

double psq_expected_tf(TokenId q, const std::vector<TokenId>& sentence,
                       const TranslationMatrix& a_col) {
  double tf = 0.0;
  for (TokenId s : sentence) tf += a_col.prob(q, s);
  return tf;
}

double psq_sentence_prob(const std::vector<TokenId>& query,
                         const std::vector<TokenId>& sentence,
                         const TranslationMatrix& a_col,
                         const BackgroundModel& background, double a0) {
  if (!(a0 > 0.0) || !(a0 < 1.0))
    throw ConfigError("PSQ mixture weight a0 must lie in (0, 1), got " +
                      std::to_string(a0));
  if (query.empty()) throw RuntimeFailure("cannot score an empty query");
  double log_prob = 0.0;
  for (TokenId q : query) {
    double tf_part = sentence.empty()
                         ? 0.0
                         : psq_expected_tf(q, sentence, a_col) /
                               double(sentence.size());
    log_prob += std::log(a0 * tf_part + (1.0 - a0) * background_prob(background, q));
  }
  return log_prob;
}

BackgroundModel estimate_background(
    const std::vector<std::vector<TokenId>>& sentences,
    const TranslationMatrix& a_col) {
  if (sentences.empty())
    throw RuntimeFailure("cannot estimate a background model from nothing");
  // Invert the matrix once so each sentence position is a cheap merge.
  std::map<TokenId, std::vector<std::pair<TokenId, double>>> by_target;
  for (const auto& [q, row] : a_col.rows())
    for (const auto& [s, v] : row) by_target[s].emplace_back(q, v);

  BackgroundModel model;
  for (const auto& sentence : sentences)
    for (TokenId s : sentence) {
      auto it = by_target.find(s);
      if (it == by_target.end()) continue;
      for (const auto& [q, v] : it->second) model[q] += v;
    }
  double total = 0.0;
  for (const auto& [q, v] : model) total += v;
  if (total <= 0.0)
    throw RuntimeFailure(
        "background model has zero mass: no collection token is translatable");
  for (auto& [q, v] : model) v /= total;
  return model;
}

BackgroundModel estimate_background(const ParallelCorpus& corpus,
                                    const TranslationMatrix& a_col) {
  std::vector<std::vector<TokenId>> sentences;
  sentences.reserve(corpus.pairs.size());
  for (const auto& pair : corpus.pairs) sentences.push_back(pair.target);
  return estimate_background(sentences, a_col);
}

BackgroundModel estimate_background(const std::vector<Document>& documents,
                                    const TranslationMatrix& a_col) {
  std::vector<std::vector<TokenId>> sentences;
  for (const auto& doc : documents)
    for (const auto& s : doc.sentences) sentences.push_back(s);
  return estimate_background(sentences, a_col);
}

PsqScorer::PsqScorer(const TranslationMatrix& a_col,
                     const BackgroundModel& background, double a0)
    : a_col_(&a_col), background_(&background), a0_(a0) {
  if (a_col.tag() != Normalization::kColumn)
    throw RuntimeFailure("PSQ needs a column-normalized matrix, got " +
                         std::string(normalization_name(a_col.tag())));
  if (!(a0 > 0.0) || !(a0 < 1.0))
    throw ConfigError("PSQ mixture weight a0 must lie in (0, 1), got " +
                      std::to_string(a0));
}

double PsqScorer::score(const std::vector<TokenId>& query,
                        const std::vector<TokenId>& sentence) const {
  return psq_sentence_prob(query, sentence, *a_col_, *background_, a0_);
}

double score_document(const QueryRecord& query, const Document& document,
                      const SentenceScorer& scorer) {
  if (document.sentences.empty())
    throw RuntimeFailure("document " + document.doc_id + " has no sentences");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& sentence : document.sentences)
    best = std::max(best, scorer.score(query.tokens, sentence));
  return best;
}

RunFile rank_collection(const std::vector<QueryRecord>& queries,
                        const std::vector<Document>& documents,
                        const SentenceScorer& scorer,
                        const std::string& run_tag) {
  if (queries.empty()) throw RuntimeFailure("no queries to rank");
  if (documents.empty()) throw RuntimeFailure("no documents to rank");
  RunFile run;
  run.run_tag = run_tag;
  run.entries.reserve(queries.size() * documents.size());
  std::vector<std::pair<double, const Document*>> scored(documents.size());
  for (const auto& query : queries) {
    for (size_t i = 0; i < documents.size(); ++i)
      scored[i] = {score_document(query, documents[i], scorer), &documents[i]};
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second->doc_id < b.second->doc_id;
              });
    for (size_t i = 0; i < scored.size(); ++i) {
      RunEntry entry;
      entry.query_id = query.query_id;
      entry.doc_id = scored[i].second->doc_id;
      entry.rank = int(i + 1);
      entry.score = scored[i].first;
      run.entries.push_back(std::move(entry));
    }
  }
  return run;
}

void save_run(const std::string& path, const RunFile& run) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write run file: " + path);
  out << std::setprecision(17);
  for (const auto& e : run.entries)
    out << e.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << e.score
        << ' ' << run.run_tag << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

RunFile load_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run file: " + path);
  RunFile run;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    RunEntry entry;
    std::string q0, tag;
    if (!(fields >> entry.query_id >> q0 >> entry.doc_id >> entry.rank >>
          entry.score >> tag) ||
        q0 != "Q0")
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": malformed run line");
    run.run_tag = tag;
    run.entries.push_back(std::move(entry));
  }
  if (run.entries.empty()) throw ParseError(path + ": empty run file");
  return run;
}

}  // namespace seclr
