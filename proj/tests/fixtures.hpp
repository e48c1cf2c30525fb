// Shared synthetic-data builders: the cipher corpus (target language is
// a word-level relabeling of English), its confounded decoy variant,
// random unit-vector embeddings, and an in-memory retrieval set with
// qrels that hold by construction.
#ifndef SECLR_TESTS_FIXTURES_HPP
#define SECLR_TESTS_FIXTURES_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <string>
#include <utility>
#include <vector>

#include "seclr/align.hpp"
#include "seclr/common.hpp"
#include "seclr/corpus.hpp"
#include "seclr/embeddings.hpp"
#include "seclr/eval.hpp"
#include "seclr/retrieval.hpp"

namespace fixtures {

using TokenSides =
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>;

// Scratch directory removed when the fixture goes out of scope.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("seclr_test_" + tag + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string path(const std::string& name) const {
    return (path_ / name).string();
  }
  std::string root() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

struct CipherOptions {
  size_t n_pairs = 2000;
  size_t n_vocab = 200;
  uint64_t seed = 11;
  // Confounder: insert "decoy" into this share of the target sentences
  // containing a translation of a designated word, the n_designated
  // words at frequency ranks [designated_offset, designated_offset + n).
  double decoy_rate = 0.0;
  size_t n_designated = 0;
  size_t designated_offset = 0;
};

// Sentence pairs "e<k> ..." / "c<k> ..." with zipf-ish unigram draws
// (rank-k weight 1/(k+1)) and lengths 4..10, so frequency ranks are
// stable and the target side is a deterministic relabeling.
inline TokenSides cipher_token_pairs(const CipherOptions& opts) {
  seclr::Rng rng(opts.seed);
  std::vector<double> cumulative;
  cumulative.reserve(opts.n_vocab);
  double total = 0.0;
  for (size_t k = 0; k < opts.n_vocab; ++k) {
    total += 1.0 / double(k + 1);
    cumulative.push_back(total);
  }
  TokenSides sides;
  sides.reserve(opts.n_pairs);
  for (size_t i = 0; i < opts.n_pairs; ++i) {
    size_t len = 4 + rng.bounded(7);
    std::vector<std::string> english, target;
    bool designated = false;
    for (size_t j = 0; j < len; ++j) {
      double u = rng.uniform() * total;
      size_t w = size_t(std::lower_bound(cumulative.begin(), cumulative.end(),
                                         u) -
                        cumulative.begin());
      if (w >= opts.n_vocab) w = opts.n_vocab - 1;
      english.push_back("e" + std::to_string(w));
      target.push_back("c" + std::to_string(w));
      if (w >= opts.designated_offset &&
          w < opts.designated_offset + opts.n_designated)
        designated = true;
    }
    if (designated && opts.decoy_rate > 0.0 &&
        rng.uniform() < opts.decoy_rate)
      target.insert(target.begin() + ptrdiff_t(rng.bounded(target.size() + 1)),
                    "decoy");
    sides.emplace_back(std::move(english), std::move(target));
  }
  return sides;
}

inline seclr::ParallelCorpus cipher_corpus(const CipherOptions& opts) {
  return seclr::corpus_from_token_pairs(cipher_token_pairs(opts),
                                        seclr::PreprocessOptions{});
}

inline void write_corpus_tsv(const std::string& path,
                             const TokenSides& sides) {
  std::ofstream out(path);
  for (const auto& [english, target] : sides) {
    for (size_t j = 0; j < english.size(); ++j)
      out << (j ? " " : "") << english[j];
    out << '\t';
    for (size_t j = 0; j < target.size(); ++j)
      out << (j ? " " : "") << target[j];
    out << '\n';
  }
}

// Random unit vectors for every real row; <unk> stays zero. In 32
// dimensions random units are near-orthogonal, which keeps the
// negative-sampling dissimilarity check passable.
inline seclr::EmbeddingTable unit_embeddings(const seclr::Vocabulary& vocab,
                                             size_t dim, uint64_t seed) {
  seclr::EmbeddingTable table(vocab.size(), dim);
  seclr::Rng rng(seed);
  std::vector<double> row(dim);
  for (seclr::TokenId id = 1; size_t(id) < vocab.size(); ++id) {
    double norm = 0.0;
    for (size_t k = 0; k < dim; ++k) {
      double u1 = 1.0 - rng.uniform();  // (0,1]
      double u2 = rng.uniform();
      row[k] = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
      norm += row[k] * row[k];
    }
    norm = std::sqrt(norm);
    for (size_t k = 0; k < dim; ++k) row[k] /= norm;
    table.set_row(id, row);
    table.mark_covered(id);
  }
  return table;
}

// word2vec text format for the rows of an embedding table.
inline void write_embeddings_file(const std::string& path,
                                  const seclr::Vocabulary& vocab,
                                  const seclr::EmbeddingTable& table) {
  std::ofstream out(path);
  out << vocab.size() - 1 << ' ' << table.dim() << '\n';
  out << std::setprecision(17);
  for (seclr::TokenId id = 1; size_t(id) < vocab.size(); ++id) {
    out << vocab.surface(id);
    const double* row = table.row(id);
    for (size_t k = 0; k < table.dim(); ++k) out << ' ' << row[k];
    out << '\n';
  }
}

// Held-out retrieval set: fresh cipher sentences (distinct generator
// seed) grouped into documents, queried by the most frequent English
// words; a document is relevant iff it contains the query's cipher
// translation, so the qrels hold by construction.
struct RetrievalFixture {
  std::vector<seclr::QueryRecord> queries;
  std::vector<seclr::Document> documents;
  seclr::Qrels qrels;
};

inline RetrievalFixture cipher_retrieval(const seclr::ParallelCorpus& corpus,
                                         const CipherOptions& generator,
                                         size_t n_queries, size_t n_docs,
                                         size_t sentences_per_doc,
                                         uint64_t heldout_seed) {
  CipherOptions fresh = generator;
  fresh.n_pairs = n_docs * sentences_per_doc;
  fresh.seed = heldout_seed;
  fresh.decoy_rate = 0.0;
  TokenSides sides = cipher_token_pairs(fresh);

  RetrievalFixture fix;
  for (size_t d = 0; d < n_docs; ++d) {
    seclr::Document doc;
    std::string n = std::to_string(d);
    doc.doc_id = "d" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n;
    for (size_t j = 0; j < sentences_per_doc; ++j) {
      const auto& target = sides[d * sentences_per_doc + j].second;
      std::vector<seclr::TokenId> encoded;
      for (const auto& tok : target)
        encoded.push_back(corpus.target_vocab.lookup(tok));
      doc.sentences.push_back(std::move(encoded));
    }
    fix.documents.push_back(std::move(doc));
  }

  // Vocabulary ids are ordered by descending frequency, so ids
  // 1..n_queries are the most frequent query words.
  for (seclr::TokenId q = 1; size_t(q) <= n_queries; ++q) {
    seclr::QueryRecord record;
    record.query_id = corpus.query_vocab.surface(q);
    record.tokens = {q};
    fix.queries.push_back(record);

    std::string cipher = "c" + corpus.query_vocab.surface(q).substr(1);
    seclr::TokenId ct = corpus.target_vocab.lookup(cipher);
    for (const auto& doc : fix.documents) {
      bool relevant = false;
      if (ct != seclr::kUnkId)
        for (const auto& sentence : doc.sentences)
          if (std::find(sentence.begin(), sentence.end(), ct) !=
              sentence.end()) {
            relevant = true;
            break;
          }
      fix.qrels.rel[record.query_id][doc.doc_id] = relevant ? 1 : 0;
    }
  }
  return fix;
}

// Point-mass oracle alignment: row e<k> -> {c<k>: 1.0}.
inline seclr::TranslationMatrix oracle_cipher_alignment(
    const seclr::Vocabulary& query_vocab,
    const seclr::Vocabulary& target_vocab) {
  seclr::TranslationMatrix::Cells cells;
  for (seclr::TokenId q = 1; size_t(q) < query_vocab.size(); ++q) {
    std::string cipher = "c" + query_vocab.surface(q).substr(1);
    seclr::TokenId ct = target_vocab.lookup(cipher);
    if (ct != seclr::kUnkId) cells[q] = {{ct, 1.0}};
  }
  return seclr::TranslationMatrix(std::move(cells), seclr::Normalization::kRow,
                                  query_vocab.content_hash(),
                                  target_vocab.content_hash());
}

}  // namespace fixtures

#endif  // SECLR_TESTS_FIXTURES_HPP
