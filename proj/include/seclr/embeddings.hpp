#ifndef SECLR_EMBEDDINGS_HPP
#define SECLR_EMBEDDINGS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "seclr/corpus.hpp"

namespace seclr {

// Dense row-major matrix of word vectors aligned to a vocabulary: row
// i belongs to token id i. Rows present in the source file are marked
// covered; the rest (including <unk>) are filled with small uniform
// noise so downstream code never reads an uninitialized vector, but
// coverage-sensitive callers can still tell the difference.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(size_t rows, size_t dim);

  size_t rows() const { return rows_; }
  size_t dim() const { return dim_; }

  const double* row(TokenId id) const;
  double* mutable_row(TokenId id);
  void set_row(TokenId id, const std::vector<double>& values);

  bool covered(TokenId id) const { return covered_[check(id)]; }
  void mark_covered(TokenId id) { covered_[check(id)] = true; }

  // Fraction of real (non-<unk>) rows that came from the file.
  double coverage() const;

  // Uniform fill in [-0.5/dim, 0.5/dim] for every uncovered row except
  // <unk>, which stays zero.
  void fill_uncovered(uint64_t seed);

 private:
  size_t check(TokenId id) const;

  size_t rows_ = 0;
  size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<bool> covered_;
};

// Reads word2vec text format: a "count dim" header line, then one
// "word v1 .. vd" line per vector. Words outside the vocabulary are
// skipped; vocabulary words missing from the file get the random fill
// described above. Dimension conflicts are ParseErrors.
EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary& vocab, uint64_t fill_seed);

// Cosine similarity with a 1e-12 norm guard: an (effectively) zero
// vector on either side yields 0 rather than NaN.
double cosine(const double* a, const double* b, size_t dim);

}  // namespace seclr

#endif  // SECLR_EMBEDDINGS_HPP
