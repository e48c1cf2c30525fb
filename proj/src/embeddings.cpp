#include "seclr/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "seclr/common.hpp"

namespace seclr {

EmbeddingTable::EmbeddingTable(size_t rows, size_t dim)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0), covered_(rows, false) {}

size_t EmbeddingTable::check(TokenId id) const {
  if (id < 0 || size_t(id) >= rows_)
    throw RuntimeFailure("embedding row out of range: " + std::to_string(id));
  return size_t(id);
}

const double* EmbeddingTable::row(TokenId id) const {
  return data_.data() + check(id) * dim_;
}

double* EmbeddingTable::mutable_row(TokenId id) {
  return data_.data() + check(id) * dim_;
}

void EmbeddingTable::set_row(TokenId id, const std::vector<double>& values) {
  if (values.size() != dim_)
    throw RuntimeFailure("embedding dimension mismatch: expected " +
                         std::to_string(dim_) + ", got " +
                         std::to_string(values.size()));
  std::copy(values.begin(), values.end(), mutable_row(id));
}

double EmbeddingTable::coverage() const {
  if (rows_ <= 1) return 0.0;
  size_t hit = 0;
  for (size_t id = 1; id < rows_; ++id)
    if (covered_[id]) ++hit;
  return double(hit) / double(rows_ - 1);
}

void EmbeddingTable::fill_uncovered(uint64_t seed) {
  Rng rng(seed);
  const double half = 0.5 / double(dim_);
  for (size_t id = 1; id < rows_; ++id) {
    if (covered_[id]) continue;
    double* r = data_.data() + id * dim_;
    for (size_t k = 0; k < dim_; ++k) r[k] = rng.uniform(-half, half);
  }
}

EmbeddingTable load_embeddings(const std::string& path,
                               const Vocabulary& vocab, uint64_t fill_seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ParseError(path + ": empty embedding file");
  size_t declared = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> declared >> dim) || dim == 0)
      throw ParseError(path + ": expected 'count dim' header line");
    std::string extra;
    if (header >> extra)
      throw ParseError(path + ": expected 'count dim' header line");
  }

  EmbeddingTable table(vocab.size(), dim);
  size_t line_no = 1;
  size_t matched = 0;
  std::vector<double> values(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    for (size_t k = 0; k < dim; ++k) {
      if (!(fields >> values[k]))
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(dim) + " values for '" + word + "'");
    }
    double extra;
    if (fields >> extra)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": too many values for '" + word + "'");
    TokenId id = vocab.lookup(word);
    if (id == kUnkId) continue;  // word not in this vocabulary
    table.set_row(id, values);
    table.mark_covered(id);
    ++matched;
  }
  (void)declared;  // header count is advisory; rows outside vocab are fine
  if (matched == 0)
    throw ParseError(path + ": no embedding overlaps the vocabulary");

  table.fill_uncovered(fill_seed);
  return table;
}

double cosine(const double* a, const double* b, size_t dim) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t k = 0; k < dim; ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na <= 1e-12 || nb <= 1e-12) return 0.0;
  return dot / (na * nb);
}

}  // namespace seclr
