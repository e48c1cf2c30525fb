#include "seclr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "seclr/common.hpp"

namespace seclr {

Vocabulary::Vocabulary(std::string lang_tag) : lang_(std::move(lang_tag)) {
  surfaces_.push_back(kUnkSurface);
  freqs_.push_back(0);
  index_.emplace(kUnkSurface, kUnkId);
}

TokenId Vocabulary::add(const std::string& surface, int64_t frequency) {
  auto [it, inserted] = index_.emplace(surface, TokenId(surfaces_.size()));
  if (!inserted)
    throw RuntimeFailure("duplicate vocabulary surface: " + surface);
  surfaces_.push_back(surface);
  freqs_.push_back(frequency);
  return it->second;
}

TokenId Vocabulary::lookup(const std::string& surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& surface) const {
  return index_.count(surface) != 0;
}

const std::string& Vocabulary::surface(TokenId id) const {
  if (id < 0 || size_t(id) >= surfaces_.size())
    throw RuntimeFailure("token id out of range: " + std::to_string(id));
  return surfaces_[id];
}

int64_t Vocabulary::frequency(TokenId id) const {
  if (id < 0 || size_t(id) >= freqs_.size())
    throw RuntimeFailure("token id out of range: " + std::to_string(id));
  return freqs_[id];
}

uint64_t Vocabulary::content_hash() const {
  uint64_t h = fnv1a64(lang_);
  for (const auto& s : surfaces_) {
    h = fnv1a64(s, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write vocabulary file: " + path);
  for (size_t id = 0; id < surfaces_.size(); ++id)
    out << surfaces_[id] << '\t' << freqs_[id] << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path, std::string lang_tag) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file: " + path);
  Vocabulary vocab(std::move(lang_tag));
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
    std::string surface = line.substr(0, tab);
    int64_t freq = 0;
    try {
      freq = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": bad frequency field");
    }
    if (line_no == 1) {
      if (surface != kUnkSurface)
        throw ParseError(path + ": first entry must be " +
                         std::string(kUnkSurface));
      vocab.freqs_[kUnkId] = freq;
      continue;
    }
    vocab.add(surface, freq);
  }
  if (vocab.size() <= 1)
    throw ParseError(path + ": vocabulary file has no entries");
  return vocab;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& streams,
                            std::string lang_tag, int64_t min_count,
                            size_t max_size) {
  // std::map keeps candidate iteration deterministic before sorting.
  std::map<std::string, int64_t> counts;
  for (const auto& stream : streams)
    for (const auto& tok : stream) ++counts[tok];

  std::vector<std::pair<std::string, int64_t>> kept;
  int64_t filtered_tokens = 0;
  for (const auto& [surface, count] : counts) {
    if (count >= min_count)
      kept.emplace_back(surface, count);
    else
      filtered_tokens += count;
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > max_size) {
    for (size_t i = max_size; i < kept.size(); ++i)
      filtered_tokens += kept[i].second;
    kept.resize(max_size);
  }
  if (kept.empty())
    throw RuntimeFailure("no tokens survive vocabulary construction (" +
                         lang_tag + ")");

  Vocabulary vocab(std::move(lang_tag));
  for (const auto& [surface, count] : kept) vocab.add(surface, count);
  // Tokens squeezed out by min_count/max_size will encode as <unk>;
  // record how much mass that is.
  vocab.set_unk_frequency(filtered_tokens);
  return vocab;
}

ParallelCorpus corpus_from_token_pairs(
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
        sides,
    const PreprocessOptions& opts) {
  ParallelCorpus corpus;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      survivors;
  survivors.reserve(sides.size());
  for (auto& [en, tgt] : sides) {
    if (en.empty() || tgt.empty()) {
      ++corpus.dropped_pairs;
      continue;
    }
    survivors.emplace_back(std::move(en), std::move(tgt));
  }
  if (survivors.empty())
    throw RuntimeFailure("no sentence pairs survive preprocessing");

  std::vector<std::vector<std::string>> en_streams, tgt_streams;
  en_streams.reserve(survivors.size());
  tgt_streams.reserve(survivors.size());
  for (const auto& [en, tgt] : survivors) {
    en_streams.push_back(en);
    tgt_streams.push_back(tgt);
  }
  corpus.query_vocab = build_vocabulary(en_streams, opts.query_lang,
                                        opts.vocab_min_count,
                                        opts.vocab_max_size);
  corpus.target_vocab = build_vocabulary(tgt_streams, opts.target_lang,
                                         opts.vocab_min_count,
                                         opts.vocab_max_size);

  corpus.pairs.reserve(survivors.size());
  for (size_t i = 0; i < survivors.size(); ++i) {
    SentencePair pair;
    pair.pair_id = int32_t(i);
    for (const auto& tok : survivors[i].first)
      pair.english.push_back(corpus.query_vocab.lookup(tok));
    for (const auto& tok : survivors[i].second)
      pair.target.push_back(corpus.target_vocab.lookup(tok));
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

ParallelCorpus load_parallel(const std::string& path,
                             const PreprocessOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path);

  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      sides;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected 2 tab-separated fields");
    try {
      sides.emplace_back(
          normalize_text(std::string_view(line).substr(0, tab),
                         opts.query_stopwords),
          normalize_text(std::string_view(line).substr(tab + 1),
                         opts.target_stopwords));
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw ParseError(path + ": empty corpus file");

  ParallelCorpus corpus = corpus_from_token_pairs(std::move(sides), opts);
  if (corpus.dropped_pairs > 0)
    std::cerr << "warning: dropped " << corpus.dropped_pairs
              << " pairs with an empty side after preprocessing\n";
  return corpus;
}

namespace {

// Fisher-Yates with our own generator so the permutation is identical
// across platforms and standard libraries.
std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.bounded(i)]);
  return idx;
}

ParallelCorpus take(const ParallelCorpus& corpus,
                    const std::vector<size_t>& idx, size_t begin, size_t end) {
  ParallelCorpus out;
  out.query_vocab = corpus.query_vocab;
  out.target_vocab = corpus.target_vocab;
  std::vector<size_t> chosen(idx.begin() + begin, idx.begin() + end);
  std::sort(chosen.begin(), chosen.end());
  out.pairs.reserve(chosen.size());
  for (size_t i : chosen) out.pairs.push_back(corpus.pairs[i]);
  return out;
}

}  // namespace

CorpusSplits split_corpus(const ParallelCorpus& corpus, uint64_t seed) {
  const size_t n = corpus.pairs.size();
  if (n < 100)
    std::cerr << "warning: splitting a corpus of only " << n
              << " pairs; validation/test portions may be empty\n";

  size_t n_train = size_t(std::llround(0.96 * double(n)));
  size_t n_val = size_t(std::llround(0.03 * double(n)));
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  Rng rng(seed);
  std::vector<size_t> idx = shuffled_indices(n, rng);
  CorpusSplits splits;
  splits.seed = seed;
  splits.train = take(corpus, idx, 0, n_train);
  splits.validation = take(corpus, idx, n_train, n_train + n_val);
  splits.test = take(corpus, idx, n_train + n_val, n);
  return splits;
}

ParallelCorpus subsample(const ParallelCorpus& corpus, double fraction,
                         uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ConfigError("subsample fraction must be in (0, 1], got " +
                      std::to_string(fraction));
  const size_t n = corpus.pairs.size();
  const size_t k = size_t(std::llround(fraction * double(n)));
  if (k == 0)
    throw RuntimeFailure("subsample of " + std::to_string(n) +
                         " pairs at fraction " + std::to_string(fraction) +
                         " selects nothing");
  Rng rng(seed);
  std::vector<size_t> idx = shuffled_indices(n, rng);
  return take(corpus, idx, 0, k);
}

}  // namespace seclr
