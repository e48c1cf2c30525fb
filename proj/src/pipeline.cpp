#include "seclr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "seclr/align.hpp"
#include "seclr/augment.hpp"
#include "seclr/common.hpp"
#include "seclr/corpus.hpp"
#include "seclr/embeddings.hpp"
#include "seclr/eval.hpp"
#include "seclr/model.hpp"
#include "seclr/retrieval.hpp"
#include "seclr/text.hpp"

namespace seclr {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  KeyValueConfig config;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = trim(stripped.substr(0, eq));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    config.values_[key] = trim(stripped.substr(eq + 1));
  }
  return config;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool KeyValueConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KeyValueConfig::required(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty())
    throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

int64_t KeyValueConfig::get_int(const std::string& key,
                                int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" +
                      it->second + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key,
                                  double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      it->second + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v +
                    "'");
}

std::vector<double> KeyValueConfig::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::istringstream fields(it->second);
  std::string field;
  while (std::getline(fields, field, ',')) {
    field = trim(field);
    if (field.empty()) continue;
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected numbers, got '" +
                        field + "'");
    }
  }
  if (out.empty())
    throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(
    const std::string& key, const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  std::istringstream fields(it->second);
  std::string field;
  while (std::getline(fields, field, ',')) {
    field = trim(field);
    if (!field.empty()) out.push_back(field);
  }
  if (out.empty())
    throw ConfigError("config key '" + key + "': empty list");
  return out;
}

uint64_t KeyValueConfig::content_hash() const {
  uint64_t h = kFnvBasis;
  for (const auto& [k, v] : values_) {
    h = fnv1a64(k, h);
    h = fnv1a64("=", h);
    h = fnv1a64(v, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void KeyValueConfig::dump(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write config dump: " + path);
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

namespace {

// ---------------------------------------------------------------
// Shared stage plumbing
// ---------------------------------------------------------------

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_file(const std::string& key, const std::string& path) {
  if (!fs::is_regular_file(path))
    throw ConfigError("config key '" + key + "': file not found: " + path);
}

uint64_t seed_for(const KeyValueConfig& config, const std::string& label) {
  Rng rng(config.get_seed(), fnv1a64(label));
  return rng.next();
}

// Collects written artifacts, then records the stage in the manifest.
class StageRecorder {
 public:
  StageRecorder(const KeyValueConfig& config, std::string stage)
      : config_(&config),
        stage_(std::move(stage)),
        out_dir_(config.get_string("out_dir", "out")),
        start_(std::chrono::steady_clock::now()) {}

  const std::string& out_dir() const { return out_dir_; }

  std::string path(const std::string& name) {
    return join(out_dir_, name);
  }

  void created_output_dir() { fs::create_directories(out_dir_); }

  void add_output(const std::string& name) { outputs_.push_back(name); }

  void finish() {
    // Effective configuration next to the artifacts it produced. Not
    // checksummed: it embeds out_dir, which would make byte-identical
    // data runs into different directories look nonreproducible.
    std::string config_name = stage_;
    std::replace(config_name.begin(), config_name.end(), ':', '_');
    config_name += ".config";
    config_->dump(path(config_name));

    nlohmann::json checksums = nlohmann::json::object();
    for (const auto& name : outputs_)
      checksums[name] = hex64(hash_file(path(name)));

    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start_)
                       .count();
    nlohmann::json entry = {{"stage", stage_},
                            {"config_hash", hex64(config_->content_hash())},
                            {"duration_ms", elapsed},
                            {"outputs", checksums}};

    const std::string manifest_path = path("manifest.json");
    nlohmann::json manifest;
    if (fs::exists(manifest_path)) {
      std::ifstream in(manifest_path);
      try {
        in >> manifest;
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path + ": " + e.what());
      }
    }
    manifest["tool_version"] = kVersion;
    if (!manifest.contains("stages") || !manifest["stages"].is_array())
      manifest["stages"] = nlohmann::json::array();
    bool replaced = false;
    for (auto& existing : manifest["stages"]) {
      if (existing.is_object() && existing.value("stage", "") == stage_) {
        existing = entry;
        replaced = true;
        break;
      }
    }
    if (!replaced) manifest["stages"].push_back(entry);

    std::ofstream out(manifest_path);
    if (!out) throw RuntimeFailure("cannot write manifest: " + manifest_path);
    out << manifest.dump(2) << '\n';
  }

 private:
  const KeyValueConfig* config_;
  std::string stage_;
  std::string out_dir_;
  std::vector<std::string> outputs_;
  std::chrono::steady_clock::time_point start_;
};

PreprocessOptions preprocess_options(const KeyValueConfig& config) {
  PreprocessOptions opts;
  std::string qs = config.get_string("query_stopwords", "");
  std::string ts = config.get_string("target_stopwords", "");
  if (!qs.empty()) require_file("query_stopwords", qs);
  if (!ts.empty()) require_file("target_stopwords", ts);
  opts.query_stopwords = load_stopwords(qs);
  opts.target_stopwords = load_stopwords(ts);
  opts.vocab_min_count = config.get_int("vocab_min_count", 1);
  if (opts.vocab_min_count < 1)
    throw ConfigError("vocab_min_count must be at least 1");
  int64_t max_size = config.get_int("vocab_max_size", 0);
  if (max_size < 0) throw ConfigError("vocab_max_size must be nonnegative");
  if (max_size > 0) opts.vocab_max_size = size_t(max_size);
  return opts;
}

AugmentConfig augment_config(const KeyValueConfig& config) {
  AugmentConfig acfg;
  acfg.lambda1 = config.get_double("lambda1", 0.4);
  acfg.negatives_per_positive = int(config.get_int("negatives_per_positive", 1));
  acfg.max_resample_tries = int(config.get_int("max_resample_tries", 100));
  acfg.dedupe_queries = config.get_bool("dedupe_queries", true);
  acfg.seed = config.get_seed();
  if (acfg.lambda1 < -1.0 || acfg.lambda1 > 1.0)
    throw ConfigError("lambda1 must lie in [-1, 1]");
  if (acfg.negatives_per_positive < 1)
    throw ConfigError("negatives_per_positive must be at least 1");
  if (acfg.max_resample_tries < 1)
    throw ConfigError("max_resample_tries must be at least 1");
  return acfg;
}

nlohmann::json stats_json(const AugmentStats& stats) {
  return {{"positives", stats.positives},
          {"negatives", stats.negatives},
          {"skipped_negatives", stats.skipped_negatives},
          {"unk_queries_skipped", stats.unk_queries_skipped},
          {"zero_norm_warnings", stats.zero_norm_warnings}};
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

}  // namespace

void cmd_augment(const KeyValueConfig& config) {
  const std::string corpus_path = config.required("corpus");
  require_file("corpus", corpus_path);
  const std::string embeddings_path = config.required("embeddings");
  require_file("embeddings", embeddings_path);
  PreprocessOptions popts = preprocess_options(config);
  AugmentConfig acfg = augment_config(config);
  StageRecorder stage(config, "augment");

  ParallelCorpus corpus = load_parallel(corpus_path, popts);
  CorpusSplits splits = split_corpus(corpus, seed_for(config, "split"));
  if (splits.validation.pairs.empty())
    throw RuntimeFailure(
        "corpus too small: the validation split is empty (need roughly 20+ "
        "pairs)");
  EmbeddingTable embeddings = load_embeddings(
      embeddings_path, corpus.query_vocab, seed_for(config, "embedding_fill"));
  if (embeddings.coverage() < 0.5)
    std::cerr << "warning: pretrained embeddings cover only "
              << embeddings.coverage() * 100 << "% of the query vocabulary\n";

  TrainingSet train_set = build_training_set(splits.train, embeddings, acfg);
  TrainingSet val_set =
      build_training_set(splits.validation, embeddings, acfg);
  bool have_test = !splits.test.pairs.empty();
  TrainingSet test_set;
  if (have_test) test_set = build_training_set(splits.test, embeddings, acfg);

  stage.created_output_dir();
  corpus.query_vocab.save(stage.path("vocab_query.tsv"));
  stage.add_output("vocab_query.tsv");
  corpus.target_vocab.save(stage.path("vocab_target.tsv"));
  stage.add_output("vocab_target.tsv");
  save_training_set(stage.path("train_set.tsv"), train_set.examples,
                    corpus.query_vocab, corpus.target_vocab);
  stage.add_output("train_set.tsv");
  save_training_set(stage.path("val_set.tsv"), val_set.examples,
                    corpus.query_vocab, corpus.target_vocab);
  stage.add_output("val_set.tsv");
  if (have_test) {
    save_training_set(stage.path("test_set.tsv"), test_set.examples,
                      corpus.query_vocab, corpus.target_vocab);
  } else {
    std::ofstream(stage.path("test_set.tsv")).flush();
  }
  stage.add_output("test_set.tsv");

  nlohmann::json stats = {
      {"pairs", corpus.pairs.size()},
      {"dropped_pairs", corpus.dropped_pairs},
      {"splits",
       {{"train", splits.train.pairs.size()},
        {"validation", splits.validation.pairs.size()},
        {"test", splits.test.pairs.size()}}},
      {"embedding_coverage", train_set.stats.embedding_coverage},
      {"train", stats_json(train_set.stats)},
      {"validation", stats_json(val_set.stats)}};
  if (have_test) stats["test"] = stats_json(test_set.stats);
  write_json(stage.path("augment_stats.json"), stats);
  stage.add_output("augment_stats.json");

  stage.finish();
  std::cout << "augment: " << train_set.stats.positives << "+"
            << train_set.stats.negatives << " train, "
            << val_set.stats.positives << "+" << val_set.stats.negatives
            << " validation examples\n";
}

void cmd_align(const KeyValueConfig& config) {
  const std::string corpus_path = config.required("corpus");
  require_file("corpus", corpus_path);
  const int iterations = int(config.get_int("ibm1_iterations", 10));
  if (iterations < 1)
    throw ConfigError("ibm1_iterations must be at least 1");
  std::vector<std::string> lexicon_paths =
      config.get_strings("lexicons", {});
  for (const auto& p : lexicon_paths) require_file("lexicons", p);
  std::vector<double> weights = config.get_doubles(
      "merge_weights", std::vector<double>(1 + lexicon_paths.size(), 1.0));
  if (weights.size() != 1 + lexicon_paths.size())
    throw ConfigError("merge_weights needs " +
                      std::to_string(1 + lexicon_paths.size()) +
                      " entries (EM matrix first, then each lexicon)");
  PreprocessOptions popts = preprocess_options(config);
  StageRecorder stage(config, "align");

  ParallelCorpus corpus = load_parallel(corpus_path, popts);
  std::vector<double> ll_trace;
  std::vector<TranslationMatrix> tables;
  tables.push_back(train_ibm1(corpus, iterations, &ll_trace));
  int64_t lexicon_dropped = 0;
  for (const auto& p : lexicon_paths) {
    int64_t dropped = 0;
    tables.push_back(
        load_lexicon(p, corpus.query_vocab, corpus.target_vocab, &dropped));
    lexicon_dropped += dropped;
  }
  TranslationMatrix row_matrix =
      tables.size() == 1 ? std::move(tables.front())
                         : merge_matrices(tables, weights);
  TranslationMatrix col_matrix = column_normalize(row_matrix);

  stage.created_output_dir();
  corpus.query_vocab.save(stage.path("vocab_query.tsv"));
  stage.add_output("vocab_query.tsv");
  corpus.target_vocab.save(stage.path("vocab_target.tsv"));
  stage.add_output("vocab_target.tsv");
  row_matrix.save(stage.path("alignment.row.tsv"), corpus.query_vocab,
                  corpus.target_vocab);
  stage.add_output("alignment.row.tsv");
  col_matrix.save(stage.path("alignment.col.tsv"), corpus.query_vocab,
                  corpus.target_vocab);
  stage.add_output("alignment.col.tsv");

  write_json(stage.path("align_stats.json"),
             {{"iterations", iterations},
              {"log_likelihood", ll_trace},
              {"row_entries", row_matrix.entry_count()},
              {"col_entries", col_matrix.entry_count()},
              {"lexicons", lexicon_paths.size()},
              {"lexicon_entries_dropped", lexicon_dropped}});
  stage.add_output("align_stats.json");

  stage.finish();
  std::cout << "align: " << row_matrix.entry_count() << " entries, final EM "
            << "log-likelihood " << ll_trace.back() << "\n";
}

void cmd_train(const KeyValueConfig& config, const std::string& mode) {
  if (mode != "seclr" && mode != "seclr-rt")
    throw ConfigError("unknown training mode: " + mode +
                      " (expected seclr or seclr-rt)");
  const std::string out_dir = config.get_string("out_dir", "out");
  const std::string vocab_query_path =
      config.get_string("vocab_query", join(out_dir, "vocab_query.tsv"));
  const std::string vocab_target_path =
      config.get_string("vocab_target", join(out_dir, "vocab_target.tsv"));
  const std::string train_path =
      config.get_string("train_set", join(out_dir, "train_set.tsv"));
  const std::string val_path =
      config.get_string("val_set", join(out_dir, "val_set.tsv"));
  require_file("vocab_query", vocab_query_path);
  require_file("vocab_target", vocab_target_path);
  require_file("train_set", train_path);
  require_file("val_set", val_path);

  std::string alignment_path;
  if (mode == "seclr-rt") {
    alignment_path =
        config.get_string("alignment", join(out_dir, "alignment.row.tsv"));
    if (!fs::is_regular_file(alignment_path))
      throw ConfigError("seclr-rt needs a row-normalized alignment matrix; "
                        "not found: " +
                        alignment_path);
  } else if (config.has("lambda2")) {
    std::cerr << "warning: lambda2 is ignored in seclr mode (no rationale "
                 "objective)\n";
  }

  TrainConfig tcfg;
  tcfg.learning_rate = config.get_double("learning_rate", 0.001);
  tcfg.lambda2 = mode == "seclr-rt" ? config.get_double("lambda2", 3.0) : 0.0;
  tcfg.max_epochs = int(config.get_int("max_epochs", 20));
  tcfg.patience = int(config.get_int("patience", 3));
  tcfg.seed = seed_for(config, "train");
  if (!(tcfg.learning_rate > 0.0))
    throw ConfigError("learning_rate must be positive");
  if (tcfg.lambda2 < 0.0) throw ConfigError("lambda2 must be nonnegative");
  if (tcfg.max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (tcfg.patience < 1) throw ConfigError("patience must be at least 1");

  const std::string embeddings_path = config.get_string("embeddings", "");
  if (!embeddings_path.empty()) require_file("embeddings", embeddings_path);
  Metric metric = metric_from_name(config.get_string("metric", "dot"));
  StageRecorder stage(config, "train:" + mode);

  Vocabulary query_vocab = Vocabulary::load(vocab_query_path, "query");
  Vocabulary target_vocab = Vocabulary::load(vocab_target_path, "target");
  std::vector<RelevanceExample> train_examples =
      load_training_set(train_path, query_vocab, target_vocab);
  std::vector<RelevanceExample> val_examples =
      load_training_set(val_path, query_vocab, target_vocab);

  std::unique_ptr<EmbeddingTable> pretrained;
  size_t dim = size_t(config.get_int("dim", 32));
  if (!embeddings_path.empty()) {
    pretrained = std::make_unique<EmbeddingTable>(load_embeddings(
        embeddings_path, query_vocab, seed_for(config, "embedding_fill")));
    if (config.has("dim") && pretrained->dim() != dim)
      throw ConfigError("config dim=" + std::to_string(dim) +
                        " conflicts with embedding dimension " +
                        std::to_string(pretrained->dim()));
    dim = pretrained->dim();
  }
  if (dim == 0) throw ConfigError("dim must be positive");

  std::unique_ptr<TranslationMatrix> alignment;
  if (mode == "seclr-rt") {
    alignment = std::make_unique<TranslationMatrix>(
        TranslationMatrix::load(alignment_path, query_vocab, target_vocab));
    if (alignment->tag() != Normalization::kRow)
      throw ConfigError("alignment matrix " + alignment_path +
                        " is not row-normalized");
  }

  ModelParams init =
      init_model(query_vocab, target_vocab, dim, metric,
                 seed_for(config, "model_init"), pretrained.get());
  init.floor_logit = config.get_double("floor_logit", -10.0);
  TrainResult result = train(train_examples, val_examples, std::move(init),
                             alignment.get(), tcfg);

  const std::string model_name =
      config.get_string("model_file", "model_" + mode + ".bin");
  const std::string log_name = "training_log_" + mode + ".csv";
  stage.created_output_dir();
  save_model(stage.path(model_name), result.params);
  stage.add_output(model_name);
  save_training_log(stage.path(log_name), result.log);
  stage.add_output(log_name);
  write_json(stage.path("train_stats_" + mode + ".json"),
             {{"mode", mode},
              {"best_epoch", result.best_epoch},
              {"epochs_run", result.log.size()},
              {"best_val_loss", result.log[size_t(result.best_epoch)].val_loss},
              {"skipped_unk_queries", result.skipped_unk_queries},
              {"dim", dim},
              {"metric", metric_name(metric)}});
  stage.add_output("train_stats_" + mode + ".json");

  stage.finish();
  std::cout << "train:" << mode << ": best epoch " << result.best_epoch
            << ", validation loss "
            << result.log[size_t(result.best_epoch)].val_loss << "\n";
}

void cmd_rank(const KeyValueConfig& config, const std::string& scorer_name) {
  if (scorer_name != "seclr" && scorer_name != "cosine" &&
      scorer_name != "psq")
    throw ConfigError("unknown scorer: " + scorer_name +
                      " (expected seclr, cosine or psq)");
  const std::string out_dir = config.get_string("out_dir", "out");
  const std::string queries_path = config.required("queries");
  require_file("queries", queries_path);
  const std::string documents_path = config.required("documents");
  require_file("documents", documents_path);
  const std::string vocab_query_path =
      config.get_string("vocab_query", join(out_dir, "vocab_query.tsv"));
  const std::string vocab_target_path =
      config.get_string("vocab_target", join(out_dir, "vocab_target.tsv"));
  require_file("vocab_query", vocab_query_path);
  require_file("vocab_target", vocab_target_path);

  std::string model_path, emb_query_path, emb_target_path, a_col_path;
  double a0 = config.get_double("psq_a0", 0.3);
  if (scorer_name == "seclr") {
    model_path = config.required("model");
    require_file("model", model_path);
  } else if (scorer_name == "cosine") {
    emb_query_path = config.required("embeddings");
    require_file("embeddings", emb_query_path);
    emb_target_path = config.required("target_embeddings");
    require_file("target_embeddings", emb_target_path);
  } else {
    a_col_path =
        config.get_string("alignment_col", join(out_dir, "alignment.col.tsv"));
    require_file("alignment_col", a_col_path);
    if (!(a0 > 0.0) || !(a0 < 1.0))
      throw ConfigError("psq_a0 must lie in (0, 1)");
  }

  std::string qs = config.get_string("query_stopwords", "");
  std::string ts = config.get_string("target_stopwords", "");
  if (!qs.empty()) require_file("query_stopwords", qs);
  if (!ts.empty()) require_file("target_stopwords", ts);
  StageRecorder stage(config, "rank:" + scorer_name);

  Vocabulary query_vocab = Vocabulary::load(vocab_query_path, "query");
  Vocabulary target_vocab = Vocabulary::load(vocab_target_path, "target");
  std::vector<QueryRecord> queries =
      load_queries(queries_path, load_stopwords(qs), query_vocab);
  std::vector<Document> documents =
      load_documents(documents_path, load_stopwords(ts), target_vocab);

  // Scorer state must outlive rank_collection.
  ModelParams params;
  EmbeddingTable emb_query, emb_target;
  TranslationMatrix a_col;
  BackgroundModel background;
  std::unique_ptr<SentenceScorer> scorer;
  if (scorer_name == "seclr") {
    params = load_model(model_path);
    if (params.query_vocab_hash != query_vocab.content_hash() ||
        params.target_vocab_hash != target_vocab.content_hash())
      throw ConfigError("model " + model_path +
                        " was trained against different vocabularies");
    scorer = std::make_unique<SeclrScorer>(params);
  } else if (scorer_name == "cosine") {
    emb_query = load_embeddings(emb_query_path, query_vocab,
                                seed_for(config, "embedding_fill_q"));
    emb_target = load_embeddings(emb_target_path, target_vocab,
                                 seed_for(config, "embedding_fill_t"));
    if (emb_query.dim() != emb_target.dim())
      throw ConfigError("query and target embeddings disagree on dimension");
    scorer = std::make_unique<CosineScorer>(emb_query, emb_target);
  } else {
    a_col = TranslationMatrix::load(a_col_path, query_vocab, target_vocab);
    if (a_col.tag() != Normalization::kColumn)
      throw ConfigError("matrix " + a_col_path + " is not column-normalized");
    background = estimate_background(documents, a_col);
    scorer = std::make_unique<PsqScorer>(a_col, background, a0);
  }

  RunFile run = rank_collection(queries, documents, *scorer,
                                config.get_string("run_tag", scorer_name));
  const std::string run_name =
      config.get_string("run_file", "run_" + scorer_name + ".trec");
  stage.created_output_dir();
  save_run(stage.path(run_name), run);
  stage.add_output(run_name);
  stage.finish();
  std::cout << "rank:" << scorer_name << ": " << queries.size()
            << " queries over " << documents.size() << " documents -> "
            << run_name << "\n";
}

void cmd_eval(const KeyValueConfig& config, const std::string& run_path_arg,
              const std::string& compare_path_arg) {
  const std::string run_path =
      run_path_arg.empty() ? config.required("run") : run_path_arg;
  require_file("run", run_path);
  const std::string compare_path = compare_path_arg.empty()
                                       ? config.get_string("compare", "")
                                       : compare_path_arg;
  if (!compare_path.empty()) require_file("compare", compare_path);
  const std::string qrels_path = config.required("qrels");
  require_file("qrels", qrels_path);
  const int comparisons = int(config.get_int("comparisons", 1));
  if (comparisons < 1) throw ConfigError("comparisons must be at least 1");
  StageRecorder stage(config, "eval");

  Qrels qrels = load_qrels(qrels_path);
  RunFile run = load_run(run_path);
  EvalReport report = mean_average_precision(run, qrels);

  stage.created_output_dir();
  save_eval_report(stage.path("eval_report.csv"), report);
  stage.add_output("eval_report.csv");
  std::cout << "eval: MAP " << report.map << " over " << report.per_query.size()
            << " queries (" << report.skipped.size() << " without relevant "
            << "documents skipped)\n";

  if (!compare_path.empty()) {
    RunFile other = load_run(compare_path);
    EvalReport other_report = mean_average_precision(other, qrels);
    std::map<std::string, double> other_ap(other_report.per_query.begin(),
                                           other_report.per_query.end());
    std::vector<double> a, b;
    for (const auto& [query_id, ap] : report.per_query) {
      auto it = other_ap.find(query_id);
      if (it == other_ap.end()) continue;
      a.push_back(ap);
      b.push_back(it->second);
    }
    if (a.size() < 2)
      throw RuntimeFailure(
          "significance test needs at least 2 queries evaluable in both runs");
    TTestResult t = paired_t_test(a, b, comparisons);

    std::ofstream sig(stage.path("significance.csv"));
    if (!sig) throw RuntimeFailure("cannot write significance.csv");
    sig << "n,map_a,map_b,t,p,p_bonferroni\n"
        << std::setprecision(17) << a.size() << ',' << report.map << ','
        << other_report.map << ',' << t.t << ',' << t.p << ','
        << t.p_bonferroni << '\n';
    stage.add_output("significance.csv");
    std::cout << "eval: paired t over " << a.size() << " queries: t = " << t.t
              << ", p = " << t.p << ", Bonferroni p = " << t.p_bonferroni
              << "\n";
  }
  stage.finish();
}

void cmd_ablate(const KeyValueConfig& config) {
  const std::string corpus_path = config.required("corpus");
  require_file("corpus", corpus_path);
  const std::string embeddings_path = config.required("embeddings");
  require_file("embeddings", embeddings_path);
  const std::string queries_path = config.required("queries");
  require_file("queries", queries_path);
  const std::string documents_path = config.required("documents");
  require_file("documents", documents_path);
  const std::string qrels_path = config.required("qrels");
  require_file("qrels", qrels_path);
  PreprocessOptions popts = preprocess_options(config);

  AblationOptions options;
  options.fractions =
      config.get_doubles("fractions", {0.05, 0.1, 0.25, 0.5, 1.0});
  options.methods =
      config.get_strings("methods", {"seclr", "seclr-rt", "psq"});
  options.seed = config.get_seed();
  options.metric = metric_from_name(config.get_string("metric", "dot"));
  options.augment = augment_config(config);
  options.train_config.learning_rate = config.get_double("learning_rate", 0.001);
  options.train_config.lambda2 = config.get_double("lambda2", 3.0);
  options.train_config.max_epochs = int(config.get_int("max_epochs", 20));
  options.train_config.patience = int(config.get_int("patience", 3));
  options.ibm1_iterations = int(config.get_int("ibm1_iterations", 10));
  options.psq_a0 = config.get_double("psq_a0", 0.3);
  if (options.ibm1_iterations < 1)
    throw ConfigError("ibm1_iterations must be at least 1");
  StageRecorder stage(config, "ablate");

  ParallelCorpus corpus = load_parallel(corpus_path, popts);
  EmbeddingTable pretrained = load_embeddings(
      embeddings_path, corpus.query_vocab, seed_for(config, "embedding_fill"));
  options.pretrained_query = &pretrained;
  options.dim = config.has("dim") ? size_t(config.get_int("dim", 32))
                                  : pretrained.dim();
  if (config.has("dim") && options.dim != pretrained.dim())
    throw ConfigError("config dim conflicts with embedding dimension");

  EvalSet set;
  set.name = config.get_string("eval_set_name", "main");
  set.queries = load_queries(queries_path,
                             load_stopwords(config.get_string(
                                 "query_stopwords", "")),
                             corpus.query_vocab);
  set.documents = load_documents(documents_path,
                                 load_stopwords(config.get_string(
                                     "target_stopwords", "")),
                                 corpus.target_vocab);
  set.qrels = load_qrels(qrels_path);

  std::vector<AblationRow> rows = ablation_run(corpus, {set}, options);

  stage.created_output_dir();
  save_ablation(stage.path("ablation.csv"), rows);
  stage.add_output("ablation.csv");
  stage.finish();
  std::cout << "ablate: " << rows.size() << " rows -> ablation.csv\n";
}

void cmd_hubness(const KeyValueConfig& config,
                 const std::vector<std::string>& model_paths) {
  std::vector<std::string> models = model_paths;
  if (models.empty()) models = config.get_strings("models", {});
  if (models.empty())
    throw ConfigError("no models given (use --model or the 'models' key)");
  for (const auto& p : models) require_file("model", p);
  const int k = int(config.get_int("hubness_k", 10));
  if (k < 1) throw ConfigError("hubness_k must be at least 1");
  const int64_t max_vocab = config.get_int("hubness_max_vocab", 0);
  if (max_vocab < 0) throw ConfigError("hubness_max_vocab must be nonnegative");
  StageRecorder stage(config, "hubness");

  std::ostringstream rows;
  rows << "model,k,n_query,n_target,mean,sigma,skewness\n"
       << std::setprecision(17);
  for (const auto& path : models) {
    ModelParams params = load_model(path);
    HubnessReport report =
        hubness_report(params, k, size_t(max_vocab), size_t(max_vocab));
    size_t n_query = params.n_query - 1;
    if (max_vocab > 0) n_query = std::min(n_query, size_t(max_vocab));
    rows << fs::path(path).filename().string() << ',' << report.k << ','
         << n_query << ',' << report.counts.size() << ',' << report.mean << ','
         << report.sigma << ',' << report.skew << '\n';
    std::cout << "hubness: " << path << ": skewness " << report.skew << "\n";
  }

  stage.created_output_dir();
  std::ofstream out(stage.path("hubness.csv"));
  if (!out) throw RuntimeFailure("cannot write hubness.csv");
  out << rows.str();
  out.close();
  stage.add_output("hubness.csv");
  stage.finish();
}

std::map<std::string, std::string> manifest_checksums(
    const std::string& out_dir, const std::string& stage) {
  const std::string manifest_path = join(out_dir, "manifest.json");
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("no manifest at " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path + ": " + e.what());
  }
  if (manifest.contains("stages"))
    for (const auto& entry : manifest["stages"])
      if (entry.value("stage", "") == stage) {
        std::map<std::string, std::string> out;
        for (const auto& [name, checksum] : entry.at("outputs").items())
          out[name] = checksum.get<std::string>();
        return out;
      }
  throw RuntimeFailure("stage " + stage + " not recorded in " + manifest_path);
}

}  // namespace seclr
