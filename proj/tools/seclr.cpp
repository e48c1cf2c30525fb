// Command-line front end: one subcommand per pipeline stage, all
// driven by a key=value config file plus flag overrides.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seclr/common.hpp"
#include "seclr/pipeline.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::string seed;
  bool deterministic = false;
  std::vector<std::string> overrides;
};

void add_common_flags(CLI::App* cmd, GlobalOptions* opts) {
  cmd->add_option("-c,--config", opts->config_path,
                  "key = value configuration file");
  cmd->add_option("-o,--out", opts->out_dir, "output directory");
  cmd->add_option("--seed", opts->seed, "master random seed");
  cmd->add_flag("--deterministic", opts->deterministic,
                "record the deterministic-mode marker in the effective "
                "config (all stages are single-threaded and seeded anyway)");
  cmd->add_option("--set", opts->overrides,
                  "override a config entry, e.g. --set lambda1=0.5")
      ->take_all();
}

seclr::KeyValueConfig resolve_config(const GlobalOptions& opts) {
  seclr::KeyValueConfig config;
  if (!opts.config_path.empty())
    config = seclr::KeyValueConfig::from_file(opts.config_path);
  for (const auto& kv : opts.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw seclr::ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opts.out_dir.empty()) config.set("out_dir", opts.out_dir);
  if (!opts.seed.empty()) config.set("seed", opts.seed);
  if (opts.deterministic) config.set("deterministic", "true");
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-language sentence selection pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(seclr::kVersion));

  GlobalOptions opts;
  std::string mode = "seclr";
  std::string scorer = "seclr";
  std::string run_path, compare_path;
  std::vector<std::string> model_paths;

  auto* augment = app.add_subcommand(
      "augment", "synthesize a relevance training set from a parallel corpus");
  add_common_flags(augment, &opts);

  auto* align = app.add_subcommand(
      "align", "estimate a translation table with IBM Model 1");
  add_common_flags(align, &opts);

  auto* train =
      app.add_subcommand("train", "fit the embedding relevance model");
  add_common_flags(train, &opts);
  train->add_option("--mode", mode, "seclr or seclr-rt")
      ->check(CLI::IsMember({"seclr", "seclr-rt"}));

  auto* rank =
      app.add_subcommand("rank", "score and rank a document collection");
  add_common_flags(rank, &opts);
  rank->add_option("--scorer", scorer, "seclr, cosine or psq")
      ->check(CLI::IsMember({"seclr", "cosine", "psq"}));

  auto* eval = app.add_subcommand(
      "eval", "mean average precision, optionally with a paired t-test");
  add_common_flags(eval, &opts);
  eval->add_option("--run", run_path, "run file to evaluate");
  eval->add_option("--compare", compare_path,
                   "second run for the significance test");

  auto* ablate = app.add_subcommand(
      "ablate", "training-size ablation across ranking methods");
  add_common_flags(ablate, &opts);

  auto* hubness = app.add_subcommand(
      "hubness", "k-occurrence hubness statistics of trained models");
  add_common_flags(hubness, &opts);
  hubness->add_option("--model", model_paths, "model file (repeatable)")
      ->take_all();

  CLI11_PARSE(app, argc, argv);

  try {
    seclr::KeyValueConfig config = resolve_config(opts);
    if (augment->parsed()) seclr::cmd_augment(config);
    if (align->parsed()) seclr::cmd_align(config);
    if (train->parsed()) seclr::cmd_train(config, mode);
    if (rank->parsed()) seclr::cmd_rank(config, scorer);
    if (eval->parsed()) seclr::cmd_eval(config, run_path, compare_path);
    if (ablate->parsed()) seclr::cmd_ablate(config);
    if (hubness->parsed()) seclr::cmd_hubness(config, model_paths);
  } catch (const seclr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const seclr::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const seclr::RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
