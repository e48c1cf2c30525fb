#ifndef SECLR_PIPELINE_HPP
#define SECLR_PIPELINE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace seclr {

// Flat key=value configuration: a file of "key = value" lines plus
// programmatic overrides (command-line flags win over the file).
// Values are parsed lazily so a stage only validates the keys it uses.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::string required(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  uint64_t get_seed() const { return uint64_t(get_int("seed", 0)); }
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(
      const std::string& key, const std::vector<std::string>& fallback) const;

  // Stable digest over sorted key=value pairs.
  uint64_t content_hash() const;
  // Sorted "key = value" dump; reruns with equal settings byte-match.
  void dump(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Pipeline stages. Each validates its full configuration before
// touching the output directory, writes its artifacts plus an
// effective-config dump, and records itself in <out>/manifest.json
// with per-file checksums.
void cmd_augment(const KeyValueConfig& config);
void cmd_align(const KeyValueConfig& config);
void cmd_train(const KeyValueConfig& config, const std::string& mode);
void cmd_rank(const KeyValueConfig& config, const std::string& scorer);
void cmd_eval(const KeyValueConfig& config, const std::string& run_path,
              const std::string& compare_path);
void cmd_ablate(const KeyValueConfig& config);
void cmd_hubness(const KeyValueConfig& config,
                 const std::vector<std::string>& model_paths);

// The checksum map of a stage recorded in an out dir's manifest; used
// to verify reproducibility across runs. Missing manifest or stage is
// an error.
std::map<std::string, std::string> manifest_checksums(
    const std::string& out_dir, const std::string& stage);

}  // namespace seclr

#endif  // SECLR_PIPELINE_HPP
