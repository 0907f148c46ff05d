#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "zin/harness/config.hpp"

namespace zin::harness {

inline constexpr const char* kResultSchema = "zin.result/1";
inline constexpr const char* kManifestSchema = "zin.manifest/1";

struct Materialized {
  data::Dataset train;
  std::vector<data::Dataset> tests;
  std::vector<std::string> test_names;
};

/// Training and test data for one seed. Synthetic training data uses
/// seed data.seed + seed; a test environment with
/// spurious strength p uses test.seed + 10·seed + floor(100·p).
Materialized materialize(const RunConfig& config, std::uint64_t seed);

/// One training run as a result record; failures become records with
/// status "failed" instead of exceptions.
json run_one(const RunConfig& config, inv::Method method, std::uint64_t seed, const Materialized& data);

/// Serialised, append-only JSON-lines writer.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::string& path);
  void append(const json& record);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::mutex mu_;
};

struct ExecOptions {
  int jobs = 1;
  JsonlAppender* appender = nullptr;
  /// Called after every finished run (serialised).
  std::function<void(const json&)> on_record;
};

/// Runs every config × method × seed; records come back in grid order. Cells
/// that fail validation or training become "failed" records.
std::vector<json> execute(const std::vector<RunConfig>& configs, const ExecOptions& options);

/// Writes train.csv, test_<j>.csv and manifest.json into `dir`.
void generate(const RunConfig& config, std::uint64_t seed, const std::string& dir);

/// Loads a generated directory after checking every checksum; IntegrityError
/// on a mismatch or a missing file.
Materialized load_generated(const std::string& dir);

/// Default output root: $ZIN_OUT or "runs".
std::string default_output_root();

}  // namespace zin::harness
