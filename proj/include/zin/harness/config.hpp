#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "zin/data/csv.hpp"
#include "zin/data/transforms.hpp"
#include "zin/invariance/invariance.hpp"

namespace zin::harness {

using json = nlohmann::json;

enum class SourceKind { kTemporal, kSpatial, kCmnist, kMcolor };

SourceKind parse_source_kind(const std::string& name);
std::string to_string(SourceKind k);

/// Synthetic data from one of the samplers.
struct ScmSource {
  SourceKind kind = SourceKind::kTemporal;
  double p_v = 0.9;
  /// Temporal: equal time segments; spatial: the four quadrants; feature
  /// level: one training environment per entry.
  std::vector<double> p_s;
  double sigma = 0.5;
  std::size_t n = 2000;
  std::uint64_t seed = 100;
  /// Replacement Z columns (names from X, Z or "y"); empty keeps the default.
  std::vector<std::string> aux;
};

struct EnvSegments {
  std::string column;
  int count = 5;
  std::optional<std::pair<double, double>> range;
};

/// User CSV, e.g. the house-price table.
struct CsvSource {
  std::string path;
  data::ColumnSchema schema;
  std::optional<std::string> normalize_within;
  std::string split_column;
  data::Interval train_range;
  data::Interval test_range;
  std::optional<EnvSegments> train_envs;
  std::optional<EnvSegments> test_envs;
};

/// Output directory of `zin gen` for one seed (manifest-verified).
struct GeneratedSource {
  std::string dir;
};

using DataSource = std::variant<ScmSource, CsvSource, GeneratedSource>;

/// Constant-p_s test environments for synthetic sources.
struct TestSpec {
  std::vector<double> p_s = {0.999, 0.8, 0.2, 0.1};
  std::size_t n = 5000;
  std::uint64_t seed = 1000;
};

struct RunConfig {
  std::string name = "experiment";
  std::string setting = "default";
  DataSource data = ScmSource{};
  TestSpec test;
  std::vector<inv::Method> methods = {inv::Method::kZin};
  inv::TrainConfig train;
  std::vector<std::uint64_t> seeds = {0};
  std::string out;

  /// Method requirements that can be checked without loading data.
  void validate() const;
  bool has_aux() const;
  bool has_env() const;
};

/// SchemaError messages carry a JSON path such as "$.train.lambda".
RunConfig parse_run_config(const json& doc);
RunConfig load_run_config(const std::string& path);
json to_json(const RunConfig& config);

json train_config_to_json(const inv::TrainConfig& config);
inv::TrainConfig train_config_from_json(const json& j, const std::string& path = "$.train");

/// Short hex digest of the data, test and train sections.
std::string config_hash(const RunConfig& config);

/// Parses "0,1,2" or "0-4".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace zin::harness
