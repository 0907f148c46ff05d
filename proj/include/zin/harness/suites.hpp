#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zin/harness/config.hpp"
#include "zin/harness/report.hpp"

namespace zin::harness {

const std::vector<std::string>& suite_names();

/// Configs for a named benchmark suite. `base` supplies the training
/// defaults; the house suite also takes its CSV source from it. ConfigError
/// for an unknown name or a house suite without a CSV source.
std::vector<RunConfig> build_suite(const std::string& name, const std::vector<std::uint64_t>& seeds,
                                   const std::optional<RunConfig>& base = std::nullopt);

/// Single suite cells used by the acceptance checks.
RunConfig temporal_config(const std::vector<double>& p_s, double p_v, std::size_t n = 2000);
RunConfig spatial_config(const std::vector<double>& p_s, double p_v, std::size_t n = 2000);
RunConfig feature_level_config(SourceKind kind, std::size_t n_per_env = 1000);
/// Z choice: "r", "r1", "r2", "X" or "(X,Y)".
RunConfig ablation_z_config(const std::string& z, std::size_t n = 5000);
RunConfig ablation_k_config(int k, std::size_t n = 5000);

/// (file name, SVG) pairs for a finished suite.
std::vector<std::pair<std::string, std::string>> suite_charts(const std::string& name, const BenchmarkTable& table);

}  // namespace zin::harness
