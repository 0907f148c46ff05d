#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "zin/common/errors.hpp"
#include "zin/harness/config.hpp"
#include "zin/harness/experiment.hpp"
#include "zin/harness/report.hpp"
#include "zin/harness/suites.hpp"
#include "zin/harness/verify.hpp"

namespace fs = std::filesystem;
using namespace zin;
using namespace zin::harness;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");
  return dir;
}

std::string output_dir(const std::string& flag, const RunConfig& c) {
  if (!flag.empty()) return flag;
  if (!c.out.empty()) return c.out;
  return (fs::path(default_output_root()) / c.name).string();
}

void print_progress(const json& r) {
  std::cerr << r["setting"].get<std::string>() << " / " << r["method"].get<std::string>() << " / seed "
            << r["seed"].get<std::uint64_t>() << ": ";
  if (r["status"] == "ok") {
    std::cerr << "test worst " << r["test"]["worst"].get<double>() << " (" << r["wall_seconds"].get<double>()
              << " s)\n";
  } else {
    std::cerr << "FAILED: " << r["error"].get<std::string>() << '\n';
  }
}

int cmd_gen(const std::string& config_path, const std::string& out, const std::string& seeds) {
  RunConfig c = load_run_config(config_path);
  if (!seeds.empty()) c.seeds = parse_seed_list(seeds);
  const fs::path root = prepare_dir(out.empty() ? (fs::path(output_dir("", c)) / "data").string() : out);
  for (std::uint64_t s : c.seeds) {
    const fs::path dir = root / ("seed_" + std::to_string(s));
    generate(c, s, dir.string());
    std::cout << dir.string() << '\n';
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out, const std::string& seeds, int jobs) {
  RunConfig c = load_run_config(config_path);
  if (!seeds.empty()) c.seeds = parse_seed_list(seeds);
  c.validate();
  const fs::path dir = prepare_dir(output_dir(out, c));
  JsonlAppender appender((dir / "results.jsonl").string());
  ExecOptions opt;
  opt.jobs = jobs;
  opt.appender = &appender;
  opt.on_record = print_progress;
  const std::vector<json> records = execute({c}, opt);
  int failed = 0;
  for (const auto& r : records)
    if (r["status"] != "ok") {
      ++failed;
      std::cerr << "error: " << r["method"].get<std::string>() << " seed " << r["seed"].get<std::uint64_t>() << ": "
                << r["error"].get<std::string>() << '\n';
    }
  std::cout << aggregate(records).render_text();
  std::cout << records.size() - failed << " of " << records.size() << " runs written to " << appender.path()
            << '\n';
  return failed ? 1 : 0;
}

int cmd_bench(const std::string& suite, const std::string& config_path, const std::string& out,
              const std::string& seeds, int jobs) {
  std::optional<RunConfig> base;
  if (!config_path.empty()) base = load_run_config(config_path);
  const std::vector<RunConfig> configs = build_suite(suite, parse_seed_list(seeds.empty() ? "0-4" : seeds), base);
  const fs::path dir = prepare_dir(out.empty() ? (fs::path(default_output_root()) / suite).string() : out);
  JsonlAppender appender((dir / "results.jsonl").string());
  ExecOptions opt;
  opt.jobs = jobs;
  opt.appender = &appender;
  opt.on_record = print_progress;
  const std::vector<json> records = execute(configs, opt);
  const BenchmarkTable table = aggregate(records);
  const std::string text = table.render_text();
  write_text(dir / "table.txt", text);
  write_text(dir / "table.csv", table.render_csv());
  for (const auto& [name, svg] : suite_charts(suite, table)) write_text(dir / name, svg);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r["status"] != "ok";
  std::cout << text;
  std::cout << records.size() - failed << " of " << records.size() << " runs succeeded; results in " << dir.string()
            << '\n';
  return 0;
}

int cmd_verify() {
  const VerifyReport rep = run_verify();
  std::cout << rep.render();
  if (rep.all_pass()) return 0;
  std::cerr << "verify failed:";
  for (const auto& f : rep.failures()) std::cerr << ' ' << f;
  std::cerr << '\n';
  return 1;
}

int cmd_report(const std::string& path, const std::string& out) {
  const RecordSet set = read_records(path);
  for (const auto& w : set.warnings) std::cerr << "warning: " << w << '\n';
  if (set.skipped) std::cerr << set.skipped << " line(s) skipped\n";
  const BenchmarkTable table = aggregate(set.records);
  std::cout << table.render_text();
  if (!out.empty()) {
    const fs::path dir = prepare_dir(out);
    write_text(dir / "table.txt", table.render_text());
    write_text(dir / "table.csv", table.render_csv());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Environment inference and invariant learning from auxiliary information"};
  app.require_subcommand(1);

  std::string config, out, seeds, suite, results;
  int jobs = 1;

  auto* gen = app.add_subcommand("gen", "Write train/test CSVs and a manifest for a synthetic config");
  gen->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "Output directory");
  gen->add_option("--seeds", seeds, "Seeds, e.g. 0,1,2 or 0-4");

  auto* train = app.add_subcommand("train", "Train every method of a config over its seeds");
  train->add_option("--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output directory");
  train->add_option("--seeds", seeds, "Seeds, e.g. 0,1,2 or 0-4");
  train->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
  bench->add_option("--suite", suite, "Suite name")->required()->check(CLI::IsMember(suite_names()));
  bench->add_option("--config", config, "Base config (required for the house suite)")->check(CLI::ExistingFile);
  bench->add_option("--out", out, "Output directory");
  bench->add_option("--seeds", seeds, "Seeds (default 0-4)");
  bench->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Check the discrete and linear theory");

  auto* report = app.add_subcommand("report", "Aggregate result records into a table");
  report->add_option("results", results, "Directory or .jsonl file of result records")->required();
  report->add_option("--out", out, "Also write table.txt and table.csv here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(config, out, seeds);
    if (*train) return cmd_train(config, out, seeds, jobs);
    if (*bench) return cmd_bench(suite, config, out, seeds, jobs);
    if (*verify) return cmd_verify();
    if (*report) return cmd_report(results, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
