#include "zin/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <thread>

#include "zin/common/errors.hpp"
#include "zin/data/csv.hpp"
#include "zin/data/transforms.hpp"
#include "zin/harness/digest.hpp"
#include "zin/scm/samplers.hpp"

namespace zin::harness {

namespace fs = std::filesystem;

namespace {

std::string ps_label(double p) {
  std::ostringstream os;
  os << "p_s=" << p;
  return os.str();
}

scm::TemporalSpec temporal_spec(const ScmSource& s, std::uint64_t seed) {
  scm::TemporalSpec spec;
  spec.p_v = s.p_v;
  spec.sigma = s.sigma;
  spec.n = s.n;
  spec.seed = seed;
  const double m = static_cast<double>(s.p_s.size());
  for (std::size_t i = 0; i < s.p_s.size(); ++i)
    spec.segments.push_back({static_cast<double>(i) / m, i + 1 == s.p_s.size() ? 1.0 : (i + 1) / m, s.p_s[i]});
  return spec;
}

Materialized synthetic(const RunConfig& c, const ScmSource& s, std::uint64_t seed) {
  Materialized out;
  const std::uint64_t train_seed = s.seed + seed;
  if (s.kind == SourceKind::kCmnist || s.kind == SourceKind::kMcolor) {
    const auto kind = s.kind == SourceKind::kCmnist ? scm::FeatureLevel::kCmnist : scm::FeatureLevel::kMcolor;
    scm::FeatureLevelPair pair = scm::sample_feature_level(kind, s.p_s, c.test.p_s.at(0), s.n, train_seed);
    out.train = std::move(pair.train);
    out.tests = {std::move(pair.test)};
    out.test_names = {ps_label(c.test.p_s[0])};
  } else {
    out.train = s.kind == SourceKind::kTemporal
                    ? scm::sample_temporal(temporal_spec(s, train_seed))
                    : scm::sample_spatial(scm::SpatialSpec::four_blocks(s.p_s, s.p_v, s.n, train_seed, s.sigma));
    for (std::size_t j = 0; j < c.test.p_s.size(); ++j) {
      out.tests.push_back(
          scm::sample_fixed_ps(s.p_v, c.test.p_s[j], s.sigma, c.test.n, c.test.seed + 10 * seed + static_cast<std::uint64_t>(c.test.p_s[j] * 100)));
      out.test_names.push_back(ps_label(c.test.p_s[j]));
    }
  }
  if (!s.aux.empty()) out.train = out.train.with_aux(s.aux);
  return out;
}

Materialized from_csv(const CsvSource& s) {
  data::Dataset all = data::load_csv(s.path, s.schema);
  if (s.normalize_within) all = data::normalize_within_groups(all, *s.normalize_within);
  const data::RangeSplit split = data::split_by_range(all, s.split_column, {s.train_range, s.test_range});
  Materialized out;
  out.train = split.parts[0];
  if (out.train.size() == 0) throw ConfigError("no training rows in " + s.train_range.to_string());
  if (split.parts[1].size() == 0) throw ConfigError("no test rows in " + s.test_range.to_string());
  if (s.train_envs) out.train = data::segment_env_labels(out.train, s.train_envs->column, s.train_envs->count,
                                                         s.train_envs->range);
  if (s.test_envs) {
    const data::Dataset test =
        data::segment_env_labels(split.parts[1], s.test_envs->column, s.test_envs->count, s.test_envs->range);
    out.tests = inv::split_by_env(test);
    for (std::size_t j = 0; j < out.tests.size(); ++j) out.test_names.push_back("segment " + std::to_string(j));
  } else {
    out.tests = {split.parts[1]};
    out.test_names = {"test"};
  }
  return out;
}

json evaluation_json(const inv::Evaluation& ev, const std::vector<std::string>& names) {
  json j{{"per_env", ev.per_env}, {"mean", ev.mean}, {"worst", ev.worst}};
  if (!names.empty()) j["env_names"] = names;
  return j;
}

// Fraction of samples whose inferred group's majority environment is their own.
double partition_purity(const std::vector<int>& inferred, const std::vector<int>& env) {
  std::map<std::pair<int, int>, std::size_t> counts;
  std::map<int, std::size_t> best;
  for (std::size_t i = 0; i < inferred.size(); ++i) ++counts[{inferred[i], env[i]}];
  for (const auto& [key, n] : counts) best[key.first] = std::max(best[key.first], n);
  std::size_t hit = 0;
  for (const auto& [_, n] : best) hit += n;
  return inferred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(inferred.size());
}

json base_record(const RunConfig& c, inv::Method m, std::uint64_t seed) {
  return json{{"schema", kResultSchema},         {"experiment", c.name}, {"setting", c.setting},
              {"method", inv::to_string(m)},     {"seed", seed},         {"config_hash", config_hash(c)}};
}

json failure(json rec, const std::string& what) {
  rec["status"] = "failed";
  rec["error"] = what;
  return rec;
}

data::ColumnSchema schema_from_json(const json& cols) {
  data::ColumnSchema s;
  for (const auto& c : cols)
    s.columns.push_back({c.at("name").get<std::string>(), data::parse_role(c.at("role").get<std::string>()),
                         data::parse_column_type(c.at("type").get<std::string>())});
  return s;
}

json schema_to_json(const data::ColumnSchema& s) {
  json cols = json::array();
  for (const auto& c : s.columns)
    cols.push_back({{"name", c.name}, {"role", data::to_string(c.role)}, {"type", data::to_string(c.type)}});
  return cols;
}

}  // namespace

Materialized materialize(const RunConfig& c, std::uint64_t seed) {
  if (const auto* s = std::get_if<ScmSource>(&c.data)) return synthetic(c, *s, seed);
  if (const auto* s = std::get_if<CsvSource>(&c.data)) return from_csv(*s);
  return load_generated(std::get<GeneratedSource>(c.data).dir);
}

json run_one(const RunConfig& c, inv::Method m, std::uint64_t seed, const Materialized& d) {
  json rec = base_record(c, m, seed);
  inv::TrainConfig tc = c.train;
  tc.seed = seed;
  try {
    const inv::RunResult r = inv::train(m, d.train, tc);
    const inv::Evaluation test = inv::evaluate(r.model, d.tests, tc.loss);
    rec["status"] = "ok";
    rec["metric"] = test.accuracy ? "accuracy" : "mse";
    rec["train"] = evaluation_json(r.train, {});
    rec["test"] = evaluation_json(test, d.test_names);
    rec["wall_seconds"] = r.wall_seconds;
    if (!r.history.empty()) {
      rec["final_risk"] = r.history.back().risk;
      rec["final_penalty"] = r.history.back().penalty;
    }
    if (m != inv::Method::kIrmOracle && !r.inferred_env.empty() && d.train.has_env())
      rec["partition_purity"] = partition_purity(r.inferred_env, d.train.env);
    if (!r.group_weights.empty()) rec["group_weights"] = r.group_weights;
  } catch (const TrainingError& e) {
    rec = failure(std::move(rec), e.what());
    rec["epoch"] = e.epoch();
  } catch (const Error& e) {
    rec = failure(std::move(rec), e.what());
  }
  return rec;
}

JsonlAppender::JsonlAppender(const std::string& path) : path_(path) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  out_.open(path, std::ios::app);
  if (!out_) throw IoError("cannot open '" + path + "' for appending");
}

void JsonlAppender::append(const json& record) {
  std::lock_guard<std::mutex> lock(mu_);
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("write to '" + path_ + "' failed");
}

std::vector<json> execute(const std::vector<RunConfig>& configs, const ExecOptions& options) {
  struct Job {
    std::size_t config;
    inv::Method method;
    std::uint64_t seed;
    std::string invalid;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<std::string> invalid;
    for (inv::Method m : configs[c].methods) {
      RunConfig one = configs[c];
      one.methods = {m};
      try {
        one.validate();
        invalid.emplace_back();
      } catch (const Error& e) {
        invalid.emplace_back(e.what());
      }
    }
    for (std::uint64_t seed : configs[c].seeds)
      for (std::size_t k = 0; k < configs[c].methods.size(); ++k)
        jobs.push_back({c, configs[c].methods[k], seed, invalid[k]});
  }
  std::vector<json> out(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const RunConfig& c = configs[job.config];
      json rec;
      try {
        if (!job.invalid.empty()) throw ConfigError(job.invalid);
        rec = run_one(c, job.method, job.seed, materialize(c, job.seed));
      } catch (const Error& e) {
        rec = failure(base_record(c, job.method, job.seed), e.what());
      }
      std::lock_guard<std::mutex> lock(report_mu);
      if (options.appender) options.appender->append(rec);
      if (options.on_record) options.on_record(rec);
      out[i] = std::move(rec);
    }
  };
  const std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.jobs)), 1,
                                                std::max<std::size_t>(1, jobs.size()));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

void generate(const RunConfig& c, std::uint64_t seed, const std::string& dir) {
  const Materialized m = materialize(c, seed);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "'");
  json files = json::array();
  auto write = [&](const data::Dataset& ds, const std::string& name, const std::string& role, const std::string& label) {
    const std::string path = (fs::path(dir) / name).string();
    data::save_csv(ds, path);
    json f{{"file", name}, {"role", role}, {"rows", ds.size()}, {"sha256", sha256_file(path)},
           {"columns", schema_to_json(data::schema_for(ds))}};
    if (!label.empty()) f["label"] = label;
    files.push_back(f);
  };
  write(m.train, "train.csv", "train", "");
  for (std::size_t j = 0; j < m.tests.size(); ++j)
    write(m.tests[j], "test_" + std::to_string(j) + ".csv", "test", m.test_names[j]);
  json manifest{{"schema", kManifestSchema}, {"seed", seed}, {"config", to_json(c)}, {"files", files}};
  manifest["config"].erase("seeds");
  const std::string mpath = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(mpath);
  if (!out) throw IoError("cannot write '" + mpath + "'");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("write to '" + mpath + "' failed");
}

Materialized load_generated(const std::string& dir) {
  const std::string mpath = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot read '" + mpath + "'");
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IntegrityError("manifest '" + mpath + "' is not valid JSON: " + e.what());
  }
  if (manifest.value("schema", "") != kManifestSchema) throw IntegrityError("'" + mpath + "' is not a zin manifest");
  Materialized out;
  try {
    for (const auto& f : manifest.at("files")) {
      const std::string name = f.at("file").get<std::string>();
      const std::string path = (fs::path(dir) / name).string();
      if (!fs::exists(path)) throw IntegrityError("manifest lists missing file '" + name + "'");
      if (sha256_file(path) != f.at("sha256").get<std::string>())
        throw IntegrityError("checksum mismatch for '" + name + "'");
      data::Dataset ds = data::load_csv(path, schema_from_json(f.at("columns")));
      if (f.at("role") == "train") {
        out.train = std::move(ds);
      } else {
        out.tests.push_back(std::move(ds));
        out.test_names.push_back(f.value("label", name));
      }
    }
  } catch (const json::exception& e) {
    throw IntegrityError("malformed manifest '" + mpath + "': " + e.what());
  }
  if (out.train.size() == 0 || out.tests.empty()) throw IntegrityError("manifest '" + mpath + "' is incomplete");
  return out;
}

std::string default_output_root() {
  const char* v = std::getenv("ZIN_OUT");
  return v && *v ? std::string(v) : std::string("runs");
}

}  // namespace zin::harness
