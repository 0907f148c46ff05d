#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "zin/common/errors.hpp"
#include "zin/harness/config.hpp"
#include "zin/harness/digest.hpp"
#include "zin/harness/experiment.hpp"
#include "zin/harness/report.hpp"
#include "zin/harness/suites.hpp"
#include "zin/harness/svg.hpp"
#include "zin/harness/verify.hpp"

using namespace zin;
using namespace zin::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("zin_harness_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_doc() {
  return json::parse(R"({
    "name": "t",
    "data": {"kind": "temporal", "p_v": 0.9, "p_s": [0.999, 0.7], "n": 300},
    "test": {"p_s": [0.999, 0.1], "n": 500},
    "methods": ["erm"],
    "train": {"epochs": 30, "anneal_epochs": 10, "rho_warmup": 0, "hidden": [8]},
    "seeds": [0]
  })");
}

std::string schema_error(const json& doc) {
  try {
    parse_run_config(doc);
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

json record(const std::string& setting, const std::string& method, std::uint64_t seed, double worst) {
  return json{{"schema", kResultSchema},
              {"experiment", "e"},
              {"setting", setting},
              {"method", method},
              {"seed", seed},
              {"status", "ok"},
              {"metric", "accuracy"},
              {"train", {{"mean", worst}, {"worst", worst}}},
              {"test", {{"mean", worst}, {"worst", worst}}}};
}

void write_csv(const fs::path& p, bool with_env) {
  std::ofstream out(p);
  out << "x,year,region,price" << (with_env ? ",env" : "") << "\n";
  for (int i = 0; i < 40; ++i)
    out << i * 0.5 << ',' << 1900 + 5 * i << ',' << (i % 3) << ',' << i * 1.5 + (i % 2)
        << (with_env ? "," + std::to_string(i % 2) : "") << "\n";
}

json csv_doc(const fs::path& p, bool with_env) {
  json cols = json::array({{{"name", "x"}}, {{"name", "price"}, {"role", "label"}},
                           {{"name", "year"}, {"role", "auxiliary"}}, {{"name", "region"}, {"role", "ignore"}}});
  if (with_env) cols.push_back({{"name", "env"}, {"role", "env"}});
  return json{{"name", "csv"},
              {"data",
               {{"kind", "csv"},
                {"path", p.string()},
                {"columns", cols},
                {"split", {{"column", "year"}, {"train", "[1900,1990)"}, {"test", "[1990,2100]"}}}}},
              {"methods", {"erm"}},
              {"train", {{"loss", "squared"}, {"epochs", 20}, {"anneal_epochs", 5}, {"hidden", {4}}}}};
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  const RunConfig c = parse_run_config(small_doc());
  EXPECT_EQ(c.name, "t");
  EXPECT_EQ(std::get<ScmSource>(c.data).p_s, (std::vector<double>{0.999, 0.7}));
  EXPECT_EQ(c.train.epochs, 30);
  const RunConfig back = parse_run_config(to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16U);
}

TEST(Config, HashTracksTraining) {
  RunConfig a = parse_run_config(small_doc());
  RunConfig b = a;
  b.train.lambda = 3.0;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b.seeds = {4, 5};
  EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Config, ErrorsCarryJsonPaths) {
  json d = small_doc();
  d["train"]["lambda"] = "big";
  EXPECT_NE(schema_error(d).find("$.train.lambda"), std::string::npos);
  d = small_doc();
  d["train"]["anneal"] = 5;
  EXPECT_NE(schema_error(d).find("$.train.anneal"), std::string::npos);
  d = small_doc();
  d["data"]["p_s"][1] = 1.5;
  EXPECT_NE(schema_error(d).find("$.data.p_s[1]"), std::string::npos);
  d = small_doc();
  d["data"].erase("kind");
  EXPECT_NE(schema_error(d).find("$.data.kind"), std::string::npos);
  d = small_doc();
  d["methods"] = {"magic"};
  EXPECT_NE(schema_error(d).find("$.methods"), std::string::npos);
}

TEST(Config, CommentsAllowedInFiles) {
  const fs::path dir = scratch("comments");
  std::ofstream(dir / "c.json") << "{\n  // note\n  \"data\": {\"kind\": \"spatial\", \"p_s\": [1, 1, 0.8, 0.8]}\n}\n";
  const RunConfig c = load_run_config((dir / "c.json").string());
  EXPECT_EQ(std::get<ScmSource>(c.data).kind, SourceKind::kSpatial);
  EXPECT_THROW(load_run_config((dir / "missing.json").string()), IoError);
}

TEST(Config, MethodRequirementsCheckedUpFront) {
  const fs::path dir = scratch("requirements");
  write_csv(dir / "h.csv", false);
  json doc = csv_doc(dir / "h.csv", false);
  doc["methods"] = {"irm_oracle"};
  EXPECT_NE(schema_error(doc).find("irm_oracle needs environment ids"), std::string::npos);
  EXPECT_NO_THROW(parse_run_config(csv_doc(dir / "h.csv", true)));
  RunConfig c = parse_run_config(csv_doc(dir / "h.csv", false));
  c.methods = {inv::Method::kIrmOracle};
  EXPECT_THROW(c.validate(), ConfigError);
  c.methods = {inv::Method::kGroupDro};
  EXPECT_THROW(c.validate(), ConfigError);
  c.methods = {inv::Method::kErm, inv::Method::kZin};
  EXPECT_NO_THROW(c.validate());

  json d = small_doc();
  d["data"] = {{"kind", "mcolor"}, {"p_s", {0.8, 0.7}}};
  d["test"] = {{"p_s", {0.1}}};
  d["methods"] = {"zin"};
  EXPECT_NE(schema_error(d).find("zin needs auxiliary information"), std::string::npos);
}

TEST(Config, SeedLists) {
  EXPECT_EQ(parse_seed_list("0,1,2"), (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(parse_seed_list("0-4"), (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(parse_seed_list("7,2-3"), (std::vector<std::uint64_t>{7, 2, 3}));
  EXPECT_THROW(parse_seed_list(""), ConfigError);
  EXPECT_THROW(parse_seed_list("a"), ConfigError);
  EXPECT_THROW(parse_seed_list("4-2"), ConfigError);
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_THROW(sha256_file("/nonexistent/zin"), IoError);
}

TEST(Generate, TemporalShapeAndDeterminism) {
  json d = small_doc();
  d["data"]["n"] = 1000;
  const RunConfig c = parse_run_config(d);
  const fs::path dir = scratch("gen");
  generate(c, 3, (dir / "a").string());
  generate(c, 3, (dir / "b").string());
  for (const char* f : {"train.csv", "test_0.csv", "test_1.csv", "manifest.json"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  std::ifstream in(dir / "a" / "train.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "x_v,x_s,y,z_t,env");
  std::size_t rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  EXPECT_EQ(rows, 1000U);
  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["files"].size(), 3U);

  const Materialized direct = materialize(c, 3);
  const Materialized loaded = load_generated((dir / "a").string());
  ASSERT_EQ(loaded.train.size(), direct.train.size());
  EXPECT_EQ(loaded.tests.size(), direct.tests.size());
  EXPECT_EQ(loaded.test_names, direct.test_names);
  for (std::size_t i = 0; i < direct.train.size(); ++i) EXPECT_EQ(loaded.train.y(i, 0), direct.train.y(i, 0));
}

TEST(Generate, TamperingIsDetected) {
  const RunConfig c = parse_run_config(small_doc());
  const fs::path dir = scratch("tamper");
  generate(c, 0, dir.string());
  std::string text = slurp(dir / "test_1.csv");
  text[text.find('\n') + 1] = text[text.find('\n') + 1] == '1' ? '2' : '1';
  std::ofstream(dir / "test_1.csv", std::ios::binary) << text;
  EXPECT_THROW(load_generated(dir.string()), IntegrityError);
  fs::remove(dir / "train.csv");
  EXPECT_THROW(load_generated(dir.string()), IntegrityError);
  EXPECT_THROW(load_generated((dir / "nothing").string()), IoError);
}

TEST(Generate, UnwritablePath) {
  const RunConfig c = parse_run_config(small_doc());
  const fs::path dir = scratch("unwritable");
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(generate(c, 0, (dir / "file" / "sub").string()), IoError);
}

TEST(Materialize, SeedsAndAuxOverride) {
  json d = small_doc();
  d["data"] = {{"kind", "spatial"}, {"p_s", {0.999, 0.999, 0.8, 0.8}}, {"n", 200}, {"aux", {"z_r2"}}};
  const RunConfig c = parse_run_config(d);
  const Materialized a = materialize(c, 0), b = materialize(c, 1), a2 = materialize(c, 0);
  EXPECT_EQ(a.train.aux_dim(), 1U);
  EXPECT_EQ(a.train.z_names, std::vector<std::string>{"z_r2"});
  EXPECT_EQ(a.test_names, (std::vector<std::string>{"p_s=0.999", "p_s=0.1"}));
  EXPECT_EQ(a.tests[0].size(), 500U);
  EXPECT_NE(a.train.x(0, 0), b.train.x(0, 0));
  EXPECT_EQ(a.train.x(0, 0), a2.train.x(0, 0));
}

TEST(Materialize, CsvSplitAndSegments) {
  const fs::path dir = scratch("csv");
  write_csv(dir / "h.csv", false);
  json d = csv_doc(dir / "h.csv", false);
  d["data"]["train_envs"] = {{"column", "year"}, {"count", 3}};
  d["data"]["test_envs"] = {{"column", "year"}, {"count", 2}};
  const Materialized m = materialize(parse_run_config(d), 0);
  EXPECT_EQ(m.train.size(), 18U);
  EXPECT_EQ(m.train.num_envs(), 3);
  EXPECT_EQ(m.tests.size(), 2U);
  EXPECT_EQ(m.tests[0].size() + m.tests[1].size(), 22U);
}

TEST(Execute, FanOutOverSeeds) {
  RunConfig c = parse_run_config(small_doc());
  c.seeds = parse_seed_list("0-4");
  const std::vector<json> records = execute({c}, {});
  ASSERT_EQ(records.size(), 5U);
  std::set<std::uint64_t> seeds;
  for (const auto& r : records) {
    EXPECT_EQ(r["status"], "ok");
    EXPECT_EQ(r["schema"], kResultSchema);
    EXPECT_EQ(r["config_hash"], config_hash(c));
    EXPECT_TRUE(r["test"]["mean"].is_number());
    EXPECT_LE(r["test"]["worst"].get<double>(), r["test"]["mean"].get<double>());
    EXPECT_EQ(r["test"]["per_env"].size(), 2U);
    seeds.insert(r["seed"].get<std::uint64_t>());
  }
  EXPECT_EQ(seeds.size(), 5U);
}

TEST(Execute, ParallelMatchesSerial) {
  RunConfig c = parse_run_config(small_doc());
  c.methods = {inv::Method::kErm, inv::Method::kZin};
  c.seeds = {0, 1};
  ExecOptions par;
  par.jobs = 3;
  const std::vector<json> a = execute({c}, {}), b = execute({c}, par);
  ASSERT_EQ(a.size(), 4U);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]["method"], b[i]["method"]);
    EXPECT_EQ(a[i]["test"], b[i]["test"]);
    EXPECT_EQ(a[i]["train"], b[i]["train"]);
  }
  EXPECT_EQ(aggregate(a).render_text(), aggregate(b).render_text());
}

TEST(Execute, InvalidCellsBecomeFailedRecords) {
  const fs::path dir = scratch("cells");
  write_csv(dir / "h.csv", false);
  RunConfig c = parse_run_config(csv_doc(dir / "h.csv", false));
  c.methods = {inv::Method::kErm, inv::Method::kIrmOracle};
  c.seeds = {0, 1};
  const std::vector<json> records = execute({c}, {});
  ASSERT_EQ(records.size(), 4U);
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (r["method"] == "irm_oracle") {
      EXPECT_EQ(r["status"], "failed");
      EXPECT_NE(r["error"].get<std::string>().find("environment"), std::string::npos);
      ++failed;
    } else {
      EXPECT_EQ(r["status"], "ok");
      EXPECT_EQ(r["metric"], "mse");
    }
  }
  EXPECT_EQ(failed, 2U);
}

TEST(Execute, DivergenceCarriesEpoch) {
  RunConfig c = parse_run_config(small_doc());
  c.train.lr = 1e6;
  c.train.loss = inv::LossKind::kSquared;
  const Materialized m = materialize(c, 0);
  Materialized big = m;
  for (std::size_t i = 0; i < big.train.size(); ++i) big.train.y(i, 0) = 1e200;
  const json r = run_one(c, inv::Method::kErm, 0, big);
  EXPECT_EQ(r["status"], "failed");
  EXPECT_TRUE(r.contains("epoch"));
}

TEST(Appender, WritesOneLinePerRecord) {
  const fs::path dir = scratch("appender");
  {
    JsonlAppender app((dir / "sub" / "r.jsonl").string());
    app.append(record("s", "erm", 0, 0.5));
    app.append(record("s", "erm", 1, 0.6));
  }
  const RecordSet set = read_records(dir.string());
  EXPECT_EQ(set.records.size(), 2U);
  EXPECT_EQ(set.skipped, 0U);
}

TEST(Report, MeanAndSampleStd) {
  const BenchmarkTable t =
      aggregate({record("s", "zin", 0, 0.8), record("s", "zin", 1, 0.9), record("s", "zin", 2, 1.0)});
  ASSERT_EQ(t.rows.size(), 1U);
  EXPECT_NEAR(t.rows[0].test_worst.mean, 0.9, 1e-12);
  ASSERT_TRUE(t.rows[0].test_worst.std.has_value());
  EXPECT_NEAR(*t.rows[0].test_worst.std, 0.1, 1e-12);
  EXPECT_EQ(t.rows[0].test_worst.count, 3U);
}

TEST(Report, SingleSeedStdIsNa) {
  const BenchmarkTable t = aggregate({record("s", "zin", 0, 0.8)});
  EXPECT_FALSE(t.rows[0].test_worst.std.has_value());
  EXPECT_NE(t.render_text().find("n/a"), std::string::npos);
}

TEST(Report, MethodOrderAndFailures) {
  json bad = record("s", "erm", 1, 0);
  bad["status"] = "failed";
  bad["error"] = "boom";
  const BenchmarkTable t = aggregate({record("s", "irm_oracle", 0, 0.8), record("s", "zin", 0, 0.7),
                                      record("s", "erm", 0, 0.6), bad, record("s2", "erm", 0, 0.5)});
  ASSERT_EQ(t.rows.size(), 4U);
  EXPECT_EQ(t.rows[0].method, "erm");
  EXPECT_EQ(t.rows[0].failed, 1U);
  EXPECT_EQ(t.rows[0].test_worst.count, 1U);
  EXPECT_EQ(t.rows[1].method, "zin");
  EXPECT_EQ(t.rows[2].method, "irm_oracle");
  EXPECT_EQ(t.rows[3].setting, "s2");
  const std::string csv = t.render_csv();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Report, EmptyDirectory) {
  const fs::path dir = scratch("empty");
  const RecordSet set = read_records(dir.string());
  EXPECT_TRUE(set.records.empty());
  EXPECT_TRUE(aggregate(set.records).rows.empty());
  EXPECT_THROW(read_records((dir / "absent").string()), IoError);
}

TEST(Report, MixedSchemaSkippedWithWarning) {
  const fs::path dir = scratch("mixed");
  {
    std::ofstream out(dir / "r.jsonl");
    out << record("s", "zin", 0, 0.8).dump() << "\n";
    out << json{{"schema", "other/2"}, {"setting", "s"}}.dump() << "\n";
    out << "not json\n\n";
    out << record("s", "zin", 1, 1.0).dump() << "\n";
  }
  const RecordSet set = read_records(dir.string());
  EXPECT_EQ(set.records.size(), 2U);
  EXPECT_EQ(set.skipped, 2U);
  ASSERT_EQ(set.warnings.size(), 2U);
  EXPECT_NE(set.warnings[0].find(":2:"), std::string::npos);
  EXPECT_NEAR(aggregate(set.records).rows[0].test_worst.mean, 0.9, 1e-12);
}

TEST(Report, ReadOrderIsCanonical) {
  const fs::path dir = scratch("order");
  {
    std::ofstream out(dir / "r.jsonl");
    for (std::uint64_t s : {2, 0, 1}) out << record("s", "zin", s, 0.1 * s).dump() << "\n";
    out << record("s", "erm", 0, 0.3).dump() << "\n";
  }
  const RecordSet set = read_records(dir.string());
  EXPECT_EQ(set.records[0]["method"], "erm");
  EXPECT_EQ(set.records[1]["seed"], 0);
  EXPECT_EQ(set.records[3]["seed"], 2);
}

TEST(Svg, EmbedsDataAndChecksLengths) {
  const std::string bar = bar_chart("t<1>", "acc", {"a", "b"}, {{"zin", {}, {0.8, 0.9}}});
  EXPECT_EQ(bar.rfind("<svg", 0), 0U);
  EXPECT_NE(bar.find("<!-- data: "), std::string::npos);
  EXPECT_NE(bar.find("t&lt;1&gt;"), std::string::npos);
  EXPECT_NE(bar.find("</svg>"), std::string::npos);
  EXPECT_THROW(bar_chart("t", "acc", {"a"}, {{"zin", {}, {0.8, 0.9}}}), DimensionError);
  const std::string line = line_chart("k", "K", "acc", {{"zin", {2, 4, 8}, {0.7, 0.75, 0.74}}});
  EXPECT_NE(line.find("<polyline"), std::string::npos);
  EXPECT_NE(line.find("\"x\":[2.0,4.0,8.0]"), std::string::npos);
  EXPECT_THROW(line_chart("k", "K", "acc", {{"zin", {2}, {0.7, 0.75}}}), DimensionError);
}

TEST(Suites, GridShapes) {
  const auto seeds = parse_seed_list("0-4");
  EXPECT_EQ(build_suite("temporal", seeds).size(), 6U);
  EXPECT_EQ(build_suite("spatial", seeds).size(), 6U);
  EXPECT_EQ(build_suite("mcolor", seeds).size(), 2U);
  EXPECT_EQ(build_suite("ablation_z", seeds).size(), 5U);
  const auto k = build_suite("ablation_k", seeds);
  ASSERT_EQ(k.size(), 5U);
  EXPECT_EQ(k[4].train.k, 8);
  for (const auto& name : suite_names()) {
    if (name == "house") continue;
    for (const auto& c : build_suite(name, seeds)) {
      EXPECT_NO_THROW(c.validate()) << name << " " << c.setting;
      EXPECT_EQ(c.seeds.size(), 5U);
    }
  }
  EXPECT_THROW(build_suite("house", seeds), ConfigError);
  EXPECT_THROW(build_suite("nope", seeds), ConfigError);
  const RunConfig x = ablation_z_config("(X,Y)");
  EXPECT_EQ(std::get<ScmSource>(x.data).aux, (std::vector<std::string>{"x_v", "x_s", "y"}));
}

TEST(Suites, ChartForKSeries) {
  std::vector<json> recs;
  for (int k : {2, 4}) {
    json r = record("K=" + std::to_string(k), "zin", 0, 0.7);
    recs.push_back(r);
  }
  const auto charts = suite_charts("ablation_k", aggregate(recs));
  ASSERT_EQ(charts.size(), 1U);
  EXPECT_EQ(charts[0].first, "ablation_k.svg");
  EXPECT_NE(charts[0].second.find("\"x\":[2.0,4.0]"), std::string::npos);
}

TEST(Verify, TheoryReportPasses) {
  const VerifyReport r = run_verify();
  EXPECT_TRUE(r.all_pass()) << r.render();
  const std::string text = r.render();
  EXPECT_NE(text.find("impossibility: PASS"), std::string::npos);
  EXPECT_NE(text.find("Z=h(Y): PASS (Condition 1 VIOLATED (C′ = "), std::string::npos);
  EXPECT_NE(text.find("linear: PASS"), std::string::npos);
}

TEST(Pipeline, GenTrainReportIsRepeatable) {
  const RunConfig c = parse_run_config(small_doc());
  const fs::path dir = scratch("pipeline");
  generate(c, 0, (dir / "data").string());
  json d = small_doc();
  d["data"] = {{"kind", "generated"}, {"dir", (dir / "data").string()}};
  d["methods"] = {"erm", "zin"};
  d["seeds"] = {0, 1};
  const RunConfig from_files = parse_run_config(d);
  std::string tables[2];
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path out = dir / ("run" + std::to_string(rep));
    JsonlAppender app((out / "results.jsonl").string());
    ExecOptions opt;
    opt.appender = &app;
    execute({from_files}, opt);
    tables[rep] = aggregate(read_records(out.string()).records).render_text();
  }
  EXPECT_EQ(tables[0], tables[1]);
  EXPECT_NE(tables[0].find("zin"), std::string::npos);
}
