#include "zin/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "zin/common/errors.hpp"
#include "zin/harness/digest.hpp"

namespace zin::harness {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw SchemaError(path + ": " + what); }

std::string child(const std::string& path, const std::string& key) { return path + "." + key; }

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void allow_only(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) fail(child(path, key), "unknown key");
}

const json* find(const json& j, const std::string& key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double number(const json& j, const std::string& key, const std::string& path, std::optional<double> fallback) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) fail(child(path, key), "missing required key");
    return *fallback;
  }
  if (!v->is_number()) fail(child(path, key), "expected a number");
  return v->get<double>();
}

long integer(const json& j, const std::string& key, const std::string& path, std::optional<long> fallback,
             long min_value) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) fail(child(path, key), "missing required key");
    return *fallback;
  }
  if (!v->is_number_integer()) fail(child(path, key), "expected an integer");
  const long out = v->get<long>();
  if (out < min_value) fail(child(path, key), "must be >= " + std::to_string(min_value));
  return out;
}

std::string text(const json& j, const std::string& key, const std::string& path,
                 std::optional<std::string> fallback) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) fail(child(path, key), "missing required key");
    return *fallback;
  }
  if (!v->is_string()) fail(child(path, key), "expected a string");
  return v->get<std::string>();
}

bool boolean(const json& j, const std::string& key, const std::string& path, bool fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(child(path, key), "expected true or false");
  return v->get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& key, const std::string& path,
                            std::optional<std::vector<double>> fallback) {
  const json* v = find(j, key);
  if (!v) {
    if (!fallback) fail(child(path, key), "missing required key");
    return *fallback;
  }
  if (!v->is_array()) fail(child(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number()) fail(child(path, key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

std::vector<std::string> strings(const json& j, const std::string& key, const std::string& path) {
  const json* v = find(j, key);
  if (!v) return {};
  if (!v->is_array()) fail(child(path, key), "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_string()) fail(child(path, key) + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back((*v)[i].get<std::string>());
  }
  return out;
}

std::vector<std::size_t> widths(const json& j, const std::string& key, const std::string& path,
                                std::vector<std::size_t> fallback) {
  const json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_array()) fail(child(path, key), "expected an array of positive integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const json& e = (*v)[i];
    if (!e.is_number_integer() || e.get<long>() < 1)
      fail(child(path, key) + "[" + std::to_string(i) + "]", "expected a positive integer");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

data::Interval interval(const json& j, const std::string& key, const std::string& path) {
  const std::string t = text(j, key, path, std::nullopt);
  return wrap(child(path, key), [&] { return data::Interval::parse(t); });
}

std::optional<std::pair<double, double>> range_of(const json& j, const std::string& key, const std::string& path) {
  if (!find(j, key)) return std::nullopt;
  const auto v = numbers(j, key, path, std::nullopt);
  if (v.size() != 2 || !(v[0] < v[1])) fail(child(path, key), "expected [lo, hi] with lo < hi");
  return std::make_pair(v[0], v[1]);
}

EnvSegments segments(const json& j, const std::string& path) {
  require_object(j, path);
  allow_only(j, path, {"column", "count", "range"});
  EnvSegments s;
  s.column = text(j, "column", path, std::nullopt);
  s.count = static_cast<int>(integer(j, "count", path, 5, 2));
  s.range = range_of(j, "range", path);
  return s;
}

json segments_to_json(const EnvSegments& s) {
  json j{{"column", s.column}, {"count", s.count}};
  if (s.range) j["range"] = {s.range->first, s.range->second};
  return j;
}

void check_probability(double p, const std::string& path) {
  if (!(p >= 0.0 && p <= 1.0)) fail(path, "probability must lie in [0, 1]");
}

DataSource parse_data(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string kind = text(j, "kind", path, std::nullopt);
  if (kind == "csv") {
    allow_only(j, path, {"kind", "path", "columns", "normalize_within", "split", "train_envs", "test_envs"});
    CsvSource s;
    s.path = text(j, "path", path, std::nullopt);
    const json* cols = find(j, "columns");
    if (!cols || !cols->is_array() || cols->empty()) fail(child(path, "columns"), "expected a non-empty array");
    for (std::size_t i = 0; i < cols->size(); ++i) {
      const std::string cp = child(path, "columns") + "[" + std::to_string(i) + "]";
      const json& c = (*cols)[i];
      require_object(c, cp);
      allow_only(c, cp, {"name", "role", "type"});
      data::ColumnSpec spec;
      spec.name = text(c, "name", cp, std::nullopt);
      const std::string role = text(c, "role", cp, "feature");
      const std::string type = text(c, "type", cp, "numeric");
      spec.role = wrap(cp + ".role", [&] { return data::parse_role(role); });
      spec.type = wrap(cp + ".type", [&] { return data::parse_column_type(type); });
      s.schema.columns.push_back(spec);
    }
    wrap(child(path, "columns"), [&] { s.schema.validate(); });
    if (find(j, "normalize_within")) s.normalize_within = text(j, "normalize_within", path, std::nullopt);
    const json* split = find(j, "split");
    if (!split) fail(child(path, "split"), "missing required key");
    const std::string sp = child(path, "split");
    require_object(*split, sp);
    allow_only(*split, sp, {"column", "train", "test"});
    s.split_column = text(*split, "column", sp, std::nullopt);
    s.train_range = interval(*split, "train", sp);
    s.test_range = interval(*split, "test", sp);
    if (data::overlaps(s.train_range, s.test_range)) fail(sp, "train and test ranges overlap");
    if (const json* e = find(j, "train_envs")) s.train_envs = segments(*e, child(path, "train_envs"));
    if (const json* e = find(j, "test_envs")) s.test_envs = segments(*e, child(path, "test_envs"));
    return s;
  }
  if (kind == "generated") {
    allow_only(j, path, {"kind", "dir"});
    return GeneratedSource{text(j, "dir", path, std::nullopt)};
  }
  allow_only(j, path, {"kind", "p_v", "p_s", "sigma", "n", "seed", "aux"});
  ScmSource s;
  s.kind = wrap(child(path, "kind"), [&] { return parse_source_kind(kind); });
  const bool feature = s.kind == SourceKind::kCmnist || s.kind == SourceKind::kMcolor;
  s.p_v = number(j, "p_v", path, feature ? (s.kind == SourceKind::kCmnist ? 0.75 : 0.85) : 0.9);
  if (feature && find(j, "p_v")) fail(child(path, "p_v"), "fixed by the feature-level mechanism");
  if (!feature && !(s.p_v > 0.5 && s.p_v <= 1.0)) fail(child(path, "p_v"), "must lie in (0.5, 1]");
  s.p_s = numbers(j, "p_s", path, std::nullopt);
  if (s.p_s.empty()) fail(child(path, "p_s"), "needs at least one value");
  for (std::size_t i = 0; i < s.p_s.size(); ++i)
    check_probability(s.p_s[i], child(path, "p_s") + "[" + std::to_string(i) + "]");
  if (s.kind == SourceKind::kSpatial && s.p_s.size() != 4) fail(child(path, "p_s"), "spatial data needs 4 values");
  s.sigma = number(j, "sigma", path, 0.5);
  if (!(s.sigma > 0.0)) fail(child(path, "sigma"), "must be positive");
  s.n = static_cast<std::size_t>(integer(j, "n", path, feature ? 1000 : 2000, 1));
  s.seed = static_cast<std::uint64_t>(integer(j, "seed", path, 100, 0));
  s.aux = strings(j, "aux", path);
  return s;
}

json data_to_json(const DataSource& d) {
  if (const auto* s = std::get_if<ScmSource>(&d)) {
    json j{{"kind", to_string(s->kind)}, {"p_s", s->p_s}, {"n", s->n}, {"seed", s->seed}};
    if (s->kind == SourceKind::kTemporal || s->kind == SourceKind::kSpatial) {
      j["p_v"] = s->p_v;
      j["sigma"] = s->sigma;
    }
    if (!s->aux.empty()) j["aux"] = s->aux;
    return j;
  }
  if (const auto* g = std::get_if<GeneratedSource>(&d)) return json{{"kind", "generated"}, {"dir", g->dir}};
  const auto& c = std::get<CsvSource>(d);
  json cols = json::array();
  for (const auto& col : c.schema.columns)
    cols.push_back({{"name", col.name}, {"role", data::to_string(col.role)}, {"type", data::to_string(col.type)}});
  json j{{"kind", "csv"},
         {"path", c.path},
         {"columns", cols},
         {"split",
          {{"column", c.split_column}, {"train", c.train_range.to_string()}, {"test", c.test_range.to_string()}}}};
  if (c.normalize_within) j["normalize_within"] = *c.normalize_within;
  if (c.train_envs) j["train_envs"] = segments_to_json(*c.train_envs);
  if (c.test_envs) j["test_envs"] = segments_to_json(*c.test_envs);
  return j;
}

}  // namespace

SourceKind parse_source_kind(const std::string& name) {
  if (name == "temporal") return SourceKind::kTemporal;
  if (name == "spatial") return SourceKind::kSpatial;
  if (name == "cmnist") return SourceKind::kCmnist;
  if (name == "mcolor") return SourceKind::kMcolor;
  throw ConfigError("unknown data kind '" + name + "' (expected temporal, spatial, cmnist, mcolor, csv or generated)");
}

std::string to_string(SourceKind k) {
  switch (k) {
    case SourceKind::kTemporal: return "temporal";
    case SourceKind::kSpatial: return "spatial";
    case SourceKind::kCmnist: return "cmnist";
    case SourceKind::kMcolor: return "mcolor";
  }
  return "?";
}

bool RunConfig::has_aux() const {
  if (const auto* s = std::get_if<ScmSource>(&data)) {
    if (s->aux.empty()) return s->kind == SourceKind::kTemporal || s->kind == SourceKind::kSpatial;
    return true;
  }
  if (const auto* c = std::get_if<CsvSource>(&data))
    return std::any_of(c->schema.columns.begin(), c->schema.columns.end(),
                       [](const data::ColumnSpec& s) { return s.role == data::ColumnRole::kAuxiliary; });
  return true;
}

bool RunConfig::has_env() const {
  if (const auto* c = std::get_if<CsvSource>(&data)) {
    return c->train_envs.has_value() ||
           std::any_of(c->schema.columns.begin(), c->schema.columns.end(),
                       [](const data::ColumnSpec& s) { return s.role == data::ColumnRole::kEnv; });
  }
  return true;
}

void RunConfig::validate() const {
  train.validate();
  if (methods.empty()) throw ConfigError("no methods requested");
  if (seeds.empty()) throw ConfigError("no seeds requested");
  for (inv::Method m : methods) {
    if (m == inv::Method::kZin && !has_aux())
      throw ConfigError("zin needs auxiliary information but the data source has no Z columns");
    if ((m == inv::Method::kIrmOracle || m == inv::Method::kGroupDro) && !has_env())
      throw ConfigError(inv::to_string(m) + " needs environment ids but the data source has none");
  }
  if (const auto* s = std::get_if<ScmSource>(&data)) {
    const bool feature = s->kind == SourceKind::kCmnist || s->kind == SourceKind::kMcolor;
    if (feature && test.p_s.size() != 1) throw ConfigError("feature-level data takes exactly one test p_s");
    if (train.loss != inv::LossKind::kCrossEntropy) throw ConfigError("synthetic data has binary labels; use ce loss");
  }
}

inv::TrainConfig train_config_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  allow_only(j, path,
             {"lambda", "k", "epochs", "anneal_epochs", "lr", "rho_lr", "rho_restarts", "rho_warmup", "loss",
              "batch_size", "hidden", "rho_hidden", "activation", "dro_eta", "eiil_steps", "eiil_lr", "log_every",
              "track_adversary"});
  inv::TrainConfig c;
  c.lambda = number(j, "lambda", path, c.lambda);
  c.k = static_cast<int>(integer(j, "k", path, c.k, 2));
  c.epochs = integer(j, "epochs", path, c.epochs, 1);
  c.anneal_epochs = integer(j, "anneal_epochs", path, std::min(c.anneal_epochs, c.epochs), 0);
  if (c.anneal_epochs > c.epochs) fail(child(path, "anneal_epochs"), "must not exceed epochs");
  c.lr = number(j, "lr", path, c.lr);
  c.rho_lr = number(j, "rho_lr", path, c.rho_lr);
  c.rho_restarts = static_cast<int>(integer(j, "rho_restarts", path, c.rho_restarts, 1));
  c.rho_warmup = integer(j, "rho_warmup", path, c.rho_warmup, 0);
  const std::string loss = text(j, "loss", path, ad::to_string(c.loss));
  c.loss = wrap(child(path, "loss"), [&] { return ad::parse_loss_kind(loss); });
  c.batch_size = static_cast<std::size_t>(integer(j, "batch_size", path, 0, 0));
  c.hidden = widths(j, "hidden", path, c.hidden);
  c.rho_hidden = widths(j, "rho_hidden", path, c.rho_hidden);
  const std::string act = text(j, "activation", path, ad::to_string(c.activation));
  c.activation = wrap(child(path, "activation"), [&] { return ad::parse_activation(act); });
  c.dro_eta = number(j, "dro_eta", path, c.dro_eta);
  c.eiil_steps = integer(j, "eiil_steps", path, c.eiil_steps, 0);
  c.eiil_lr = number(j, "eiil_lr", path, c.eiil_lr);
  c.log_every = integer(j, "log_every", path, c.log_every, 1);
  c.track_adversary = boolean(j, "track_adversary", path, false);
  wrap(path, [&] { c.validate(); });
  return c;
}

json train_config_to_json(const inv::TrainConfig& c) {
  return json{{"lambda", c.lambda},
              {"k", c.k},
              {"epochs", c.epochs},
              {"anneal_epochs", c.anneal_epochs},
              {"lr", c.lr},
              {"rho_lr", c.rho_lr},
              {"rho_restarts", c.rho_restarts},
              {"rho_warmup", c.rho_warmup},
              {"loss", ad::to_string(c.loss)},
              {"batch_size", c.batch_size},
              {"hidden", c.hidden},
              {"rho_hidden", c.rho_hidden},
              {"activation", ad::to_string(c.activation)},
              {"dro_eta", c.dro_eta},
              {"eiil_steps", c.eiil_steps},
              {"eiil_lr", c.eiil_lr},
              {"log_every", c.log_every}};
}

RunConfig parse_run_config(const json& doc) {
  const std::string root = "$";
  require_object(doc, root);
  allow_only(doc, root, {"name", "setting", "data", "test", "methods", "method", "train", "seeds", "out"});
  RunConfig c;
  c.name = text(doc, "name", root, c.name);
  if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
    fail("$.name", "must be a non-empty name without path separators");
  c.setting = text(doc, "setting", root, c.setting);
  const json* d = find(doc, "data");
  if (!d) fail("$.data", "missing required key");
  c.data = parse_data(*d, "$.data");
  if (const json* t = find(doc, "test")) {
    require_object(*t, "$.test");
    allow_only(*t, "$.test", {"p_s", "n", "seed"});
    c.test.p_s = numbers(*t, "p_s", "$.test", c.test.p_s);
    for (std::size_t i = 0; i < c.test.p_s.size(); ++i)
      check_probability(c.test.p_s[i], "$.test.p_s[" + std::to_string(i) + "]");
    c.test.n = static_cast<std::size_t>(integer(*t, "n", "$.test", static_cast<long>(c.test.n), 1));
    c.test.seed = static_cast<std::uint64_t>(integer(*t, "seed", "$.test", static_cast<long>(c.test.seed), 0));
  }
  if (find(doc, "method") && find(doc, "methods")) fail("$.method", "give either method or methods");
  std::vector<std::string> names;
  if (find(doc, "method")) {
    names = {text(doc, "method", root, std::nullopt)};
  } else if (find(doc, "methods")) {
    names = strings(doc, "methods", root);
    if (names.empty()) fail("$.methods", "needs at least one method");
  }
  if (!names.empty()) {
    c.methods.clear();
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::string p = find(doc, "method") ? "$.method" : "$.methods[" + std::to_string(i) + "]";
      c.methods.push_back(wrap(p, [&] { return inv::parse_method(names[i]); }));
    }
  }
  if (const json* t = find(doc, "train")) c.train = train_config_from_json(*t, "$.train");
  if (const json* s = find(doc, "seeds")) {
    if (!s->is_array() || s->empty()) fail("$.seeds", "expected a non-empty array of seeds");
    c.seeds.clear();
    for (std::size_t i = 0; i < s->size(); ++i) {
      const json& v = (*s)[i];
      if (!v.is_number_integer() || v.get<long long>() < 0) fail("$.seeds[" + std::to_string(i) + "]", "expected a seed >= 0");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  c.out = text(doc, "out", root, "");
  wrap("$", [&] { c.validate(); });
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& c) {
  json methods = json::array();
  for (inv::Method m : c.methods) methods.push_back(inv::to_string(m));
  json j{{"name", c.name},
         {"setting", c.setting},
         {"data", data_to_json(c.data)},
         {"methods", methods},
         {"train", train_config_to_json(c.train)},
         {"seeds", c.seeds}};
  if (std::holds_alternative<ScmSource>(c.data))
    j["test"] = {{"p_s", c.test.p_s}, {"n", c.test.n}, {"seed", c.test.seed}};
  if (!c.out.empty()) j["out"] = c.out;
  return j;
}

std::string config_hash(const RunConfig& c) {
  const json j = to_json(c);
  json key{{"data", j["data"]}, {"train", j["train"]}};
  if (j.contains("test")) key["test"] = j["test"];
  return sha256_hex(key.dump()).substr(0, 16);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  auto parse = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("bad seed '" + s + "' in '" + text + "'");
    return std::stoull(s);
  };
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse(item));
      continue;
    }
    const std::uint64_t lo = parse(item.substr(0, dash)), hi = parse(item.substr(dash + 1));
    if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no seeds in '" + text + "'");
  return out;
}

}  // namespace zin::harness
