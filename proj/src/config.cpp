#include "mbrl/config.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifndef MBRL_VERSION
#define MBRL_VERSION "unknown"
#endif

namespace mbrl {

namespace {

[[noreturn]] void bad_field(const std::string& name, const std::string& what) {
  throw std::invalid_argument("config field '" + name + "' " + what);
}

int as_int(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) bad_field(name, "must be an integer");
  const auto v = j.get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) bad_field(name, "is out of range");
  return static_cast<int>(v);
}

double as_double(const Json& j, const std::string& name) {
  if (!j.is_number()) bad_field(name, "must be a number");
  return j.get<double>();
}

std::uint64_t as_u64(const Json& j, const std::string& name) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  bad_field(name, "must be a non-negative integer");
}

std::vector<int> as_int_list(const Json& j, const std::string& name) {
  if (!j.is_array()) bad_field(name, "must be an array of integers");
  std::vector<int> out;
  for (const auto& x : j) out.push_back(as_int(x, name));
  return out;
}

std::string as_string(const Json& j, const std::string& name) {
  if (!j.is_string()) bad_field(name, "must be a string");
  return j.get<std::string>();
}

template <class T>
struct Field {
  std::string name;
  std::function<Json(const T&)> get;
  std::function<void(T&, const Json&)> set;
  bool is_list = false;
};

#define INT_FIELD(T, f) \
  Field<T> { #f, [](const T& c) { return Json(c.f); }, [](T& c, const Json& j) { c.f = as_int(j, #f); } }
#define DOUBLE_FIELD(T, f) \
  Field<T> { #f, [](const T& c) { return Json(c.f); }, [](T& c, const Json& j) { c.f = as_double(j, #f); } }
#define LIST_FIELD(T, f)                                                                               \
  Field<T> {                                                                                           \
    #f, [](const T& c) { return Json(c.f); }, [](T& c, const Json& j) { c.f = as_int_list(j, #f); }, true \
  }

const std::vector<Field<SlboConfig>>& slbo_fields() {
  using C = SlboConfig;
  static const std::vector<Field<C>> fields{
      INT_FIELD(C, n_outer),
      INT_FIELD(C, n_inner),
      INT_FIELD(C, n_model),
      INT_FIELD(C, n_policy),
      INT_FIELD(C, n_collect),
      INT_FIELD(C, n_trpo),
      INT_FIELD(C, H),
      DOUBLE_FIELD(C, lambda_entropy),
      DOUBLE_FIELD(C, max_kl),
      DOUBLE_FIELD(C, gamma),
      DOUBLE_FIELD(C, gae_lambda),
      INT_FIELD(C, cg_iters),
      DOUBLE_FIELD(C, cg_damping),
      DOUBLE_FIELD(C, ou_theta),
      DOUBLE_FIELD(C, ou_sigma),
      DOUBLE_FIELD(C, model_lr),
      DOUBLE_FIELD(C, model_l2),
      INT_FIELD(C, batch_size),
      Field<C>{"loss_kind", [](const C& c) { return Json(to_string(c.loss_kind)); },
               [](C& c, const Json& j) { c.loss_kind = parse_model_loss(as_string(j, "loss_kind")); }},
      Field<C>{"seed", [](const C& c) { return Json(c.seed); },
               [](C& c, const Json& j) { c.seed = as_u64(j, "seed"); }},
      DOUBLE_FIELD(C, model_loss_weight),
      LIST_FIELD(C, model_hidden),
      LIST_FIELD(C, policy_hidden),
      LIST_FIELD(C, value_hidden),
      DOUBLE_FIELD(C, init_log_std),
      DOUBLE_FIELD(C, value_lr),
      INT_FIELD(C, value_steps),
      INT_FIELD(C, value_batch),
      INT_FIELD(C, eval_episodes),
  };
  return fields;
}

const std::vector<Field<MetaConfig>>& meta_fields() {
  using C = MetaConfig;
  static const std::vector<Field<C>> fields{
      INT_FIELD(C, states),
      INT_FIELD(C, actions),
      DOUBLE_FIELD(C, gamma),
      DOUBLE_FIELD(C, delta),
      INT_FIELD(C, iters),
      INT_FIELD(C, family_size),
      Field<C>{"bound", [](const C& c) { return Json(to_string(c.bound)); },
               [](C& c, const Json& j) { c.bound = parse_bound_kind(as_string(j, "bound")); }},
      Field<C>{"seed", [](const C& c) { return Json(c.seed); },
               [](C& c, const Json& j) { c.seed = as_u64(j, "seed"); }},
  };
  return fields;
}

#undef INT_FIELD
#undef DOUBLE_FIELD
#undef LIST_FIELD

template <class T>
const Field<T>& find_field(const std::vector<Field<T>>& fields, const std::string& name) {
  for (const auto& f : fields)
    if (f.name == name) return f;
  throw std::invalid_argument("unknown config key '" + name + "'");
}

template <class T>
Json fields_to_json(const std::vector<Field<T>>& fields, const T& cfg) {
  Json out = Json::object();
  for (const auto& f : fields) out[f.name] = f.get(cfg);
  return out;
}

template <class T>
T fields_from_json(const std::vector<Field<T>>& fields, const Json& doc, T cfg) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) find_field(fields, key).set(cfg, value);
  return cfg;
}

template <class T>
void set_from_text(const std::vector<Field<T>>& fields, T& cfg, const std::string& name, const std::string& text) {
  const Field<T>& f = find_field(fields, name);
  Json value;
  if (f.is_list && (text.empty() || text.front() != '[')) {
    value = Json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const Json x = Json::parse(item, nullptr, false);
      if (x.is_discarded()) bad_field(name, "must be a list of integers");
      value.push_back(x);
    }
  } else {
    value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
  }
  f.set(cfg, value);
}

template <class T>
std::vector<std::string> names_of(const std::vector<Field<T>>& fields) {
  std::vector<std::string> out;
  for (const auto& f : fields) out.push_back(f.name);
  return out;
}

}  // namespace

void validate(const MetaConfig& cfg) {
  if (cfg.states < 1) bad_field("states", "must be >= 1");
  if (cfg.actions < 1) bad_field("actions", "must be >= 1");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) bad_field("gamma", "must lie in (0, 1)");
  if (!(cfg.delta >= 0.0)) bad_field("delta", "must be >= 0");
  if (cfg.iters < 0) bad_field("iters", "must be >= 0");
  if (cfg.family_size < 1) bad_field("family_size", "must be >= 1");
}

const std::vector<std::string>& slbo_config_fields() {
  static const std::vector<std::string> names = names_of(slbo_fields());
  return names;
}

const std::vector<std::string>& meta_config_fields() {
  static const std::vector<std::string> names = names_of(meta_fields());
  return names;
}

Json to_json(const SlboConfig& cfg) { return fields_to_json(slbo_fields(), cfg); }
Json to_json(const MetaConfig& cfg) { return fields_to_json(meta_fields(), cfg); }

SlboConfig slbo_config_from_json(const Json& doc, SlboConfig base) {
  return fields_from_json(slbo_fields(), doc, std::move(base));
}

MetaConfig meta_config_from_json(const Json& doc, MetaConfig base) {
  return fields_from_json(meta_fields(), doc, std::move(base));
}

void set_field(SlboConfig& cfg, const std::string& field, const std::string& text) {
  set_from_text(slbo_fields(), cfg, field, text);
}

void set_field(MetaConfig& cfg, const std::string& field, const std::string& text) {
  set_from_text(meta_fields(), cfg, field, text);
}

Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

SlboConfig load_slbo_config(const std::string& path) {
  try {
    SlboConfig cfg = slbo_config_from_json(read_json_file(path));
    validate(cfg);
    return cfg;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0 || msg.find("cannot open") != std::string::npos) throw;
    throw std::invalid_argument(path + ": " + msg);
  }
}

MetaConfig load_meta_config(const std::string& path) {
  try {
    MetaConfig cfg = meta_config_from_json(read_json_file(path));
    validate(cfg);
    return cfg;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0 || msg.find("cannot open") != std::string::npos) throw;
    throw std::invalid_argument(path + ": " + msg);
  }
}

std::string kebab(const std::string& field) {
  std::string out = field;
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

Json to_json(const RunManifest& m) {
  return Json{{"subcommand", m.subcommand}, {"config", m.config},     {"seed", m.seed},
              {"version", m.version},       {"started", m.started},   {"finished", m.finished},
              {"summary", m.summary}};
}

RunManifest manifest_from_json(const Json& doc) {
  RunManifest m;
  m.subcommand = doc.at("subcommand").get<std::string>();
  m.config = doc.at("config");
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.version = doc.at("version").get<std::string>();
  m.started = doc.at("started").get<std::string>();
  m.finished = doc.at("finished").get<std::string>();
  m.summary = doc.at("summary");
  return m;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string code_version() { return MBRL_VERSION; }

}  // namespace mbrl
