#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbrl/meta_opt.hpp"
#include "mbrl/slbo.hpp"

namespace mbrl {

using Json = nlohmann::json;

/// Settings of the tabular lower-bound iteration run by the `meta` command.
struct MetaConfig {
  int states = 5;
  int actions = 3;
  double gamma = 0.9;
  double delta = 0.1;
  int iters = 25;
  int family_size = 8;
  BoundKind bound = BoundKind::G;
  std::uint64_t seed = 0;
};

void validate(const MetaConfig& cfg);

/// Field names in declaration order.
const std::vector<std::string>& slbo_config_fields();
const std::vector<std::string>& meta_config_fields();

Json to_json(const SlboConfig& cfg);
Json to_json(const MetaConfig& cfg);

/// Applies every key of `doc` on top of `base`. Unknown keys and ill-typed
/// values throw std::invalid_argument naming the key.
SlboConfig slbo_config_from_json(const Json& doc, SlboConfig base = {});
MetaConfig meta_config_from_json(const Json& doc, MetaConfig base = {});

/// Sets one field from command-line text. Numbers parse as JSON; list fields
/// accept "64,64" or "[64,64]"; enum fields take their names.
void set_field(SlboConfig& cfg, const std::string& field, const std::string& text);
void set_field(MetaConfig& cfg, const std::string& field, const std::string& text);

/// Reads a JSON document; parse errors become std::invalid_argument with the
/// path, line and column.
Json read_json_file(const std::string& path);
Json parse_json_text(const std::string& text, const std::string& source);

SlboConfig load_slbo_config(const std::string& path);
MetaConfig load_meta_config(const std::string& path);

/// snake_case -> kebab-case.
std::string kebab(const std::string& field);

struct RunManifest {
  std::string subcommand;
  Json config;
  std::uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
  Json summary;
};

Json to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& doc);

/// UTC time as an ISO 8601 string.
std::string utc_timestamp();
std::string code_version();

}  // namespace mbrl
