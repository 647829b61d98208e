#pragma once
// Run configuration: a JSON document whose defaults double as its schema.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sigvae/augment.hpp"
#include "sigvae/embed.hpp"
#include "sigvae/image.hpp"
#include "sigvae/protocol.hpp"
#include "sigvae/synth.hpp"
#include "sigvae/vae.hpp"

namespace sigvae::cli {

using nlohmann::json;

/// Schema or value error at a dotted field path; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Every accepted key with its default value.
json default_config();

/// Parses a config file. Syntax errors raise ConfigError.
json read_config_file(const std::filesystem::path& path);

/// Rejects keys absent from the schema and values of the wrong JSON type.
void check_schema(const json& value, const json& schema, const std::string& prefix = "");

/// Recursively overlays `overlay` onto `base`; arrays are replaced whole.
void merge_into(json& base, const json& overlay);

/// Sets a dotted path, e.g. "vae.beta".
void set_path(json& doc, const std::string& dotted, json value);

struct TraverseSettings {
  std::vector<double> betas;
  double lo = -4.0;
  double hi = 4.0;
  std::size_t steps = 9;
};

struct EmbedSettings {
  std::string method = "tsne";
  diagnostics::TsneConfig tsne;
};

struct Paths {
  std::string manifest;
  std::string model;
  std::string history;
  std::string out;
};

struct RunConfig {
  std::uint64_t seed = 0;
  Paths paths;
  PreprocessConfig preprocess;
  AugmentConfig augment;
  synth::DatasetShape synth_shape;
  synth::ForgeryKind forgery = synth::ForgeryKind::random();
  std::size_t image_size = 128;
  vae::VaeConfig vae;
  bool one_class = true;
  std::string identity;
  classify::ProtocolConfig protocol;
  TraverseSettings traverse;
  double collapse_threshold = 0.01;
  EmbedSettings embed;
};

/// Converts a schema-checked, fully merged document; range errors raise
/// ConfigError naming the field.
RunConfig to_run_config(const json& doc);

}  // namespace sigvae::cli
