#include "run_config.hpp"

#include <fstream>
#include <sstream>

namespace sigvae::cli {

json default_config() {
  return json{
      {"seed", 0u},
      {"paths", {{"manifest", ""}, {"model", ""}, {"history", ""}, {"out", ""}}},
      {"preprocess",
       {{"target_size", 128u}, {"pad_before_resize", true}, {"binarize", "otsu"}, {"threshold", 0.5}}},
      {"augment",
       {{"max_rotation_deg", 45.0},
        {"intensity_shift_max", 0.2},
        {"width_shift_frac", 0.1},
        {"height_shift_frac", 0.1},
        {"zoom_low", 0.9},
        {"zoom_high", 1.1},
        {"copies_per_image", 16u}}},
      {"synth",
       {{"identities", 4u},
        {"genuine_per_id", 10u},
        {"forged_per_id", 10u},
        {"image_size", 32u},
        {"forgery", "random"},
        {"skilled_jitter", synth::kDefaultSkilledJitter},
        {"pose", {{"rotation_deg", 6.0}, {"scale_range", 0.06}, {"shift", 0.04}}}}},
      {"vae",
       {{"image_size", 128u},
        {"intermediate_dim", 512u},
        {"latent_dim", 256u},
        {"beta", 1.0},
        {"learning_rate", 1e-3},
        {"epochs", 100u},
        {"batch_size", 32u},
        {"anneal", {{"kind", "none"}, {"ramp_epochs", 0u}}}}},
      {"train", {{"one_class", true}, {"identity", ""}}},
      {"classify",
       {{"modes", json::array({"latent", "recon", "both"})},
        {"knn_k", 5u},
        {"genuine_train_fraction", 0.7},
        {"classifier_train_fraction", 0.5},
        {"forest",
         {{"n_trees", 100u}, {"max_depth", 8u}, {"min_leaf", 2u}, {"max_features", 0u}, {"bootstrap", true}}}}},
      {"traverse",
       {{"betas", json::array({1.0, 1.25, 1.5, 1.75, 2.0, 5.0})}, {"lo", -4.0}, {"hi", 4.0}, {"steps", 9u}}},
      {"diagnose", {{"collapse_threshold", 0.01}}},
      {"embed",
       {{"method", "tsne"},
        {"perplexity", 30.0},
        {"iterations", 1000u},
        {"learning_rate", 200.0},
        {"exaggeration", 12.0},
        {"exaggeration_iters", 250u}}},
  };
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const char* kind_name(const json& schema) {
  if (schema.is_boolean()) return "a boolean";
  if (schema.is_number_unsigned()) return "a nonnegative integer";
  if (schema.is_number()) return "a number";
  if (schema.is_string()) return "a string";
  if (schema.is_array()) return "an array";
  return "an object";
}

bool same_kind(const json& value, const json& schema) {
  if (schema.is_boolean()) return value.is_boolean();
  if (schema.is_number_unsigned()) return value.is_number_unsigned();
  if (schema.is_number()) return value.is_number();
  if (schema.is_string()) return value.is_string();
  if (schema.is_array()) return value.is_array();
  return value.is_object();
}

}  // namespace

void check_schema(const json& value, const json& schema, const std::string& prefix) {
  if (!same_kind(value, schema))
    throw ConfigError(prefix.empty() ? "<root>" : prefix, std::string("expected ") + kind_name(schema));
  if (schema.is_object()) {
    for (const auto& [key, v] : value.items()) {
      const auto it = schema.find(key);
      if (it == schema.end()) throw ConfigError(join(prefix, key), "unknown key");
      check_schema(v, *it, join(prefix, key));
    }
  } else if (schema.is_array() && !schema.empty()) {
    for (std::size_t i = 0; i < value.size(); ++i)
      check_schema(value[i], schema.front(), prefix + "[" + std::to_string(i) + "]");
  }
}

void merge_into(json& base, const json& overlay) {
  for (const auto& [key, v] : overlay.items()) {
    if (v.is_object() && base.contains(key) && base[key].is_object())
      merge_into(base[key], v);
    else
      base[key] = v;
  }
}

void set_path(json& doc, const std::string& dotted, json value) {
  json* node = &doc;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1)
    node = &(*node)[dotted.substr(start, dot - start)];
  (*node)[dotted.substr(start)] = std::move(value);
}

namespace {

template <typename Fn>
void validated(Fn&& fn) {
  try {
    fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("", e.what());
  }
}

}  // namespace

RunConfig to_run_config(const json& doc) {
  RunConfig rc;
  rc.seed = doc["seed"].get<std::uint64_t>();

  const json& p = doc["paths"];
  rc.paths = {p["manifest"], p["model"], p["history"], p["out"]};

  const json& pre = doc["preprocess"];
  rc.preprocess.target_size = pre["target_size"];
  rc.preprocess.pad_before_resize = pre["pad_before_resize"];
  const std::string mode = pre["binarize"];
  if (mode == "otsu")
    rc.preprocess.binarize_mode = BinarizeMode::otsu();
  else if (mode == "fixed")
    rc.preprocess.binarize_mode = BinarizeMode::fixed(pre["threshold"]);
  else
    throw ConfigError("preprocess.binarize", "expected \"otsu\" or \"fixed\"");
  validated([&] { rc.preprocess.validate(); });

  const json& a = doc["augment"];
  rc.augment = {a["max_rotation_deg"], a["intensity_shift_max"], a["width_shift_frac"],
                a["height_shift_frac"], a["zoom_low"],           a["zoom_high"],
                a["copies_per_image"]};
  validated([&] { rc.augment.validate(); });

  const json& s = doc["synth"];
  rc.synth_shape.identities = s["identities"];
  rc.synth_shape.genuine_per_id = s["genuine_per_id"];
  rc.synth_shape.forged_per_id = s["forged_per_id"];
  rc.synth_shape.image_size = s["image_size"];
  rc.synth_shape.pose = {s["pose"]["rotation_deg"], s["pose"]["scale_range"], s["pose"]["shift"]};
  const std::string forgery = s["forgery"];
  if (forgery == "random")
    rc.forgery = synth::ForgeryKind::random();
  else if (forgery == "skilled")
    rc.forgery = synth::ForgeryKind::skilled(s["skilled_jitter"]);
  else
    throw ConfigError("synth.forgery", "expected \"random\" or \"skilled\"");
  if (rc.forgery.kind == synth::ForgeryKind::Kind::skilled && !(rc.forgery.scale > synth::kGenuineJitter))
    throw ConfigError("synth.skilled_jitter", "must exceed the genuine jitter " +
                                                  std::to_string(synth::kGenuineJitter));
  if (rc.synth_shape.identities < 1 || rc.synth_shape.genuine_per_id < 1 || rc.synth_shape.forged_per_id < 1)
    throw ConfigError("synth", "identities, genuine_per_id and forged_per_id must be >= 1");
  if (rc.synth_shape.image_size < 8) throw ConfigError("synth.image_size", "must be >= 8");

  const json& v = doc["vae"];
  rc.image_size = v["image_size"];
  if (rc.image_size < 1) throw ConfigError("vae.image_size", "must be >= 1");
  rc.vae.input_dim = rc.image_size * rc.image_size;
  rc.vae.intermediate_dim = v["intermediate_dim"];
  rc.vae.latent_dim = v["latent_dim"];
  rc.vae.beta = v["beta"];
  rc.vae.learning_rate = v["learning_rate"];
  rc.vae.epochs = v["epochs"];
  rc.vae.batch_size = v["batch_size"];
  rc.vae.seed = rc.seed;
  const std::string anneal = v["anneal"]["kind"];
  if (anneal == "none")
    rc.vae.anneal = vae::Anneal::none();
  else if (anneal == "linear")
    rc.vae.anneal = vae::Anneal::linear(v["anneal"]["ramp_epochs"]);
  else
    throw ConfigError("vae.anneal.kind", "expected \"none\" or \"linear\"");
  validated([&] { rc.vae.validate(); });

  rc.one_class = doc["train"]["one_class"];
  rc.identity = doc["train"]["identity"];

  const json& c = doc["classify"];
  rc.protocol.vae = rc.vae;
  rc.protocol.modes.clear();
  for (std::size_t i = 0; i < c["modes"].size(); ++i) {
    const auto m = classify::parse_feature_mode(c["modes"][i].get<std::string>());
    if (!m) throw ConfigError("classify.modes[" + std::to_string(i) + "]", "expected latent, recon or both");
    rc.protocol.modes.push_back(*m);
  }
  rc.protocol.knn_k = c["knn_k"];
  rc.protocol.genuine_train_fraction = c["genuine_train_fraction"];
  rc.protocol.classifier_train_fraction = c["classifier_train_fraction"];
  const json& f = c["forest"];
  rc.protocol.forest = {f["n_trees"], f["max_depth"], f["min_leaf"], f["max_features"], f["bootstrap"]};
  rc.protocol.split_seed = rc.seed;
  validated([&] { rc.protocol.validate(); });

  const json& t = doc["traverse"];
  rc.traverse.betas = t["betas"].get<std::vector<double>>();
  rc.traverse.lo = t["lo"];
  rc.traverse.hi = t["hi"];
  rc.traverse.steps = t["steps"];
  if (rc.traverse.betas.empty()) throw ConfigError("traverse.betas", "must not be empty");
  for (std::size_t i = 0; i < rc.traverse.betas.size(); ++i)
    if (!(rc.traverse.betas[i] >= 0.0))
      throw ConfigError("traverse.betas[" + std::to_string(i) + "]", "must be >= 0");
  if (!(rc.traverse.lo <= rc.traverse.hi)) throw ConfigError("traverse.lo", "must not exceed traverse.hi");
  if (rc.traverse.steps < 1) throw ConfigError("traverse.steps", "must be >= 1");

  rc.collapse_threshold = doc["diagnose"]["collapse_threshold"];
  if (!(rc.collapse_threshold > 0.0)) throw ConfigError("diagnose.collapse_threshold", "must be > 0");

  const json& e = doc["embed"];
  rc.embed.method = e["method"];
  if (rc.embed.method != "tsne" && rc.embed.method != "pca")
    throw ConfigError("embed.method", "expected \"tsne\" or \"pca\"");
  rc.embed.tsne.perplexity = e["perplexity"];
  rc.embed.tsne.iterations = e["iterations"];
  rc.embed.tsne.learning_rate = e["learning_rate"];
  rc.embed.tsne.exaggeration = e["exaggeration"];
  rc.embed.tsne.exaggeration_iters = e["exaggeration_iters"];
  if (!(rc.embed.tsne.perplexity > 0.0)) throw ConfigError("embed.perplexity", "must be > 0");
  if (!(rc.embed.tsne.learning_rate > 0.0)) throw ConfigError("embed.learning_rate", "must be > 0");
  return rc;
}

}  // namespace sigvae::cli
