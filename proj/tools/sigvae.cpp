// sigvae command-line driver. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "run_config.hpp"
#include "sigvae/checkpoint.hpp"
#include "sigvae/diagnostics.hpp"
#include "sigvae/embed.hpp"
#include "sigvae/manifest.hpp"
#include "sigvae/parallel.hpp"
#include "sigvae/pnm.hpp"
#include "sigvae/textio.hpp"

namespace fs = std::filesystem;
using namespace sigvae;
using sigvae::cli::ConfigError;
using sigvae::cli::json;
using sigvae::cli::RunConfig;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Outcome of one subcommand; files are absolute or out-relative paths.
struct Outcome {
  std::vector<fs::path> files;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;
};

// Flag overrides applied on top of the config document.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& path,
                   const std::string& help) {
    auto holder = std::make_shared<std::optional<T>>();
    setters_.push_back([holder, path](json& doc) {
      if (holder->has_value()) cli::set_path(doc, path, json(**holder));
    });
    return app->add_option(flag, *holder, help);
  }

  template <typename T>
  CLI::Option* add_list(CLI::App* app, const std::string& flag, const std::string& path,
                        const std::string& help) {
    auto holder = std::make_shared<std::vector<T>>();
    setters_.push_back([holder, path](json& doc) {
      if (!holder->empty()) cli::set_path(doc, path, json(*holder));
    });
    return app->add_option(flag, *holder, help)->delimiter(',');
  }

  void add_switch(CLI::App* app, const std::string& on, const std::string& off,
                  const std::string& path, const std::string& help) {
    auto holder = std::make_shared<std::optional<bool>>();
    setters_.push_back([holder, path](json& doc) {
      if (holder->has_value()) cli::set_path(doc, path, json(**holder));
    });
    app->add_flag_callback(on, [holder] { *holder = true; }, help);
    app->add_flag_callback(off, [holder] { *holder = false; }, "Negates " + on);
  }

  void apply(json& doc) const {
    for (const auto& s : setters_) s(doc);
  }

 private:
  std::vector<std::function<void(json&)>> setters_;
};

void common_flags(CLI::App* sub, Overrides& ov, std::string& config_path) {
  sub->add_option("--config", config_path, "JSON run configuration");
  ov.add<std::uint64_t>(sub, "--seed", "seed", "Master seed");
  ov.add<std::string>(sub, "--out", "paths.out", "Output directory");
}

void vae_flags(CLI::App* sub, Overrides& ov) {
  ov.add<std::size_t>(sub, "--image-size", "vae.image_size", "Square input side in pixels");
  ov.add<std::size_t>(sub, "--intermediate-dim", "vae.intermediate_dim", "Hidden layer width");
  ov.add<std::size_t>(sub, "--latent-dim", "vae.latent_dim", "Latent dimension");
  ov.add<double>(sub, "--beta", "vae.beta", "KL weight");
  ov.add<double>(sub, "--learning-rate", "vae.learning_rate", "Adam step size");
  ov.add<std::size_t>(sub, "--epochs", "vae.epochs", "Training epochs");
  ov.add<std::size_t>(sub, "--batch-size", "vae.batch_size", "Mini-batch size");
  ov.add<std::string>(sub, "--anneal", "vae.anneal.kind", "KL annealing: none or linear");
  ov.add<std::size_t>(sub, "--anneal-ramp", "vae.anneal.ramp_epochs", "Epochs of the linear ramp");
}

int thread_cap_from_env() {
  const char* env = std::getenv("SIGVAE_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  const std::string s(env);
  if (!std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }) || s.size() > 6)
    throw UsageError("SIGVAE_THREADS must be a nonnegative integer, got '" + s + "'");
  return std::stoi(s);
}

Manifest load_input_manifest(const RunConfig& rc) {
  if (rc.paths.manifest.empty()) throw UsageError("--manifest is required");
  const fs::path path = rc.paths.manifest;
  if (!fs::is_regular_file(path)) throw UsageError("manifest not found: " + path.string());
  if (fs::file_size(path) == 0) throw UsageError("empty manifest");
  Manifest m;
  try {
    m = read_manifest(path);
  } catch (const ManifestError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  if (m.rows.empty()) throw UsageError("empty manifest");
  return m;
}

vae::VaeParams load_model(const RunConfig& rc) {
  if (rc.paths.model.empty()) throw UsageError("--model is required");
  if (!fs::is_regular_file(rc.paths.model)) throw UsageError("model not found: " + rc.paths.model);
  try {
    return vae::load_checkpoint(rc.paths.model);
  } catch (const vae::CheckpointError& e) {
    throw UsageError(rc.paths.model + ": " + e.what());
  }
}

// Output location for a processed row: keeps relative layouts, otherwise
// files the image under its identity.
std::string output_rel_path(const ManifestRow& row) {
  fs::path p(row.path);
  const bool safe = p.is_relative() && std::none_of(p.begin(), p.end(), [](const fs::path& part) {
                      return part == "..";
                    });
  if (!safe) p = fs::path(row.identity) / p.filename();
  p.replace_extension(".pgm");
  return p.generic_string();
}

std::string csv_double(double v) { return format_double(v); }

// ---------------------------------------------------------------- subcommands

Outcome run_preprocess(const RunConfig& rc, const fs::path& out) {
  const Manifest m = load_input_manifest(rc);
  Outcome o;
  std::vector<ManifestRow> rows;
  for (const auto& row : m.rows) {
    try {
      const PreprocessResult r = preprocess(load_image(m.resolve(row)), rc.preprocess);
      const std::string rel = output_rel_path(row);
      save_pgm(out / rel, r.image);
      o.files.push_back(out / rel);
      rows.push_back({rel, row.identity, row.label});
      if (r.degenerate_histogram) o.warnings.push_back(row.path + ": single-valued histogram");
    } catch (const std::exception& e) {
      o.failures.push_back(row.path + ": " + e.what());
    }
  }
  write_manifest(out / "manifest.csv", rows);
  o.files.push_back(out / "manifest.csv");
  return o;
}

Outcome run_augment(const RunConfig& rc, const fs::path& out) {
  const Manifest m = load_input_manifest(rc);
  AugmentDatasetResult r = augment_dataset(m, rc.augment, rc.seed, out);
  write_manifest(out / "manifest.csv", r.rows);
  Outcome o{std::move(r.written), {}, std::move(r.failures)};
  o.files.push_back(out / "manifest.csv");
  return o;
}

Outcome run_synth(const RunConfig& rc, const fs::path& out) {
  const synth::Dataset data = synth::make_dataset(rc.synth_shape, rc.forgery, rc.seed);
  return {synth::write_dataset(data, out), {}, {}};
}

Manifest select_identity(Manifest m, const std::string& identity) {
  if (identity.empty()) return m;
  std::erase_if(m.rows, [&](const ManifestRow& r) { return r.identity != identity; });
  if (m.rows.empty()) throw ConfigError("train.identity", "no manifest rows for identity '" + identity + "'");
  return m;
}

Outcome run_train(const RunConfig& rc, const fs::path& out) {
  const Manifest m = select_identity(load_input_manifest(rc), rc.identity);
  const vae::TrainResult t = vae::train(m, rc.vae, rc.one_class, vae::disk_loader(rc.image_size));
  Outcome o;
  vae::save_checkpoint(out / "model.bin", t.params);
  write_text_file(out / "model.json", vae::sidecar_json(t.params, t.history));
  write_text_file(out / "loss_history.csv", vae::format_loss_history(t.history));
  o.files = {out / "model.bin", out / "model.json", out / "loss_history.csv"};
  return o;
}

Outcome run_eval(const RunConfig& rc, const fs::path& out) {
  const Manifest m = load_input_manifest(rc);
  const classify::ProtocolReport r = classify::run_protocol(m, rc.protocol, vae::disk_loader(rc.image_size));
  const auto auc_text = [](const std::optional<double>& a) { return a ? csv_double(*a) : std::string(); };

  std::string report =
      "identity,mode,classifier,vae_train,classifier_train,test,tp,fp,tn,fn,accuracy,recall,precision,f1,auc\n";
  for (const auto& id : r.identities)
    for (const auto& c : id.results) {
      const auto& e = c.report;
      report += id.identity + "," + std::string(classify::to_string(c.mode)) + "," + c.classifier + "," +
                std::to_string(id.vae_train_size) + "," + std::to_string(id.classifier_train_size) + "," +
                std::to_string(id.test_size) + "," + std::to_string(e.tp) + "," + std::to_string(e.fp) + "," +
                std::to_string(e.tn) + "," + std::to_string(e.fn) + "," + csv_double(e.accuracy) + "," +
                csv_double(e.recall) + "," + csv_double(e.precision) + "," + csv_double(e.f1) + "," +
                auc_text(e.auc) + "\n";
    }
  std::string macro = "mode,classifier,identities,accuracy,recall,f1,auc\n";
  for (const auto& a : r.macro)
    macro += std::string(classify::to_string(a.mode)) + "," + a.classifier + "," +
             std::to_string(a.identities) + "," + csv_double(a.accuracy) + "," + csv_double(a.recall) + "," +
             csv_double(a.f1) + "," + auc_text(a.auc) + "\n";
  write_text_file(out / "report.csv", report);
  write_text_file(out / "macro.csv", macro);
  if (r.identities.empty()) throw std::runtime_error("no identity could be evaluated");
  return {{out / "report.csv", out / "macro.csv"}, r.warnings, {}};
}

std::string dim_file(std::size_t d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dim_%03zu.pgm", d);
  return buf;
}

Outcome run_traverse(const RunConfig& rc, const fs::path& out) {
  Outcome o;
  json index = json::array();
  if (!rc.paths.model.empty()) {
    const vae::VaeParams params = load_model(rc);
    json files = json::array();
    for (std::size_t d = 0; d < params.config.latent_dim; ++d) {
      const auto grid = diagnostics::latent_traversal(params, d, rc.traverse.lo, rc.traverse.hi, rc.traverse.steps);
      const std::string rel = "traversal/" + dim_file(d);
      save_pgm(out / rel, diagnostics::montage(grid));
      o.files.push_back(out / rel);
      files.push_back(rel);
    }
    index.push_back({{"model", rc.paths.model}, {"grids", files}});
  } else {
    const Manifest m = load_input_manifest(rc);
    const Matrix data = vae::load_training_matrix(m, rc.one_class, vae::disk_loader(rc.image_size));
    if (data.rows() == 0) throw vae::EmptyTrainingSet("no genuine rows to train on");
    const auto sweep = diagnostics::beta_sweep(data, rc.vae, rc.traverse.betas, rc.traverse.lo,
                                               rc.traverse.hi, rc.traverse.steps);
    for (const auto& entry : sweep) {
      const std::string dir = "beta_" + format_double(entry.beta);
      json files = json::array();
      for (const auto& grid : entry.grids) {
        const std::string rel = dir + "/" + dim_file(grid.dim);
        save_pgm(out / rel, diagnostics::montage(grid));
        o.files.push_back(out / rel);
        files.push_back(rel);
      }
      write_text_file(out / dir / "collapse.json", diagnostics::collapse_report_json(entry.collapse));
      write_text_file(out / dir / "loss_history.csv", vae::format_loss_history(entry.model.history));
      o.files.push_back(out / dir / "collapse.json");
      o.files.push_back(out / dir / "loss_history.csv");
      index.push_back({{"beta", entry.beta},
                       {"grids", files},
                       {"collapsed_dims", entry.collapse.collapsed_dims},
                       {"final_total", entry.model.history.back().total}});
    }
  }
  json doc{{"lo", rc.traverse.lo}, {"hi", rc.traverse.hi}, {"steps", rc.traverse.steps}, {"models", index}};
  write_text_file(out / "index.json", doc.dump(2) + "\n");
  o.files.push_back(out / "index.json");
  return o;
}

Outcome run_diagnose(const RunConfig& rc, const fs::path& out) {
  const vae::VaeParams params = load_model(rc);
  const Manifest m = load_input_manifest(rc);
  std::vector<vae::LossBreakdown> history;
  if (!rc.paths.history.empty()) {
    if (!fs::is_regular_file(rc.paths.history)) throw UsageError("history not found: " + rc.paths.history);
    try {
      history = vae::parse_loss_history(read_text_file(rc.paths.history));
    } catch (const std::exception& e) {
      throw UsageError(rc.paths.history + ": " + e.what());
    }
  }
  const Matrix data =
      vae::load_training_matrix(m, rc.one_class, vae::disk_loader(vae::image_side(params.config)));
  if (data.rows() == 0) throw std::runtime_error("no rows to diagnose");
  const auto report = diagnostics::collapse_report(params, data, history, rc.collapse_threshold);
  Outcome o;
  write_text_file(out / "collapse.json", diagnostics::collapse_report_json(report));
  o.files.push_back(out / "collapse.json");
  if (history.empty()) {
    o.warnings.push_back("no loss history given; loss breakdown chart skipped");
  } else {
    write_text_file(out / "loss_breakdown.svg", diagnostics::loss_breakdown_svg(history));
    write_text_file(out / "loss_history.csv", vae::format_loss_history(history));
    o.files.push_back(out / "loss_breakdown.svg");
    o.files.push_back(out / "loss_history.csv");
  }
  return o;
}

Outcome run_embed(const RunConfig& rc, const fs::path& out) {
  const vae::VaeParams params = load_model(rc);
  const Manifest m = load_input_manifest(rc);
  const Matrix images = vae::load_training_matrix(m, false, vae::disk_loader(vae::image_side(params.config)));
  const Matrix mu = vae::encode(params, images).mu;
  Outcome o;
  Matrix embedding;
  if (rc.embed.method == "pca") {
    embedding = diagnostics::pca_2d(mu).embedding;
  } else {
    Rng rng(rc.seed, 0x656d626564ull);
    diagnostics::TsneResult r = diagnostics::tsne_2d(mu, rc.embed.tsne, rng);
    embedding = std::move(r.embedding);
    o.warnings = std::move(r.warnings);
  }
  std::string csv = "path,identity,label,x,y\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    csv += m.rows[i].path + "," + m.rows[i].identity + "," + std::string(to_string(m.rows[i].label)) + "," +
           csv_double(embedding(i, 0)) + "," + csv_double(embedding(i, 1)) + "\n";
  write_text_file(out / "embedding.csv", csv);
  o.files.push_back(out / "embedding.csv");
  return o;
}

// ------------------------------------------------------------------- driver

json resolve_config(const std::string& config_path, const Overrides& ov) {
  const json schema = cli::default_config();
  json doc = schema;
  if (!config_path.empty()) {
    const json user = cli::read_config_file(config_path);
    cli::check_schema(user, schema);
    cli::merge_into(doc, user);
  }
  ov.apply(doc);
  cli::check_schema(doc, schema);
  return doc;
}

void write_run_manifest(const fs::path& out, const std::string& command, const json& doc,
                        const RunConfig& rc, const Outcome& o) {
  // The output location is not part of the experiment: strip it so reruns
  // into another directory record the same config and hash.
  json recorded = doc;
  recorded["paths"].erase("out");
  const std::string canonical = recorded.dump();
  std::set<std::string> files;
  for (const auto& f : o.files) files.insert(f.lexically_relative(out).generic_string());
  const json manifest{{"command", command},
                      {"config", recorded},
                      {"config_hash", hex64(fnv1a64(canonical))},
                      {"seed", rc.seed},
                      {"files", std::vector<std::string>(files.begin(), files.end())},
                      {"warnings", o.warnings},
                      {"failures", o.failures},
                      {"status", o.failures.empty() ? "ok" : "failed"}};
  write_text_file(out / "run_manifest.json", manifest.dump(2) + "\n");
}

int run(int argc, char** argv) {
  CLI::App app{"Signature verification with variational autoencoders"};
  app.require_subcommand(1, 1);
  Overrides ov;
  std::string config_path;

  auto* pre = app.add_subcommand("preprocess", "Binarize, pad and resize every manifest image");
  auto* aug = app.add_subcommand("augment", "Write randomized augmented copies of every manifest image");
  auto* syn = app.add_subcommand("synth", "Generate a synthetic signature dataset");
  auto* trn = app.add_subcommand("train", "Train a VAE on manifest images");
  auto* evl = app.add_subcommand("eval", "Run the one-class verification protocol");
  auto* trv = app.add_subcommand("traverse", "Latent traversals of a model, or a beta sweep");
  auto* dia = app.add_subcommand("diagnose", "Posterior-collapse report and loss breakdown chart");
  auto* emb = app.add_subcommand("embed", "2-D embedding of latent means (t-SNE or PCA)");
  for (auto* sub : {pre, aug, syn, trn, evl, trv, dia, emb}) common_flags(sub, ov, config_path);
  for (auto* sub : {pre, aug, trn, evl, trv, dia, emb})
    ov.add<std::string>(sub, "--manifest", "paths.manifest", "Input manifest CSV");
  for (auto* sub : {trv, dia, emb}) ov.add<std::string>(sub, "--model", "paths.model", "Model checkpoint");
  for (auto* sub : {trn, evl, trv}) vae_flags(sub, ov);
  for (auto* sub : {trn, trv, dia})
    ov.add_switch(sub, "--one-class", "--all-rows", "train.one_class", "Use genuine rows only (default)");

  ov.add<std::size_t>(pre, "--target-size", "preprocess.target_size", "Output side in pixels");
  ov.add<std::string>(pre, "--binarize", "preprocess.binarize", "otsu or fixed");
  ov.add<double>(pre, "--threshold", "preprocess.threshold", "Fixed binarization threshold");
  ov.add_switch(pre, "--pad", "--no-pad", "preprocess.pad_before_resize", "Pad to square before resizing");

  ov.add<std::size_t>(aug, "--copies", "augment.copies_per_image", "Augmented copies per image");
  ov.add<double>(aug, "--max-rotation", "augment.max_rotation_deg", "Rotation range in degrees");

  ov.add<std::size_t>(syn, "--identities", "synth.identities", "Number of signers");
  ov.add<std::size_t>(syn, "--genuine", "synth.genuine_per_id", "Genuine images per signer");
  ov.add<std::size_t>(syn, "--forged", "synth.forged_per_id", "Forged images per signer");
  ov.add<std::size_t>(syn, "--image-size", "synth.image_size", "Image side in pixels");
  ov.add<std::string>(syn, "--forgery", "synth.forgery", "random or skilled");
  ov.add<double>(syn, "--jitter", "synth.skilled_jitter", "Skilled forgery control-point jitter");

  ov.add<std::string>(trn, "--identity", "train.identity", "Train on one identity only");

  ov.add_list<std::string>(evl, "--modes", "classify.modes", "Feature modes, comma separated");
  ov.add<std::size_t>(evl, "--knn-k", "classify.knn_k", "Neighbours for kNN");
  ov.add<std::size_t>(evl, "--trees", "classify.forest.n_trees", "Random forest size");

  ov.add_list<double>(trv, "--betas", "traverse.betas", "Beta values, comma separated");
  ov.add<double>(trv, "--lo", "traverse.lo", "Sweep start");
  ov.add<double>(trv, "--hi", "traverse.hi", "Sweep end");
  ov.add<std::size_t>(trv, "--steps", "traverse.steps", "Images per traversal");

  ov.add<std::string>(dia, "--history", "paths.history", "Loss history CSV from train");
  ov.add<double>(dia, "--threshold", "diagnose.collapse_threshold", "Per-dimension KL collapse cutoff");

  ov.add<std::string>(emb, "--method", "embed.method", "tsne or pca");
  ov.add<double>(emb, "--perplexity", "embed.perplexity", "t-SNE perplexity");
  ov.add<std::size_t>(emb, "--iterations", "embed.iterations", "t-SNE iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  set_thread_cap(thread_cap_from_env());
  const json doc = resolve_config(config_path, ov);
  const RunConfig rc = cli::to_run_config(doc);
  if (rc.paths.out.empty()) throw UsageError("--out is required");
  const fs::path out = rc.paths.out;

  const std::string command = app.get_subcommands().front()->get_name();
  using Runner = Outcome (*)(const RunConfig&, const fs::path&);
  const std::vector<std::pair<std::string, Runner>> table{
      {"preprocess", run_preprocess}, {"augment", run_augment}, {"synth", run_synth},
      {"train", run_train},           {"eval", run_eval},       {"traverse", run_traverse},
      {"diagnose", run_diagnose},     {"embed", run_embed}};
  const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == command; });

  fs::create_directories(out);
  const Outcome o = it->second(rc, out);
  for (const auto& w : o.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& f : o.failures) std::cerr << "error: " << f << "\n";
  write_run_manifest(out, command, doc, rc, o);
  return o.failures.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
