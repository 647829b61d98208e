// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "oracles.hpp"
#include "sigvae/augment.hpp"
#include "sigvae/checkpoint.hpp"
#include "sigvae/diagnostics.hpp"
#include "sigvae/forest.hpp"
#include "sigvae/kernels.hpp"
#include "sigvae/knn.hpp"
#include "sigvae/metrics.hpp"
#include "sigvae/protocol.hpp"
#include "sigvae/synth.hpp"
#include "sigvae/textio.hpp"
#include "sigvae/vae.hpp"
#include "vae_oracle.hpp"

namespace fs = std::filesystem;
using namespace sigvae;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const fs::path& scratch() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "sigvae_acceptance";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

int sigvae_cli(const std::string& args, const fs::path& cwd = scratch()) {
  fs::create_directories(cwd);
  const std::string cmd = "cd '" + cwd.string() + "' && '" + SIGVAE_CLI_PATH + "' " + args +
                          " >/dev/null 2>>'" + (scratch() / "cli_stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix rows_to_matrix(const std::vector<GrayImage>& images) {
  Matrix m(images.size(), images.front().size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto px = images[i].pixels();
    std::copy(px.begin(), px.end(), m.row(i).begin());
  }
  return m;
}

// Genuine images j in [from, to) of every identity.
Matrix genuine_block(const synth::Dataset& ds, std::size_t from, std::size_t to) {
  std::vector<GrayImage> picked;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    if (ds.rows[i].label != Label::genuine) continue;
    const std::size_t j = std::stoul(ds.rows[i].path.substr(ds.rows[i].path.find("genuine_") + 8, 3));
    if (j >= from && j < to) picked.push_back(ds.images[i]);
  }
  return rows_to_matrix(picked);
}

// ---------------------------------------------------------------- criteria

Outcome gradient_check() {
  vae::VaeConfig cfg;
  cfg.input_dim = 16;
  cfg.intermediate_dim = 8;
  cfg.latent_dim = 4;
  double worst = 0.0, worst_small = 0.0;
  std::size_t checked = 0;
  for (double beta : {0.0, 1.0, 5.0}) {
    Rng rng(100 + static_cast<std::uint64_t>(beta));
    vae::VaeParams p = vae::init_params(cfg, rng);
    for (std::size_t b = 1; b < vae::kBlockCount; b += 2)
      for (double& v : p.weights[b].data()) v = rng.uniform(-0.3, 0.3);
    Matrix x(4, 16);
    for (double& v : x.data()) v = rng.uniform();
    const Matrix eps(4, 4, sample_standard_normal(rng, 16));
    const auto br = vae::backward(p, x, eps, beta);
    const auto gc = oracle::grad_check(p, x, eps, beta, br.grads, 1e-5);
    worst = std::max(worst, gc.max_rel_error);
    worst_small = std::max(worst_small, gc.max_abs_error_small);
    checked += gc.checked;
  }
  return {worst < 1e-4 && worst_small < 1e-8,
          fmt("max relative error %.2e over %zu coordinates (|grad| < 1e-7: max abs error %.1e)", worst,
              checked, worst_small)};
}

Outcome kl_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    std::vector<double> mu(4), lv(4);
    for (int i = 0; i < 4; ++i) {
      mu[i] = rng.uniform(-1.5, 1.5);
      lv[i] = rng.uniform(-1.5, 1.5);
    }
    double sum = 0.0;
    const std::size_t n = 1000000;
    for (std::size_t s = 0; s < n; ++s) {
      double term = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double e = rng.normal();
        const double z = mu[i] + std::exp(0.5 * lv[i]) * e;
        term += -0.5 * lv[i] - 0.5 * e * e + 0.5 * z * z;  // log q(z) - log p(z)
      }
      sum += term;
    }
    const double exact = vae::kl_divergence(mu, lv);
    worst = std::max(worst, std::abs(sum / n - exact) / exact);
  }
  const double k0 = vae::kl_divergence(std::vector<double>{0.0}, std::vector<double>{0.0});
  const double k1 = vae::kl_divergence(std::vector<double>{1.0}, std::vector<double>{0.0});
  return {worst < 0.01 && k0 == 0.0 && std::abs(k1 - 0.5) < 1e-15,
          fmt("max MC relative error %.4f over 20 pairs; KL(0,0)=%g, KL(1,0)=%g", worst, k0, k1)};
}

Outcome reparameterization() {
  Rng rng(77);
  std::size_t mismatches = 0, zero_eps_mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> mu(8), lv(8), eps(8), zero(8, 0.0);
    for (int i = 0; i < 8; ++i) {
      mu[i] = rng.uniform(-5, 5);
      lv[i] = rng.uniform(-10, 10);
      eps[i] = rng.normal();
    }
    const auto z = vae::reparameterize(mu, lv, eps);
    for (int i = 0; i < 8; ++i) mismatches += z[i] != mu[i] + std::exp(lv[i] / 2) * eps[i];
    zero_eps_mismatches += vae::reparameterize(mu, lv, zero) != mu;
  }
  return {mismatches == 0 && zero_eps_mismatches == 0,
          fmt("%zu bit mismatches in 80000 coordinates; eps=0 mismatches %zu", mismatches, zero_eps_mismatches)};
}

classify::ProtocolReport protocol_run(const synth::ForgeryKind& forgery) {
  const synth::DatasetShape shape{6, 40, 40, 32, {}};
  const synth::Dataset ds = synth::make_dataset(shape, forgery, 11);
  Manifest m;
  m.rows = ds.rows;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.rows.size(); ++i) index[ds.rows[i].path] = i;
  const vae::ImageLoader loader = [&](const Manifest&, const ManifestRow& r) {
    return ds.images[index.at(r.path)];
  };
  classify::ProtocolConfig cfg;
  cfg.vae.input_dim = 32 * 32;
  cfg.vae.intermediate_dim = 512;
  cfg.vae.latent_dim = 64;
  cfg.vae.epochs = 100;
  cfg.vae.seed = 3;
  cfg.split_seed = 5;
  return classify::run_protocol(m, cfg, loader);
}

Outcome one_class_separation() {
  const auto random = protocol_run(synth::ForgeryKind::random());
  const auto skilled = protocol_run(synth::ForgeryKind::skilled(0.05));
  const auto* r = random.find_macro(classify::FeatureMode::both, "rf");
  const auto* s = skilled.find_macro(classify::FeatureMode::both, "rf");
  if (!r || !s || !r->auc || !s->auc) return {false, "macro AUC unavailable"};
  const double ar = *r->auc, as = *s->auc;
  return {ar > 0.9 && as > 0.5 && as < 0.9 && as < ar,
          fmt("random-forest, latent+recon features: random-forgery macro AUC %.3f, skilled (jitter 0.05) %.3f",
              ar, as)};
}

Outcome posterior_collapse() {
  const synth::DatasetShape shape{4, 5, 1, 32, {}};
  const synth::Dataset ds = synth::make_dataset(shape, synth::ForgeryKind::random(), 21);
  const Matrix data = genuine_block(ds, 0, 5);
  vae::VaeConfig cfg;
  cfg.input_dim = 32 * 32;
  cfg.intermediate_dim = 128;
  cfg.latent_dim = 16;
  cfg.batch_size = 4;
  cfg.epochs = 100;
  cfg.seed = 9;

  cfg.beta = 50.0;
  const auto high = vae::train(data, cfg);
  // Read the KL series back from the CSV artifact.
  const auto history = vae::parse_loss_history(vae::format_loss_history(high.history));
  const auto rep_high = diagnostics::collapse_report(high.params, data, history);
  cfg.beta = 0.0;
  const auto zero = vae::train(data, cfg);
  const auto rep_zero = diagnostics::collapse_report(zero.params, data, zero.history);

  const double frac = static_cast<double>(rep_high.collapsed_dims.size()) / cfg.latent_dim;
  const double kl0 = history[0].kl, kl9 = history[9].kl;
  return {data.rows() == 20 && frac >= 0.8 && kl9 <= 0.25 * kl0 && rep_zero.collapsed_dims.empty(),
          fmt("beta=50: %zu/%zu dims collapsed, KL epoch0 %.3f -> epoch9 %.4f (ratio %.3f); beta=0: %zu collapsed",
              rep_high.collapsed_dims.size(), cfg.latent_dim, kl0, kl9, kl9 / kl0, rep_zero.collapsed_dims.size())};
}

Outcome beta_sweep_parity() {
  if (sigvae_cli("synth --identities 2 --genuine 10 --forged 2 --image-size 32 --seed 6 --out c6_data") != 0)
    return {false, "synth failed"};
  const int code = sigvae_cli(
      "traverse --manifest c6_data/manifest.csv --betas 1,1.25,1.5,1.75,2,5 --latent-dim 5 --lo -4 --hi 4 "
      "--image-size 32 --intermediate-dim 128 --epochs 30 --batch-size 8 --seed 6 --out c6_sweep");
  if (code != 0) return {false, fmt("traverse exit code %d", code)};
  const auto index = nlohmann::json::parse(slurp(scratch() / "c6_sweep" / "index.json"));
  std::vector<double> betas;
  std::size_t grids = 0, images_ok = 0;
  for (const auto& entry : index["models"]) {
    betas.push_back(entry["beta"]);
    for (const auto& g : entry["grids"]) {
      ++grids;
      images_ok += fs::is_regular_file(scratch() / "c6_sweep" / g.get<std::string>());
    }
  }
  const std::vector<double> want = diagnostics::kDefaultBetas;
  const bool range_ok = index["lo"] == -4.0 && index["hi"] == 4.0;
  return {betas == want && grids == 30 && images_ok == 30 && range_ok,
          fmt("%zu models, %zu traversal grids written (%zu files), sweep [%g, %g]", betas.size(), grids, images_ok,
              index["lo"].get<double>(), index["hi"].get<double>())};
}

Outcome augmentation_bookkeeping() {
  const synth::DatasetShape shape{3, 4, 2, 24, {}};
  synth::write_dataset(synth::make_dataset(shape, synth::ForgeryKind::random(), 5), scratch() / "c7_in");
  const Manifest m = read_manifest(scratch() / "c7_in" / "manifest.csv");
  const AugmentConfig cfg;
  const auto res = augment_dataset(m, cfg, 8, scratch() / "c7_out");
  std::map<std::string, std::size_t> copies;
  std::size_t g = 0, f = 0;
  for (const auto& r : res.rows) {
    (r.label == Label::genuine ? g : f) += 1;
    const auto pos = r.path.find("_aug");
    if (pos != std::string::npos) copies[r.path.substr(0, pos)] += 1;
  }
  bool all16 = copies.size() == m.rows.size();
  for (const auto& [k, n] : copies) all16 = all16 && n == 16;
  const std::size_t g0 = m.count(Label::genuine), f0 = m.count(Label::forged);
  const bool proportions = g * f0 == f * g0 && g == 17 * g0;
  return {cfg.copies_per_image == 16 && all16 && proportions && res.failures.empty(),
          fmt("%zu originals, each with 16 copies: %s; genuine:forged %zu:%zu -> %zu:%zu", m.rows.size(),
              all16 ? "yes" : "no", g0, f0, g, f)};
}

Outcome classifier_oracles() {
  Rng rng(31);
  Matrix train(200, 6), queries(200, 6);
  for (double& v : train.data()) v = rng.uniform(-1, 1);
  for (double& v : queries.data()) v = rng.uniform(-1, 1);
  std::vector<Label> labels(200);
  for (auto& l : labels) l = rng.uniform() < 0.5 ? Label::genuine : Label::forged;
  const classify::KnnModel knn(train, labels, 5);
  const auto preds = knn.predict(queries);
  std::size_t agree = 0;
  for (std::size_t q = 0; q < 200; ++q) {
    const std::vector<double> qv(queries.row(q).begin(), queries.row(q).end());
    const auto want = oracle::knn(train, qv, 5);
    std::size_t forged = 0;
    for (std::size_t i : want) forged += labels[i] == Label::forged;
    const Label vote = 2 * forged >= 5 ? Label::forged : Label::genuine;
    agree += knn.neighbours(qv) == want && preds[q].label == vote;
  }

  Matrix line(60, 1);
  std::vector<Label> yl(60);
  std::vector<int> yi(60);
  for (std::size_t i = 0; i < 60; ++i) {
    line(i, 0) = rng.uniform(-3, 3);
    yl[i] = line(i, 0) > 0.4 ? Label::forged : Label::genuine;
    yi[i] = yl[i] == Label::forged;
  }
  const auto forest = classify::rf_fit(line, yl, classify::ForestConfig{1, 1, 1, 1, false}, Rng(3));
  const auto split = oracle::best_split(line, yi, 1);
  const auto& root = forest.trees.front().nodes.front();
  const bool stump_ok = forest.trees.front().nodes.size() == 3 && root.feature == 0 &&
                        std::abs(root.threshold - split.threshold) < 1e-12;

  std::vector<Label> ordered;
  std::vector<double> ordered_scores;
  for (int i = 0; i < 100; ++i) {
    ordered.push_back(i < 50 ? Label::genuine : Label::forged);
    ordered_scores.push_back(i);
  }
  const double auc_ordered = *classify::evaluate(ordered, ordered, ordered_scores).auc;
  std::vector<Label> rl(2000);
  std::vector<double> rs(2000);
  for (std::size_t i = 0; i < 2000; ++i) {
    rl[i] = rng.uniform() < 0.5 ? Label::genuine : Label::forged;
    rs[i] = rng.uniform();
  }
  const double auc_random = *classify::evaluate(rl, rl, rs).auc;
  return {agree == 200 && stump_ok && auc_ordered == 1.0 && std::abs(auc_random - 0.5) <= 0.05,
          fmt("kNN agreement %zu/200; stump threshold %.6f vs oracle %.6f; AUC ordered %.3f, random %.4f", agree,
              root.threshold, split.threshold, auc_ordered, auc_random)};
}

// Mean over decoded prior samples of the distance to the nearest reference image.
double prior_sample_distance(const vae::VaeParams& params, const Matrix& reference, std::size_t samples) {
  Rng rng(4242);
  Matrix decoded(samples, reference.cols());
  for (std::size_t s = 0; s < samples; ++s) {
    const auto z = sample_standard_normal(rng, params.config.latent_dim);
    const auto x = vae::decode(params, z);
    std::copy(x.begin(), x.end(), decoded.row(s).begin());
  }
  const Matrix d = kernels::cross_sq_dists(decoded, reference);
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto row = d.row(s);
    total += std::sqrt(*std::min_element(row.begin(), row.end()));
  }
  return total / static_cast<double>(samples);
}

Outcome small_data_effect() {
  const synth::DatasetShape shape{20, 110, 1, 32, {}};
  const synth::Dataset ds = synth::make_dataset(shape, synth::ForgeryKind::random(), 13);
  const Matrix large = genuine_block(ds, 0, 100);
  const Matrix small = genuine_block(ds, 0, 10);
  const Matrix held_out = genuine_block(ds, 100, 110);
  vae::VaeConfig cfg;
  cfg.input_dim = 32 * 32;
  cfg.intermediate_dim = 64;
  cfg.latent_dim = 8;
  cfg.batch_size = 32;
  cfg.epochs = 30;
  cfg.seed = 17;
  const auto big_model = vae::train(large, cfg);
  const auto small_model = vae::train(small, cfg);
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double loss_big = mean(vae::reconstruction_errors(big_model.params, held_out));
  const double loss_small = mean(vae::reconstruction_errors(small_model.params, held_out));
  const double dist_big = prior_sample_distance(big_model.params, large, 200);
  const double dist_small = prior_sample_distance(small_model.params, large, 200);
  return {large.rows() == 2000 && small.rows() == 200 && loss_small > loss_big && dist_small > dist_big,
          fmt("held-out reconstruction loss 200 imgs %.3f vs 2000 imgs %.3f; prior-sample distance %.3f vs %.3f",
              loss_small, loss_big, dist_small, dist_big)};
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[e.path().lexically_relative(dir).generic_string()] = slurp(e.path());
  return out;
}

Outcome determinism() {
  const std::string vae = "--image-size 16 --intermediate-dim 32 --latent-dim 4 --epochs 10 --batch-size 8";
  // Identical arguments, run from two different working directories.
  const std::vector<std::string> steps = {
      "synth --identities 3 --genuine 8 --forged 6 --image-size 24 --seed 12 --out synth",
      "preprocess --manifest synth/manifest.csv --target-size 16 --seed 12 --out pre",
      "augment --manifest pre/manifest.csv --copies 2 --seed 12 --out aug",
      "train --manifest pre/manifest.csv " + vae + " --seed 12 --out train",
      "eval --manifest pre/manifest.csv " + vae + " --trees 10 --seed 12 --out eval",
      "traverse --manifest pre/manifest.csv " + vae + " --betas 1,5 --steps 5 --seed 12 --out trav",
      "diagnose --model train/model.bin --manifest pre/manifest.csv --history train/loss_history.csv "
      "--seed 12 --out diag",
      "embed --model train/model.bin --manifest pre/manifest.csv --iterations 300 --seed 12 --out embed",
  };
  for (const char* run : {"c10_a", "c10_b"})
    for (const auto& s : steps)
      if (const int code = sigvae_cli(s, scratch() / run); code != 0)
        return {false, fmt("'%s' exited %d", s.c_str(), code)};
  const auto a = artifacts(scratch() / "c10_a"), b = artifacts(scratch() / "c10_b");
  std::size_t structured = 0, differing = 0;
  for (const auto& [name, bytes] : a) {
    const bool text = name.ends_with(".csv") || name.ends_with(".json");
    structured += text;
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  return {a.size() == b.size() && differing == 0 && structured > 0,
          fmt("8 subcommands run twice: %zu files (%zu CSV/JSON), %zu differ", a.size(), structured, differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_check},
      {"KL oracle", kl_oracle},
      {"reparameterization identity", reparameterization},
      {"one-class separation", one_class_separation},
      {"posterior collapse", posterior_collapse},
      {"beta-sweep configuration", beta_sweep_parity},
      {"augmentation bookkeeping", augmentation_bookkeeping},
      {"classifier oracles", classifier_oracles},
      {"small-data effect", small_data_effect},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %2zu %s: %s -- %s [%.1fs]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
