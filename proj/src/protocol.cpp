#include "sigvae/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

namespace sigvae::classify {

namespace {

constexpr std::size_t kMinGenuine = 4;

Matrix gather_rows(const std::vector<GrayImage>& images, const std::vector<std::size_t>& rows) {
  const std::size_t cols = images.at(rows.front()).size();
  Matrix out(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto px = images[rows[r]].pixels();
    if (px.size() != cols) throw ShapeError("protocol: images differ in size");
    std::copy(px.begin(), px.end(), out.row(r).begin());
  }
  return out;
}

std::size_t split_count(std::size_t n, double fraction) {
  if (n <= 1) return n;
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

std::vector<Label> pick(const std::vector<Label>& labels, const std::vector<std::size_t>& rows) {
  std::vector<Label> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

EvalReport score(const std::vector<Prediction>& preds, const std::vector<Label>& truth) {
  std::vector<Label> called;
  std::vector<double> scores;
  for (const auto& p : preds) {
    called.push_back(p.label);
    scores.push_back(p.score);
  }
  return evaluate(called, truth, scores);
}

IdentityResult run_identity(const std::string& identity, std::size_t index,
                            const std::vector<std::size_t>& genuine,
                            const std::vector<std::size_t>& forged,
                            const std::vector<GrayImage>& images, const ProtocolConfig& cfg) {
  const Rng id_rng = Rng(cfg.split_seed).child(index);
  IdentityResult result;
  result.identity = identity;

  Rng genuine_rng = id_rng.child(0);
  const auto order = shuffled_indices(genuine_rng, genuine.size());
  const std::size_t n_vae = split_count(genuine.size(), cfg.genuine_train_fraction);
  std::vector<std::size_t> vae_rows, eval_rows;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_vae ? vae_rows : eval_rows).push_back(genuine[order[i]]);
  result.vae_train_size = vae_rows.size();

  vae::VaeConfig vcfg = cfg.vae;
  vcfg.seed = Rng(cfg.vae.seed, index).next_u64();
  const vae::TrainResult trained = vae::train(gather_rows(images, vae_rows), vcfg);

  // Evaluation pool: held-out genuine first, then every forgery.
  std::vector<std::size_t> pool = eval_rows;
  pool.insert(pool.end(), forged.begin(), forged.end());
  std::vector<Label> pool_labels(eval_rows.size(), Label::genuine);
  pool_labels.resize(pool.size(), Label::forged);
  const RawFeatures raw = raw_features(trained.params, gather_rows(images, pool));

  // Stratified split of the pool into classifier train/test.
  Rng split_rng = id_rng.child(2);
  std::vector<std::size_t> train_idx, test_idx;
  for (Label cls : {Label::genuine, Label::forged}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pool_labels[i] == cls) members.push_back(i);
    const auto perm = shuffled_indices(split_rng, members.size());
    const std::size_t n_train = split_count(members.size(), cfg.classifier_train_fraction);
    for (std::size_t i = 0; i < perm.size(); ++i)
      (i < n_train ? train_idx : test_idx).push_back(members[perm[i]]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  result.classifier_train_size = train_idx.size();
  result.test_size = test_idx.size();

  std::vector<double> train_recon;
  for (std::size_t i : train_idx) train_recon.push_back(raw.recon[i]);
  const ReconScale scale = fit_recon_scale(train_recon);
  const auto y_train = pick(pool_labels, train_idx);
  const auto y_test = pick(pool_labels, test_idx);

  for (FeatureMode mode : cfg.modes) {
    const Matrix x_train = assemble_features(raw, mode, scale, train_idx);
    const Matrix x_test = assemble_features(raw, mode, scale, test_idx);

    const KnnModel knn = knn_fit(x_train, y_train, std::min(cfg.knn_k, train_idx.size()));
    result.results.push_back({mode, "knn", score(knn.predict(x_test), y_test)});

    const ForestModel forest =
        rf_fit(x_train, y_train, cfg.forest, id_rng.child(3).child(static_cast<std::uint64_t>(mode)));
    result.results.push_back({mode, "rf", score(forest.predict(x_test), y_test)});
  }
  return result;
}

}  // namespace

std::string_view to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::latent: return "latent";
    case FeatureMode::recon: return "recon";
    case FeatureMode::both: return "both";
  }
  return "latent";
}

std::optional<FeatureMode> parse_feature_mode(std::string_view text) {
  if (text == "latent") return FeatureMode::latent;
  if (text == "recon") return FeatureMode::recon;
  if (text == "both") return FeatureMode::both;
  return std::nullopt;
}

std::size_t feature_width(FeatureMode mode, std::size_t latent_dim) {
  switch (mode) {
    case FeatureMode::latent: return latent_dim;
    case FeatureMode::recon: return 1;
    case FeatureMode::both: return latent_dim + 1;
  }
  return latent_dim;
}

ReconScale fit_recon_scale(const std::vector<double>& errors) {
  ReconScale s;
  if (errors.empty()) return s;
  const double n = static_cast<double>(errors.size());
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  double var = 0.0;
  for (double e : errors) var += (e - s.mean) * (e - s.mean);
  var /= n;
  s.sd = var > 0.0 ? std::sqrt(var) : 1.0;
  return s;
}

RawFeatures raw_features(const vae::VaeParams& params, const Matrix& images) {
  const vae::Encoded enc = vae::encode(params, images);
  const Matrix recon = vae::decode(params, enc.mu);
  RawFeatures raw{enc.mu, std::vector<double>(images.rows(), 0.0)};
  for (std::size_t r = 0; r < images.rows(); ++r)
    for (std::size_t c = 0; c < images.cols(); ++c) {
      const double d = images(r, c) - recon(r, c);
      raw.recon[r] += d * d;
    }
  return raw;
}

Matrix assemble_features(const RawFeatures& raw, FeatureMode mode, const ReconScale& scale,
                         const std::vector<std::size_t>& rows) {
  const std::size_t ld = raw.mu.cols();
  Matrix out(rows.size(), feature_width(mode, ld));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t src = rows[r];
    switch (mode) {
      case FeatureMode::latent:
        std::copy(raw.mu.row(src).begin(), raw.mu.row(src).end(), out.row(r).begin());
        break;
      case FeatureMode::recon:
        out(r, 0) = raw.recon[src];
        break;
      case FeatureMode::both:
        std::copy(raw.mu.row(src).begin(), raw.mu.row(src).end(), out.row(r).begin());
        out(r, ld) = (raw.recon[src] - scale.mean) / scale.sd;
        break;
    }
  }
  return out;
}

FeatureSet extract_features(const vae::VaeParams& params, const Manifest& manifest,
                            FeatureMode mode, const vae::ImageLoader& loader) {
  if (manifest.rows.empty()) throw std::invalid_argument("extract_features: empty manifest");
  std::vector<GrayImage> images;
  FeatureSet out;
  for (const auto& row : manifest.rows) {
    images.push_back(loader(manifest, row));
    if (images.back().size() != params.config.input_dim)
      throw ShapeError("extract_features: image " + row.path + " does not match input_dim");
    out.labels.push_back(row.label);
  }
  std::vector<std::size_t> all(images.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const RawFeatures raw = raw_features(params, gather_rows(images, all));
  out.features = assemble_features(raw, mode, fit_recon_scale(raw.recon), all);
  return out;
}

void ProtocolConfig::validate() const {
  vae.validate();
  forest.validate();
  if (modes.empty()) throw std::invalid_argument("protocol: no feature modes");
  if (knn_k < 1) throw std::invalid_argument("protocol: knn_k must be >= 1");
  if (!(genuine_train_fraction > 0.0 && genuine_train_fraction < 1.0))
    throw std::invalid_argument("protocol: genuine_train_fraction must lie in (0,1)");
  if (!(classifier_train_fraction > 0.0 && classifier_train_fraction < 1.0))
    throw std::invalid_argument("protocol: classifier_train_fraction must lie in (0,1)");
}

const MacroAverage* ProtocolReport::find_macro(FeatureMode mode, std::string_view classifier) const {
  for (const auto& m : macro)
    if (m.mode == mode && m.classifier == classifier) return &m;
  return nullptr;
}

std::vector<MacroAverage> macro_average(const std::vector<IdentityResult>& identities,
                                        const std::vector<FeatureMode>& modes) {
  std::vector<MacroAverage> out;
  for (FeatureMode mode : modes) {
    for (const char* clf : {"knn", "rf"}) {
      MacroAverage m;
      m.mode = mode;
      m.classifier = clf;
      double auc_sum = 0.0;
      std::size_t auc_n = 0;
      for (const auto& id : identities) {
        for (const auto& r : id.results) {
          if (r.mode != mode || r.classifier != clf) continue;
          m.accuracy += r.report.accuracy;
          m.recall += r.report.recall;
          m.f1 += r.report.f1;
          ++m.identities;
          if (r.report.auc) {
            auc_sum += *r.report.auc;
            ++auc_n;
          }
        }
      }
      if (m.identities > 0) {
        const double n = static_cast<double>(m.identities);
        m.accuracy /= n;
        m.recall /= n;
        m.f1 /= n;
      }
      if (auc_n > 0) m.auc = auc_sum / static_cast<double>(auc_n);
      out.push_back(m);
    }
  }
  return out;
}

ProtocolReport run_protocol(const Manifest& manifest, const ProtocolConfig& cfg,
                            const vae::ImageLoader& loader) {
  cfg.validate();
  ProtocolReport report;
  const auto ids = manifest.identities();

  std::vector<GrayImage> images(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) images[i] = loader(manifest, manifest.rows[i]);

  struct Job {
    std::size_t index;
    std::vector<std::size_t> genuine, forged;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Job job{i, {}, {}};
    for (std::size_t r = 0; r < manifest.rows.size(); ++r) {
      if (manifest.rows[r].identity != ids[i]) continue;
      (manifest.rows[r].label == Label::genuine ? job.genuine : job.forged).push_back(r);
    }
    if (job.genuine.size() < kMinGenuine) {
      report.warnings.push_back("identity " + ids[i] + " skipped: only " +
                                std::to_string(job.genuine.size()) + " genuine images");
      continue;
    }
    if (job.forged.empty()) {
      report.warnings.push_back("identity " + ids[i] + " skipped: no forged images");
      continue;
    }
    jobs.push_back(std::move(job));
  }

  report.identities.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(jobs.size()); ++j) {
    const Job& job = jobs[static_cast<std::size_t>(j)];
    try {
      report.identities[static_cast<std::size_t>(j)] =
          run_identity(ids[job.index], job.index, job.genuine, job.forged, images, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  report.macro = macro_average(report.identities, cfg.modes);
  return report;
}

}  // namespace sigvae::classify
