#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "sigvae/forest.hpp"
#include "sigvae/knn.hpp"
#include "sigvae/metrics.hpp"
#include "sigvae/protocol.hpp"
#include "sigvae/synth.hpp"

using namespace sigvae;
using namespace sigvae::classify;
namespace fs = std::filesystem;

namespace {

Matrix random_points(Rng& rng, std::size_t n, std::size_t d, double lo = -1, double hi = 1) {
  Matrix m(n, d);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

std::vector<Label> random_labels(Rng& rng, std::size_t n) {
  std::vector<Label> y(n);
  for (auto& l : y) l = rng.uniform() < 0.5 ? Label::genuine : Label::forged;
  return y;
}

std::vector<int> as_int(const std::vector<Label>& y) {
  std::vector<int> out;
  for (Label l : y) out.push_back(l == Label::forged);
  return out;
}

}  // namespace

TEST_CASE("knn: hand example") {
  const Matrix x = Matrix::from_rows({{0, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 6}});
  const std::vector<Label> y{Label::genuine, Label::genuine, Label::forged, Label::forged, Label::forged};
  const KnnModel m(x, y, 3);
  const std::vector<double> near_origin{0.1, 0.2}, near_cluster{5.2, 5.1};
  CHECK(m.predict(near_cluster).label == Label::forged);
  CHECK(m.predict(near_cluster).score == doctest::Approx(1.0));
  const Prediction p = m.predict(near_origin);
  CHECK(p.label == Label::genuine);
  CHECK(p.score == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS(KnnModel(x, y, 6));
  CHECK_THROWS(KnnModel(x, y, 0));
}

TEST_CASE("knn: neighbours match a brute-force scan") {
  Rng rng(1);
  const Matrix train = random_points(rng, 200, 5);
  const auto labels = random_labels(rng, 200);
  for (std::size_t k : {1, 3, 7}) {
    const KnnModel m(train, labels, k);
    const Matrix queries = random_points(rng, 50, 5);
    const auto batch = m.predict(queries);
    for (std::size_t q = 0; q < queries.rows(); ++q) {
      const std::vector<double> qv(queries.row(q).begin(), queries.row(q).end());
      const auto want = oracle::knn(train, qv, k);
      CHECK(m.neighbours(qv) == want);
      std::size_t forged = 0;
      for (std::size_t i : want) forged += labels[i] == Label::forged;
      const Label vote = 2 * forged >= k ? Label::forged : Label::genuine;
      CHECK(batch[q].label == vote);
      CHECK(batch[q].score == m.predict(qv).score);
    }
  }
}

TEST_CASE("knn: k=1 recovers training labels; k=n predicts the majority") {
  Rng rng(2);
  const Matrix x = random_points(rng, 30, 3);
  const auto y = random_labels(rng, 30);
  const KnnModel one(x, y, 1);
  for (std::size_t i = 0; i < 30; ++i) CHECK(one.predict(x.row(i)).label == y[i]);

  std::vector<Label> mostly(31, Label::genuine);
  for (std::size_t i = 0; i < 10; ++i) mostly[i] = Label::forged;
  const Matrix x31 = random_points(rng, 31, 3);
  const KnnModel all(x31, mostly, 31);
  const Matrix q = random_points(rng, 10, 3);
  for (const auto& p : all.predict(q)) CHECK(p.label == Label::genuine);
}

TEST_CASE("gini impurity") {
  CHECK(gini(0, 10) == 0.0);
  CHECK(gini(10, 10) == 0.0);
  CHECK(gini(5, 10) == doctest::Approx(0.5));
  CHECK(gini(0, 0) == 0.0);
}

TEST_CASE("forest: pure data gives a single leaf") {
  Rng rng(3);
  const Matrix x = random_points(rng, 20, 3);
  const std::vector<Label> y(20, Label::forged);
  const ForestModel m = rf_fit(x, y, ForestConfig{5, 8, 2, 0, true}, Rng(4));
  for (const auto& t : m.trees) CHECK(t.nodes.size() == 1);
  CHECK(m.predict(x.row(0)).label == Label::forged);
  CHECK(m.predict(x.row(0)).score == 1.0);
}

TEST_CASE("forest: depth-1 tree matches the exhaustive split scan") {
  Rng rng(5);
  // 1-D separable data.
  Matrix line(40, 1);
  std::vector<Label> yl(40);
  for (std::size_t i = 0; i < 40; ++i) {
    line(i, 0) = rng.uniform(-1, 1);
    yl[i] = line(i, 0) > 0.13 ? Label::forged : Label::genuine;
  }
  const ForestConfig stump{1, 1, 1, 1, false};
  const ForestModel m1 = rf_fit(line, yl, stump, Rng(6));
  const oracle::Split s1 = oracle::best_split(line, as_int(yl), 1);
  REQUIRE(m1.trees[0].nodes.size() == 3);
  CHECK(m1.trees[0].nodes[0].threshold == doctest::Approx(s1.threshold).epsilon(1e-12));
  CHECK(s1.weighted_gini == 0.0);
  for (std::size_t i = 0; i < 40; ++i) CHECK(m1.predict(line.row(i)).label == yl[i]);

  // Noisy multi-feature data, all features considered.
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    Rng r(seed);
    const Matrix x = random_points(r, 30, 4);
    std::vector<Label> y(30);
    for (std::size_t i = 0; i < 30; ++i)
      y[i] = x(i, seed % 4) + 0.5 * r.uniform(-1, 1) > 0 ? Label::forged : Label::genuine;
    const ForestModel m = rf_fit(x, y, ForestConfig{1, 1, 2, 4, false}, Rng(seed));
    const oracle::Split s = oracle::best_split(x, as_int(y), 2);
    const auto& root = m.trees[0].nodes[0];
    REQUIRE(root.feature >= 0);
    CHECK(static_cast<std::size_t>(root.feature) == s.feature);
    CHECK(root.threshold == doctest::Approx(s.threshold).epsilon(1e-12));
  }
}

TEST_CASE("forest: determinism, thresholds within range, depth bound") {
  Rng rng(7);
  const Matrix x = random_points(rng, 60, 4);
  const auto y = random_labels(rng, 60);
  const ForestConfig cfg{20, 3, 2, 0, true};
  const ForestModel a = rf_fit(x, y, cfg, Rng(8)), b = rf_fit(x, y, cfg, Rng(8));
  CHECK(a.predict(x).size() == 60);
  for (std::size_t i = 0; i < 60; ++i) CHECK(a.predict(x.row(i)).score == b.predict(x.row(i)).score);
  for (const auto& t : a.trees) {
    CHECK(t.depth() <= 3);
    for (const auto& n : t.nodes) {
      if (n.feature < 0) continue;
      double lo = 1e9, hi = -1e9;
      for (std::size_t i = 0; i < 60; ++i) {
        lo = std::min(lo, x(i, n.feature));
        hi = std::max(hi, x(i, n.feature));
      }
      CHECK(n.threshold >= lo);
      CHECK(n.threshold <= hi);
    }
  }
}

TEST_CASE("forest: out-of-bag rows are excluded from each tree's sample") {
  Rng rng(9);
  const Matrix x = random_points(rng, 40, 3);
  const auto y = random_labels(rng, 40);
  const ForestModel m = rf_fit(x, y, ForestConfig{60, 4, 2, 0, true}, Rng(10));
  std::set<std::size_t> covered;
  for (const auto& t : m.trees) {
    CHECK_FALSE(t.out_of_bag.empty());
    CHECK(t.out_of_bag.size() < 40);
    covered.insert(t.out_of_bag.begin(), t.out_of_bag.end());
  }
  CHECK(covered.size() == 40);
  const auto oob = oob_predict(m, x);
  for (const auto& p : oob) CHECK(p.has_value());

  const ForestModel whole = rf_fit(x, y, ForestConfig{3, 4, 2, 0, false}, Rng(10));
  for (const auto& t : whole.trees) CHECK(t.out_of_bag.empty());
}

TEST_CASE("forest: invariant to positive feature rescaling") {
  Rng rng(11);
  const Matrix x = random_points(rng, 50, 3);
  std::vector<Label> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = x(i, 0) + x(i, 1) > 0 ? Label::forged : Label::genuine;
  Matrix scaled = x;
  for (std::size_t i = 0; i < 50; ++i) scaled(i, 1) = 4.0 * x(i, 1) + 3.0;
  const ForestConfig cfg{15, 5, 2, 0, true};
  const ForestModel a = rf_fit(x, y, cfg, Rng(12)), b = rf_fit(scaled, y, cfg, Rng(12));
  for (std::size_t i = 0; i < 50; ++i)
    CHECK(a.predict(x.row(i)).score == b.predict(scaled.row(i)).score);
}

TEST_CASE("evaluate: confusion counts and metrics") {
  const std::vector<Label> labels{Label::forged, Label::forged, Label::genuine, Label::genuine};
  const std::vector<Label> preds{Label::forged, Label::genuine, Label::forged, Label::genuine};
  const EvalReport r = evaluate(preds, labels, {0.9, 0.4, 0.6, 0.1});
  CHECK(r.tp == 1);
  CHECK(r.fn == 1);
  CHECK(r.fp == 1);
  CHECK(r.tn == 1);
  CHECK(r.accuracy == 0.5);
  CHECK(r.recall == 0.5);
  CHECK(r.precision == 0.5);
  CHECK(r.f1 == 0.5);
  REQUIRE(r.auc.has_value());
  CHECK(*r.auc == doctest::Approx(0.75));
  CHECK(r.roc.front().fpr == 0.0);
  CHECK(r.roc.back().tpr == 1.0);
  CHECK(r.roc.back().fpr == 1.0);
}

TEST_CASE("evaluate: ordered scores give AUC 1; ties and single class") {
  std::vector<Label> labels;
  std::vector<double> scores;
  for (int i = 0; i < 50; ++i) {
    labels.push_back(i < 25 ? Label::genuine : Label::forged);
    scores.push_back(i / 50.0);
  }
  CHECK(*evaluate(labels, labels, scores).auc == 1.0);
  std::vector<double> flat(50, 0.3);
  CHECK(*evaluate(labels, labels, flat).auc == doctest::Approx(0.5));
  const std::vector<Label> one(5, Label::genuine);
  const EvalReport r = evaluate(one, one, std::vector<double>(5, 0.2));
  CHECK_FALSE(r.auc.has_value());
  CHECK(r.accuracy == 1.0);
  CHECK_THROWS(evaluate(one, labels, flat));
}

TEST_CASE("evaluate: random scores give AUC near 0.5, permutation invariant") {
  Rng rng(13);
  const auto labels = random_labels(rng, 2000);
  std::vector<double> scores(2000);
  for (double& s : scores) s = rng.uniform();
  const EvalReport r = evaluate(labels, labels, scores);
  CHECK(std::abs(*r.auc - 0.5) < 0.05);
  for (std::size_t i = 1; i < r.roc.size(); ++i) {
    CHECK(r.roc[i].fpr >= r.roc[i - 1].fpr);
    CHECK(r.roc[i].tpr >= r.roc[i - 1].tpr);
  }
  const auto order = shuffled_indices(rng, 2000);
  std::vector<Label> l2;
  std::vector<double> s2;
  for (std::size_t i : order) {
    l2.push_back(labels[i]);
    s2.push_back(scores[i]);
  }
  CHECK(*evaluate(l2, l2, s2).auc == doctest::Approx(*r.auc).epsilon(1e-12));
}

TEST_CASE("protocol: feature modes") {
  CHECK(feature_width(FeatureMode::latent, 8) == 8);
  CHECK(feature_width(FeatureMode::recon, 8) == 1);
  CHECK(feature_width(FeatureMode::both, 8) == 9);
  CHECK(parse_feature_mode("both") == FeatureMode::both);
  CHECK_FALSE(parse_feature_mode("pixels").has_value());
  const ReconScale s = fit_recon_scale({1, 3});
  CHECK(s.mean == 2.0);
  CHECK(s.sd == 1.0);
  CHECK(fit_recon_scale({4, 4}).sd == 1.0);
}

TEST_CASE("protocol: small end-to-end run") {
  const fs::path root = fs::temp_directory_path() / "sigvae_test_protocol";
  fs::remove_all(root);
  synth::DatasetShape shape{2, 10, 8, 16, {}};
  synth::write_dataset(synth::make_dataset(shape, synth::ForgeryKind::random(), 3), root);
  Manifest m = read_manifest(root / "manifest.csv");
  // A third identity with too few genuine images is skipped.
  m.rows.push_back({m.rows.front().path, "idXX", Label::genuine});

  ProtocolConfig cfg;
  cfg.vae.input_dim = 256;
  cfg.vae.intermediate_dim = 32;
  cfg.vae.latent_dim = 4;
  cfg.vae.epochs = 10;
  cfg.vae.batch_size = 8;
  cfg.forest.n_trees = 10;
  cfg.knn_k = 3;
  cfg.split_seed = 1;
  const ProtocolReport r = run_protocol(m, cfg, vae::disk_loader(16));
  CHECK(r.identities.size() == 2);
  CHECK(r.warnings.size() == 1);
  CHECK(r.macro.size() == 6);
  for (const auto& id : r.identities) {
    CHECK(id.vae_train_size == 7);
    CHECK(id.results.size() == 6);
    CHECK(id.classifier_train_size + id.test_size == 3 + 8);
  }
  const MacroAverage* rf = r.find_macro(FeatureMode::both, "rf");
  REQUIRE(rf != nullptr);
  CHECK(rf->identities == 2);
  const ProtocolReport again = run_protocol(m, cfg, vae::disk_loader(16));
  CHECK(again.find_macro(FeatureMode::both, "rf")->auc == rf->auc);

  vae::VaeConfig vc = cfg.vae;
  Rng rng(1);
  const auto params = vae::init_params(vc, rng);
  const FeatureSet fs_ = extract_features(params, m, FeatureMode::both, vae::disk_loader(16));
  CHECK(fs_.features.cols() == 5);
  CHECK(fs_.labels.size() == m.rows.size());
  fs::remove_all(root);
}
