#include "sigvae/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sigvae::classify {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<Label>& y, const ForestConfig& cfg, Rng& rng)
      : x_(x), y_(y), cfg_(cfg), rng_(rng) {
    const std::size_t d = x.cols();
    m_try_ = cfg.max_features > 0
                 ? std::min(cfg.max_features, d)
                 : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
  }

  DecisionTree build(std::vector<std::size_t> sample) {
    DecisionTree tree;
    grow(tree, std::move(sample), 0);
    return tree;
  }

 private:
  std::uint32_t grow(DecisionTree& tree, std::vector<std::size_t> sample, std::size_t depth) {
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::size_t forged = count_forged(sample);
    tree.nodes[id].p_forged = static_cast<double>(forged) / static_cast<double>(sample.size());

    const bool pure = forged == 0 || forged == sample.size();
    if (pure || depth >= cfg_.max_depth || sample.size() < 2 * cfg_.min_leaf) return id;

    const Split best = find_split(sample, forged);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : sample) {
      (x_(i, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(i);
    }
    sample.clear();
    sample.shrink_to_fit();
    tree.nodes[id].feature = best.feature;
    tree.nodes[id].threshold = best.threshold;
    const std::uint32_t l = grow(tree, std::move(left), depth + 1);
    const std::uint32_t r = grow(tree, std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  std::size_t count_forged(const std::vector<std::size_t>& sample) const {
    return static_cast<std::size_t>(std::count_if(
        sample.begin(), sample.end(), [&](std::size_t i) { return y_[i] == Label::forged; }));
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> f(x_.cols());
    std::iota(f.begin(), f.end(), std::size_t{0});
    for (std::size_t i = 0; i < m_try_; ++i) {
      const std::size_t j = i + rng_.below(f.size() - i);
      std::swap(f[i], f[j]);
    }
    f.resize(m_try_);
    return f;
  }

  Split find_split(const std::vector<std::size_t>& sample, std::size_t forged) {
    const double n = static_cast<double>(sample.size());
    const double parent = gini(static_cast<double>(forged), n);
    Split best;
    std::vector<std::pair<double, Label>> column(sample.size());
    for (std::size_t f : candidate_features()) {
      for (std::size_t i = 0; i < sample.size(); ++i) column[i] = {x_(sample[i], f), y_[sample[i]]};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_forged = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        if (column[i].second == Label::forged) left_forged += 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        if (nl < static_cast<double>(cfg_.min_leaf) || nr < static_cast<double>(cfg_.min_leaf))
          continue;
        const double right_forged = static_cast<double>(forged) - left_forged;
        const double gain =
            parent - (nl / n) * gini(left_forged, nl) - (nr / n) * gini(right_forged, nr);
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(f);
          best.threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<Label>& y_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::size_t m_try_ = 1;
};

}  // namespace

void ForestConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("forest.n_trees must be >= 1");
  if (min_leaf < 1) throw std::invalid_argument("forest.min_leaf must be >= 1");
}

double gini(double n_forged, double n_total) {
  if (n_total <= 0.0) return 0.0;
  const double p = n_forged / n_total;
  return 2.0 * p * (1.0 - p);
}

double DecisionTree::predict_forged(std::span<const double> x) const {
  std::uint32_t id = 0;
  while (nodes[id].feature >= 0) {
    const TreeNode& node = nodes[id];
    id = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes[id].p_forged;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[id].feature >= 0) {
      stack.push_back({nodes[id].left, d + 1});
      stack.push_back({nodes[id].right, d + 1});
    }
  }
  return deepest;
}

Prediction ForestModel::predict(std::span<const double> x) const {
  if (x.size() != n_features) throw ShapeError("forest: query dimension mismatch");
  double s = 0.0;
  for (const auto& t : trees) s += t.predict_forged(x);
  Prediction p;
  p.score = s / static_cast<double>(trees.size());
  p.label = p.score >= 0.5 ? Label::forged : Label::genuine;
  return p;
}

std::vector<Prediction> ForestModel::predict(const Matrix& x) const {
  std::vector<Prediction> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
  return out;
}

ForestModel rf_fit(const Matrix& features, const std::vector<Label>& labels,
                   const ForestConfig& cfg, const Rng& rng) {
  cfg.validate();
  if (labels.empty()) throw std::invalid_argument("forest: empty training set");
  if (features.rows() != labels.size()) throw ShapeError("forest: feature rows and labels differ");
  const std::size_t n = labels.size();

  ForestModel model;
  model.n_features = features.cols();
  model.trees.resize(cfg.n_trees);

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(cfg.n_trees); ++t) {
    Rng tree_rng = rng.child(static_cast<std::uint64_t>(t));
    std::vector<std::size_t> sample(n);
    std::vector<char> drawn(n, 0);
    if (cfg.bootstrap) {
      for (auto& s : sample) {
        s = tree_rng.below(n);
        drawn[s] = 1;
      }
      std::sort(sample.begin(), sample.end());
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
      std::fill(drawn.begin(), drawn.end(), 1);
    }
    TreeBuilder builder(features, labels, cfg, tree_rng);
    DecisionTree tree = builder.build(std::move(sample));
    for (std::size_t i = 0; i < n; ++i)
      if (!drawn[i]) tree.out_of_bag.push_back(i);
    model.trees[static_cast<std::size_t>(t)] = std::move(tree);
  }
  return model;
}

std::vector<std::optional<Prediction>> oob_predict(const ForestModel& model,
                                                   const Matrix& features) {
  std::vector<double> sum(features.rows(), 0.0);
  std::vector<std::size_t> votes(features.rows(), 0);
  for (const auto& tree : model.trees) {
    for (std::size_t i : tree.out_of_bag) {
      sum[i] += tree.predict_forged(features.row(i));
      ++votes[i];
    }
  }
  std::vector<std::optional<Prediction>> out(features.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (votes[i] == 0) continue;
    Prediction p;
    p.score = sum[i] / static_cast<double>(votes[i]);
    p.label = p.score >= 0.5 ? Label::forged : Label::genuine;
    out[i] = p;
  }
  return out;
}

}  // namespace sigvae::classify
