#include "sigvae/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sigvae::classify {

EvalReport evaluate(const std::vector<Label>& predictions, const std::vector<Label>& labels,
                    const std::vector<double>& scores) {
  if (predictions.size() != labels.size() || scores.size() != labels.size())
    throw std::invalid_argument("evaluate: predictions, labels and scores differ in length");

  EvalReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == Label::forged;
    const bool called = predictions[i] == Label::forged;
    if (actual && called) ++r.tp;
    else if (!actual && called) ++r.fp;
    else if (!actual && !called) ++r.tn;
    else ++r.fn;
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(r.tp + r.tn, labels.size());
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.f1 = (r.precision + r.recall) == 0.0 ? 0.0
                                         : 2.0 * r.precision * r.recall / (r.precision + r.recall);

  const std::size_t positives = r.tp + r.fn;
  const std::size_t negatives = r.tn + r.fp;
  if (positives == 0 || negatives == 0) return r;

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  r.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      if (labels[order[i]] == Label::forged) ++tp;
      else ++fp;
      ++i;
    }
    r.roc.push_back({t, ratio(fp, negatives), ratio(tp, positives)});
  }
  r.auc = roc_auc(r.roc);
  return r;
}

double roc_auc(const std::vector<RocPoint>& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i)
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  return area;
}

}  // namespace sigvae::classify
