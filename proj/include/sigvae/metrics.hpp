#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "sigvae/manifest.hpp"

namespace sigvae::classify {

struct RocPoint {
  /// Scores >= threshold are called forged. The first point uses +inf.
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  std::vector<RocPoint> roc;
  /// Unset when only one class is present.
  std::optional<double> auc;
};

/// Confusion counts with forged as the positive class, plus the ROC swept
/// over every distinct score and its trapezoid AUC.
EvalReport evaluate(const std::vector<Label>& predictions, const std::vector<Label>& labels,
                    const std::vector<double>& scores);

/// Trapezoid area under the ROC points.
double roc_auc(const std::vector<RocPoint>& roc);

}  // namespace sigvae::classify
