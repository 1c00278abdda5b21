#pragma once

#include <string>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/types.hpp"

namespace dualres {

using ad::Mat;

enum class LossMode { CrossEntropy, Ohem };
std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct OhemSettings {
  /// Relations whose true-class probability is below this are hard.
  double threshold = 0.7;
  /// Fraction of the hard relations (highest loss first) that is kept.
  double keep_fraction = 0.7;

  void validate() const;

  friend bool operator==(const OhemSettings&, const OhemSettings&) = default;
};

/// Rows of the hard-example subset, ordered by descending loss (ties by row).
/// Empty when no relation is hard, meaning "fall back to all rows".
std::vector<int> ohem_selection(const std::vector<double>& true_class_probability, const OhemSettings& settings);

/// Plain-value OHEM loss over probabilities.
double ohem_loss(const Mat& probabilities, const std::vector<int>& labels, const OhemSettings& settings);

/// Mean cross-entropy of softmax(logits) rows; 0 for an empty batch.
ad::Var mean_cross_entropy(ad::Var logits, const std::vector<int>& labels);

/// OHEM on logits; the selection is treated as a constant of the graph.
ad::Var ohem_cross_entropy(ad::Var logits, const std::vector<int>& labels, const OhemSettings& settings);

/// Mean object CE + mean relation CE; the object term is dropped in PredCls.
ad::Var total_loss(ad::Var object_logits, const std::vector<int>& object_labels, ad::Var relation_logits,
                   const std::vector<int>& relation_labels, TaskMode mode);

}  // namespace dualres
