#include "dualres/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dualres {

std::string to_string(LossMode mode) { return mode == LossMode::Ohem ? "ohem" : "ce"; }

LossMode parse_loss_mode(const std::string& text) {
  if (text == "ce") return LossMode::CrossEntropy;
  if (text == "ohem") return LossMode::Ohem;
  throw ConfigError("unknown loss mode '" + text + "' (expected ce or ohem)");
}

void OhemSettings::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("ohem threshold must be in (0, 1]");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("ohem keep fraction must be in (0, 1]");
}

std::vector<int> ohem_selection(const std::vector<double>& p_true, const OhemSettings& settings) {
  std::vector<int> hard;
  for (std::size_t i = 0; i < p_true.size(); ++i) {
    if (p_true[i] < settings.threshold) hard.push_back(static_cast<int>(i));
  }
  // Lower true-class probability means higher loss.
  std::stable_sort(hard.begin(), hard.end(), [&](int a, int b) {
    return p_true[static_cast<std::size_t>(a)] < p_true[static_cast<std::size_t>(b)];
  });
  const auto keep = static_cast<std::size_t>(std::ceil(settings.keep_fraction * static_cast<double>(hard.size())));
  hard.resize(std::min(hard.size(), keep));
  return hard;
}

namespace {
std::vector<double> true_class_probabilities(const Mat& P, const std::vector<int>& labels) {
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = P(static_cast<Eigen::Index>(i), labels[i]);
  return out;
}
}  // namespace

double ohem_loss(const Mat& P, const std::vector<int>& labels, const OhemSettings& settings) {
  const auto p_true = true_class_probabilities(P, labels);
  std::vector<int> rows = ohem_selection(p_true, settings);
  if (rows.empty()) {
    rows.resize(labels.size());
    std::iota(rows.begin(), rows.end(), 0);
  }
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (int r : rows) sum -= std::log(p_true[static_cast<std::size_t>(r)]);
  return sum / static_cast<double>(rows.size());
}

ad::Var mean_cross_entropy(ad::Var logits, const std::vector<int>& labels) {
  if (labels.empty()) return logits.tape().constant(Mat::Zero(1, 1));
  return ad::scale(ad::cross_entropy_sum(logits, labels), 1.0 / static_cast<double>(labels.size()));
}

ad::Var ohem_cross_entropy(ad::Var logits, const std::vector<int>& labels, const OhemSettings& settings) {
  if (labels.empty()) return logits.tape().constant(Mat::Zero(1, 1));
  const auto p_true = true_class_probabilities(ad::softmax_rows(logits.value()), labels);
  const std::vector<int> rows = ohem_selection(p_true, settings);
  if (rows.empty()) return mean_cross_entropy(logits, labels);
  std::vector<int> kept_labels;
  for (int r : rows) kept_labels.push_back(labels[static_cast<std::size_t>(r)]);
  return mean_cross_entropy(ad::gather_rows(logits, rows), kept_labels);
}

ad::Var total_loss(ad::Var object_logits, const std::vector<int>& object_labels, ad::Var relation_logits,
                   const std::vector<int>& relation_labels, TaskMode mode) {
  const ad::Var rel = mean_cross_entropy(relation_logits, relation_labels);
  if (mode == TaskMode::PredCls) return rel;
  return ad::add(mean_cross_entropy(object_logits, object_labels), rel);
}

}  // namespace dualres
