#include "dualres/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace dualres {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<GroundTruthTriplet> ground_truth_triplets(const SceneAnnotation& scene) {
  std::vector<GroundTruthTriplet> out;
  for (const auto& rel : scene.relations) {
    const auto& s = scene.objects[static_cast<std::size_t>(rel.subject)];
    const auto& o = scene.objects[static_cast<std::size_t>(rel.object)];
    out.push_back({s.box, o.box, s.label, rel.predicate, o.label});
  }
  return out;
}

MatchResult match_triplets(const std::vector<PredictedTriplet>& ranked, const std::vector<GroundTruthTriplet>& gt,
                           double min_iou) {
  MatchResult result;
  result.matched_rank.assign(gt.size(), -1);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& p = ranked[r];
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (result.matched_rank[g] >= 0) continue;
      const auto& t = gt[g];
      if (p.subject_label != t.subject_label || p.predicate != t.predicate || p.object_label != t.object_label) {
        continue;
      }
      if (compute_iou(p.subject_box, t.subject_box) < min_iou || compute_iou(p.object_box, t.object_box) < min_iou) {
        continue;
      }
      result.matched_rank[g] = static_cast<int>(r);
      break;
    }
  }
  return result;
}

double recall_at_k(const MatchResult& matches, int k) {
  if (matches.matched_rank.empty()) return 0.0;
  const auto hit = std::count_if(matches.matched_rank.begin(), matches.matched_rank.end(),
                                 [k](int r) { return r >= 0 && r < k; });
  return static_cast<double>(hit) / static_cast<double>(matches.matched_rank.size());
}

std::vector<double> per_predicate_recall(const std::vector<ImageMatches>& images, int k, int num_predicates,
                                         MeanRecallPooling pooling) {
  const auto C = static_cast<std::size_t>(num_predicates);
  std::vector<double> num(C, 0.0), den(C, 0.0);
  for (const auto& img : images) {
    std::vector<double> hit(C, 0.0), total(C, 0.0);
    for (std::size_t g = 0; g < img.gt_predicates.size(); ++g) {
      const auto c = static_cast<std::size_t>(img.gt_predicates[g]);
      total[c] += 1.0;
      const int r = img.matches.matched_rank[g];
      if (r >= 0 && r < k) hit[c] += 1.0;
    }
    for (std::size_t c = 0; c < C; ++c) {
      if (total[c] == 0.0) continue;
      if (pooling == MeanRecallPooling::Pooled) {
        num[c] += hit[c];
        den[c] += total[c];
      } else {
        num[c] += hit[c] / total[c];
        den[c] += 1.0;
      }
    }
  }
  std::vector<double> out(C, kNaN);
  for (std::size_t c = 0; c < C; ++c) {
    if (den[c] > 0.0) out[c] = num[c] / den[c];
  }
  return out;
}

namespace {
double mean_of_defined(const std::vector<double>& values) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t c = 1; c < values.size(); ++c) {
    if (std::isnan(values[c])) continue;
    sum += values[c];
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}
}  // namespace

double mean_recall_at_k(const std::vector<ImageMatches>& images, int k, int num_predicates,
                        MeanRecallPooling pooling) {
  return mean_of_defined(per_predicate_recall(images, k, num_predicates, pooling));
}

double mean_image_recall(const std::vector<ImageMatches>& images, int k) {
  double sum = 0.0;
  int count = 0;
  for (const auto& img : images) {
    if (img.matches.matched_rank.empty()) continue;
    sum += recall_at_k(img.matches, k);
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

const MetricEntry& MetricReport::at(Constraint constraint, int k) const {
  for (const auto& e : entries) {
    if (e.constraint == constraint && e.k == k) return e;
  }
  throw std::out_of_range("MetricReport: no entry for " + to_string(constraint) + " K=" + std::to_string(k));
}

MetricReport compute_report(const std::vector<ScenePrediction>& predictions,
                            const std::vector<SceneAnnotation>& scenes, TaskMode task, int num_predicates,
                            const std::vector<int>& ks, MeanRecallPooling pooling) {
  if (predictions.size() != scenes.size()) {
    throw std::invalid_argument("compute_report: one prediction per scene required");
  }
  if (ks.empty()) throw std::invalid_argument("compute_report: no K values");
  MetricReport report;
  report.task = task;
  report.num_predicates = num_predicates;
  report.gt_count.assign(static_cast<std::size_t>(num_predicates), 0);
  const int k_max = *std::max_element(ks.begin(), ks.end());

  for (Constraint constraint : {Constraint::Constrained, Constraint::Unconstrained}) {
    std::vector<ImageMatches> images;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const auto gt = ground_truth_triplets(scenes[i]);
      ImageMatches m;
      m.matches = match_triplets(rank_triplets(predictions[i], k_max, constraint), gt);
      for (const auto& t : gt) m.gt_predicates.push_back(t.predicate);
      images.push_back(std::move(m));
    }
    if (constraint == Constraint::Constrained) {
      for (const auto& img : images) {
        for (int c : img.gt_predicates) ++report.gt_count[static_cast<std::size_t>(c)];
      }
    }
    for (int k : ks) {
      MetricEntry e;
      e.constraint = constraint;
      e.k = k;
      e.recall = mean_image_recall(images, k);
      e.per_predicate = per_predicate_recall(images, k, num_predicates, pooling);
      e.mean_recall = mean_of_defined(e.per_predicate);
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

CsvTable report_table(const MetricReport& report) {
  CsvTable t;
  t.header = {"task", "mode", "K", "metric", "value"};
  for (const auto& e : report.entries) {
    t.rows.push_back({to_string(report.task), to_string(e.constraint), std::to_string(e.k), "R",
                      format_double(e.recall)});
    t.rows.push_back({to_string(report.task), to_string(e.constraint), std::to_string(e.k), "mR",
                      format_double(e.mean_recall)});
  }
  return t;
}

CsvTable per_predicate_table(const MetricReport& report) {
  CsvTable t;
  t.header = {"predicate", "gt_count"};
  std::vector<const MetricEntry*> cols;
  for (const auto& e : report.entries) {
    if (e.constraint != Constraint::Constrained) continue;
    t.header.push_back("recall@" + std::to_string(e.k));
    cols.push_back(&e);
  }
  for (int c = 1; c < report.num_predicates; ++c) {
    std::vector<std::string> row{std::to_string(c), std::to_string(report.gt_count[static_cast<std::size_t>(c)])};
    for (const auto* e : cols) row.push_back(format_double(e->per_predicate[static_cast<std::size_t>(c)]));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<PerPredicateRow> read_per_predicate(const CsvTable& table, const std::string& recall_column) {
  const std::size_t pred_col = table.column("predicate");
  const std::size_t count_col = table.column("gt_count");
  std::size_t recall_col = table.header.size() - 1;
  if (!recall_column.empty()) recall_col = table.column(recall_column);
  if (recall_col == pred_col || recall_col == count_col) {
    throw DataError("per-predicate table has no recall column");
  }
  std::vector<PerPredicateRow> rows;
  for (const auto& r : table.rows) {
    try {
      rows.push_back({std::stoi(r[pred_col]), std::stoll(r[count_col]), parse_double(r[recall_col])});
    } catch (const std::invalid_argument&) {
      throw DataError("per-predicate table: malformed row for predicate '" + r[pred_col] + "'");
    }
  }
  return rows;
}

CsvTable recall_delta_table(const std::vector<PerPredicateRow>& a, const std::vector<PerPredicateRow>& b,
                            const std::vector<long long>& frequency) {
  std::map<int, double> ra, rb;
  for (const auto& r : a) ra[r.predicate] = r.recall;
  for (const auto& r : b) rb[r.predicate] = r.recall;
  std::vector<int> only_a, only_b;
  for (const auto& [p, _] : ra) {
    if (!rb.count(p)) only_a.push_back(p);
  }
  for (const auto& [p, _] : rb) {
    if (!ra.count(p)) only_b.push_back(p);
  }
  if (!only_a.empty() || !only_b.empty()) {
    auto join = [](const std::vector<int>& v) {
      std::string s;
      for (int p : v) s += (s.empty() ? "" : " ") + std::to_string(p);
      return s.empty() ? std::string("none") : s;
    };
    throw DataError("predicate sets differ: only in first [" + join(only_a) + "], only in second [" +
                    join(only_b) + "]");
  }
  std::vector<int> order;
  for (const auto& [p, _] : ra) order.push_back(p);
  auto freq = [&](int p) {
    return p >= 0 && static_cast<std::size_t>(p) < frequency.size() ? frequency[static_cast<std::size_t>(p)] : 0LL;
  };
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return freq(x) > freq(y); });
  CsvTable t;
  t.header = {"predicate", "freq_rank", "recall_a", "recall_b", "delta"};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int p = order[i];
    t.rows.push_back({std::to_string(p), std::to_string(i + 1), format_double(ra[p]), format_double(rb[p]),
                      format_double(ra[p] - rb[p])});
  }
  return t;
}

}  // namespace dualres
