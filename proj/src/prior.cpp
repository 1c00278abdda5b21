#include "dualres/prior.hpp"

#include <set>

#include "dualres/csv.hpp"

namespace dualres {

CooccurrenceMatrix CooccurrenceMatrix::identity(int num_predicates) {
  CooccurrenceMatrix p;
  p.M = ad::Mat::Identity(num_predicates, num_predicates);
  p.presence.assign(static_cast<std::size_t>(num_predicates), 0);
  p.copresence.assign(static_cast<std::size_t>(num_predicates * num_predicates), 0);
  return p;
}

CooccurrenceMatrix build_cooccurrence(const Dataset& dataset) {
  if (dataset.images.empty()) throw DataError("build_cooccurrence: dataset is empty");
  const int C = dataset.meta.num_predicates;
  CooccurrenceMatrix out;
  out.presence.assign(static_cast<std::size_t>(C), 0);
  out.copresence.assign(static_cast<std::size_t>(C * C), 0);
  for (const auto& image : dataset.images) {
    std::set<int> present;
    for (const auto& rel : image.relations) {
      if (rel.predicate != kNoRelation) present.insert(rel.predicate);
    }
    for (int c : present) {
      ++out.presence[static_cast<std::size_t>(c)];
      for (int c2 : present) ++out.copresence[static_cast<std::size_t>(c * C + c2)];
    }
  }
  out.M = ad::Mat::Zero(C, C);
  for (int c = 0; c < C; ++c) {
    for (int cp = 0; cp < C; ++cp) {
      const long long denom = out.presence[static_cast<std::size_t>(cp)];
      if (denom == 0) continue;
      out.M(c, cp) = static_cast<double>(out.copresent(c, cp)) / static_cast<double>(denom);
    }
  }
  return out;
}

std::string cooccurrence_to_csv(const CooccurrenceMatrix& prior) {
  const int C = prior.num_predicates();
  CsvTable table;
  table.header.push_back("given");
  for (int c = 0; c < C; ++c) table.header.push_back(std::to_string(c));
  for (int cp = 0; cp < C; ++cp) {
    std::vector<std::string> row{std::to_string(cp)};
    for (int c = 0; c < C; ++c) row.push_back(format_double(prior.M(c, cp)));
    table.rows.push_back(std::move(row));
  }
  return write_csv(table);
}

ad::Mat cooccurrence_from_csv(const std::string& text) {
  const CsvTable table = parse_csv(text);
  const auto C = static_cast<Eigen::Index>(table.header.size()) - 1;
  if (C < 1 || static_cast<Eigen::Index>(table.rows.size()) != C) {
    throw DataError("prior csv: expected a square C x C block with a header row");
  }
  ad::Mat M(C, C);
  for (Eigen::Index cp = 0; cp < C; ++cp) {
    const auto& row = table.rows[static_cast<std::size_t>(cp)];
    if (row[0] != std::to_string(cp)) throw DataError("prior csv: row " + std::to_string(cp) + " is out of order");
    for (Eigen::Index c = 0; c < C; ++c) {
      const double v = parse_double(row[static_cast<std::size_t>(c + 1)]);
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("prior csv: entry outside [0,1]");
      M(c, cp) = v;
    }
  }
  return M;
}

void save_cooccurrence(const CooccurrenceMatrix& prior, const std::filesystem::path& path) {
  write_text_file(path, cooccurrence_to_csv(prior));
}

CooccurrenceMatrix load_cooccurrence(const std::filesystem::path& path) {
  CooccurrenceMatrix p;
  p.M = cooccurrence_from_csv(read_text_file(path));
  return p;
}

FrequencyBaseline FrequencyBaseline::fit(const Dataset& dataset) {
  if (dataset.images.empty()) throw DataError("frequency_baseline: dataset is empty");
  FrequencyBaseline fb;
  fb.num_object_classes_ = dataset.meta.num_object_classes;
  fb.num_predicates_ = dataset.meta.num_predicates;
  const int C_o = fb.num_object_classes_;
  fb.counts_ = ad::Mat::Ones(C_o * C_o, fb.num_predicates_);
  for (const auto& image : dataset.images) {
    for (const auto& rel : image.relations) {
      const int cs = image.objects[static_cast<std::size_t>(rel.subject)].label;
      const int co = image.objects[static_cast<std::size_t>(rel.object)].label;
      fb.counts_(cs * C_o + co, rel.predicate) += 1.0;
    }
  }
  return fb;
}

std::vector<double> FrequencyBaseline::distribution(int subject_class, int object_class) const {
  const auto row = counts_.row(subject_class * num_object_classes_ + object_class);
  const double total = row.sum();
  std::vector<double> out(static_cast<std::size_t>(num_predicates_));
  for (int k = 0; k < num_predicates_; ++k) out[static_cast<std::size_t>(k)] = row(k) / total;
  return out;
}

int FrequencyBaseline::argmax(int subject_class, int object_class) const {
  const auto dist = distribution(subject_class, object_class);
  int best = 1;
  for (int k = 1; k < num_predicates_; ++k) {
    if (dist[static_cast<std::size_t>(k)] > dist[static_cast<std::size_t>(best)]) best = k;
  }
  return best;
}

}  // namespace dualres
