#pragma once

#include <filesystem>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/dataset.hpp"

namespace dualres {

/// M[c, c'] = P(predicate c present in an image | predicate c' present),
/// counted once per image. Predicate 0 is never counted.
struct CooccurrenceMatrix {
  ad::Mat M;
  /// Number of images containing each predicate.
  std::vector<long long> presence;
  /// copresence[c * C + c'] = number of images containing both c and c'.
  std::vector<long long> copresence;

  int num_predicates() const { return static_cast<int>(M.rows()); }
  long long copresent(int c, int c_prime) const {
    return copresence[static_cast<std::size_t>(c * num_predicates() + c_prime)];
  }

  /// Identity prior (no cross-category influence); used in ablations and tests.
  static CooccurrenceMatrix identity(int num_predicates);
};

CooccurrenceMatrix build_cooccurrence(const Dataset& dataset);

/// CSV with a header row of category indices; row r lists M[c, r] for every c.
std::string cooccurrence_to_csv(const CooccurrenceMatrix& prior);
ad::Mat cooccurrence_from_csv(const std::string& text);
void save_cooccurrence(const CooccurrenceMatrix& prior, const std::filesystem::path& path);
/// Only M is restored; counts are not part of the file.
CooccurrenceMatrix load_cooccurrence(const std::filesystem::path& path);

/// Empirical predicate distribution per (subject class, object class), add-one smoothed.
class FrequencyBaseline {
 public:
  static FrequencyBaseline fit(const Dataset& dataset);

  /// Distribution over all predicates for an ordered class pair.
  std::vector<double> distribution(int subject_class, int object_class) const;
  int argmax(int subject_class, int object_class) const;
  int num_object_classes() const { return num_object_classes_; }
  int num_predicates() const { return num_predicates_; }

 private:
  int num_object_classes_ = 0;
  int num_predicates_ = 0;
  ad::Mat counts_;  // (C_o * C_o) x C_r
};

}  // namespace dualres
