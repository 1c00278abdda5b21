#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "dualres/autodiff.hpp"
#include "dualres/config.hpp"
#include "dualres/dataset.hpp"
#include "dualres/rng.hpp"

namespace dualres {

using ad::Mat;

enum class Split { Train, Test };

struct GeneratorConfig {
  std::uint64_t seed = 0;
  int num_train_images = 200;
  int num_test_images = 50;
  int min_objects = 6;
  int max_objects = 6;
  int relations_per_image = 6;
  int num_object_classes = 8;
  int num_predicates = 11;
  double zipf_exponent = 1.5;
  double confusability = 0.6;
  int appearance_dim = 64;
  int union_dim = 64;
  double noise = 0.3;
  /// Number of most frequent predicates that act as heads.
  int num_head_predicates = 3;
  /// Probability mass each object-class pair puts on its dominant head predicate.
  double pair_dominance = 0.7;
  /// Norm scale of predicate and object prototypes.
  double prototype_scale = 1.5;
  /// Logit margin of the simulated detector's class scores.
  double detector_strength = 2.0;
  int image_width = 640;
  int image_height = 480;
  /// SGGen simulation: box jitter as a fraction of box size, duplicate-detection rate.
  double box_jitter = 0.08;
  double duplicate_rate = 0.3;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Reads every documented key; `seed` is required, unknown keys are errors.
  static GeneratorConfig from_config(KeyValueConfig& kv);
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& doc);
};

struct WorldModel {
  Mat object_prototypes;     // C^o x d_f
  Mat predicate_prototypes;  // C^r x d_u, row 0 (no relation) is zero
  /// Designated head for each tail predicate; -1 for heads and predicate 0.
  std::vector<int> head_of;
  /// Row (c_s * C^o + c_o) is the predicate distribution for that class pair.
  Mat pair_table;
  /// Analytic Zipf pmf over predicates (entry 0 is zero).
  std::vector<double> zipf_pmf;

  friend bool operator==(const WorldModel&, const WorldModel&) = default;
};

/// Zipf(s) pmf over ranks 1..count.
std::vector<double> zipf_pmf(int count, double exponent);

WorldModel build_world(const GeneratorConfig& config);

/// Regenerates feature vectors from (seed, image id, indices); never stored.
class FeatureOracle {
 public:
  FeatureOracle(GeneratorConfig config, WorldModel world);
  explicit FeatureOracle(const GeneratorConfig& config);

  const GeneratorConfig& config() const { return config_; }
  const WorldModel& world() const { return world_; }

  /// f^o = object prototype of `label` + noise.
  std::vector<double> appearance(const std::string& image_id, int object_index, int label) const;
  /// u = predicate prototype + noise; pure noise when predicate is 0.
  std::vector<double> union_features(const std::string& image_id, int subject, int object, int predicate) const;
  /// Softmax of a noisy logit vector peaked at `label`; `slot` keys the noise.
  std::vector<double> detector_scores(const std::string& image_id, int slot, int label) const;

  struct Detection {
    BoundingBox box;
    int source_object = 0;
  };
  /// SGGen simulation: jittered copies of annotated boxes plus seeded duplicates.
  std::vector<Detection> detections(const SceneAnnotation& scene) const;

 private:
  GeneratorConfig config_;
  WorldModel world_;
};

Dataset generate_dataset(const GeneratorConfig& config, Split split);

std::string split_prefix(Split split);

/// Rebuilds the oracle from a dataset's embedded generator record.
FeatureOracle oracle_from_dataset(const Dataset& dataset);

}  // namespace dualres
