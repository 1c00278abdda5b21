#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "dualres/config.hpp"
#include "dualres/features.hpp"
#include "dualres/object_resgcn.hpp"
#include "dualres/prior.hpp"
#include "dualres/relation_resgcn.hpp"
#include "dualres/scene_input.hpp"

namespace dualres {

struct AblationConfig {
  bool use_object_branch = true;
  bool use_relation_branch = true;
  /// Off: the prior context q̂ is identically zero.
  bool use_prior = true;
  int heads = 4;
  /// Coefficients from CA(CA(x_i, x_i), u) instead of CA(CA(x_i, x_j), u).
  bool literal_eq2 = false;

  /// Throws ConfigError when both branches are off or heads is not 1, 2, 4 or 8.
  void validate() const;
  /// Short tag such as "full", "no-relation-branch" or "heads-1".
  std::string label() const;
  nlohmann::json to_json() const;
  static AblationConfig from_json(const nlohmann::json& doc);
  /// Parses one named variant: full, no-object-branch, no-relation-branch, no-prior, heads-N, literal-eq2.
  static AblationConfig from_name(const std::string& name);

  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

struct ModelConfig {
  int appearance_dim = 64;
  int union_dim = 64;
  int num_object_classes = 8;
  int num_predicates = 11;
  int feature_dim = 64;
  int hidden_dim = 64;
  int relation_dim = 64;
  int spatial_hidden_dim = 32;
  int spatial_dim = 32;
  int prior_dim = 64;
  int class_width = 8;
  int prior_steps = 1;
  AblationConfig ablation;

  void validate() const;
  FeatureDims feature_dims() const;
  ObjectBranchDims object_dims() const;
  RelationBranchDims relation_dims() const;
  /// Data-facing widths copied from a generator record.
  static ModelConfig for_data(const GeneratorConfig& generator);
  /// Reads optional width keys (feature_dim, hidden_dim, ...) from a config file.
  void read_widths(KeyValueConfig& kv);
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelOutputs {
  ad::Var object_logits;    // n x C^o
  ad::Var relation_logits;  // candidates x C^r, pre-softmax sum of the enabled branches
};

/// The dual-branch scene graph model: parameters, prior and wiring.
class Model {
 public:
  Model(ModelConfig config, ad::Mat prior, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  const ad::Mat& prior() const { return prior_; }
  void set_prior(ad::Mat prior);
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  /// Builds the forward graph of one scene on the binder's tape.
  ModelOutputs forward(ParamBinder& binder, const SceneInput& input) const;

  /// Names of parameters the current ablation actually uses.
  std::vector<std::string> active_parameters() const;

 private:
  ModelConfig config_;
  ad::Mat prior_;
  ParameterStore store_;
  FeatureParams features_{};
  ObjectBranchParams object_{};
  RelationBranchParams relation_{};
};

/// Validates the ablation and the prior shape, then initialises parameters from `init_seed`.
Model assemble(const AblationConfig& ablation, ModelConfig config, const CooccurrenceMatrix& prior,
               std::uint64_t init_seed);

}  // namespace dualres
