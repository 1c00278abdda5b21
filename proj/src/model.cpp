#include "dualres/model.hpp"

#include <algorithm>

namespace dualres {

void AblationConfig::validate() const {
  if (!use_object_branch && !use_relation_branch) {
    throw ConfigError("ablation: at least one of the object and relation branches must be enabled");
  }
  if (heads != 1 && heads != 2 && heads != 4 && heads != 8) {
    throw ConfigError("ablation: heads must be 1, 2, 4 or 8, got " + std::to_string(heads));
  }
}

std::string AblationConfig::label() const {
  std::string out;
  auto append = [&out](const std::string& part) { out += out.empty() ? part : "+" + part; };
  if (!use_object_branch) append("no-object-branch");
  if (!use_relation_branch) append("no-relation-branch");
  if (!use_prior && use_relation_branch) append("no-prior");
  if (heads != 4) append("heads-" + std::to_string(heads));
  if (literal_eq2) append("literal-eq2");
  return out.empty() ? "full" : out;
}

nlohmann::json AblationConfig::to_json() const {
  return {{"use_object_branch", use_object_branch},
          {"use_relation_branch", use_relation_branch},
          {"use_prior", use_prior},
          {"heads", heads},
          {"literal_eq2", literal_eq2}};
}

AblationConfig AblationConfig::from_json(const nlohmann::json& doc) {
  AblationConfig a;
  a.use_object_branch = doc.at("use_object_branch").get<bool>();
  a.use_relation_branch = doc.at("use_relation_branch").get<bool>();
  a.use_prior = doc.at("use_prior").get<bool>();
  a.heads = doc.at("heads").get<int>();
  a.literal_eq2 = doc.at("literal_eq2").get<bool>();
  a.validate();
  return a;
}

AblationConfig AblationConfig::from_name(const std::string& name) {
  AblationConfig a;
  if (name == "full") {
  } else if (name == "no-object-branch") {
    a.use_object_branch = false;
  } else if (name == "no-relation-branch") {
    a.use_relation_branch = false;
  } else if (name == "no-prior") {
    a.use_prior = false;
  } else if (name == "literal-eq2") {
    a.literal_eq2 = true;
  } else if (name.rfind("heads-", 0) == 0) {
    try {
      a.heads = std::stoi(name.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("unknown ablation variant '" + name + "'");
    }
  } else {
    throw ConfigError("unknown ablation variant '" + name + "'");
  }
  a.validate();
  return a;
}

void ModelConfig::validate() const {
  const std::pair<const char*, int> widths[] = {
      {"appearance_dim", appearance_dim}, {"union_dim", union_dim},
      {"num_object_classes", num_object_classes}, {"feature_dim", feature_dim},
      {"hidden_dim", hidden_dim}, {"relation_dim", relation_dim},
      {"spatial_hidden_dim", spatial_hidden_dim}, {"spatial_dim", spatial_dim},
      {"prior_dim", prior_dim}, {"class_width", class_width}, {"prior_steps", prior_steps}};
  for (const auto& [key, value] : widths) {
    if (value < 1) throw ConfigError(std::string("model: ") + key + " must be positive");
  }
  if (num_predicates < 2) throw ConfigError("model: num_predicates must be at least 2");
  ablation.validate();
}

FeatureDims ModelConfig::feature_dims() const {
  FeatureDims d;
  d.appearance_dim = appearance_dim;
  d.num_object_classes = num_object_classes;
  d.union_dim = union_dim;
  d.hidden_dim = feature_dim;
  d.spatial_hidden_dim = spatial_hidden_dim;
  d.spatial_dim = spatial_dim;
  return d;
}

ObjectBranchDims ModelConfig::object_dims() const {
  return {feature_dim, ablation.heads, hidden_dim, num_object_classes, num_predicates};
}

RelationBranchDims ModelConfig::relation_dims() const {
  return {feature_dim, relation_dim, spatial_dim, prior_dim, class_width, num_predicates, prior_steps};
}

ModelConfig ModelConfig::for_data(const GeneratorConfig& generator) {
  ModelConfig c;
  c.appearance_dim = generator.appearance_dim;
  c.union_dim = generator.union_dim;
  c.num_object_classes = generator.num_object_classes;
  c.num_predicates = generator.num_predicates;
  return c;
}

void ModelConfig::read_widths(KeyValueConfig& kv) {
  feature_dim = kv.get_int("feature_dim", feature_dim);
  hidden_dim = kv.get_int("hidden_dim", hidden_dim);
  relation_dim = kv.get_int("relation_dim", relation_dim);
  spatial_hidden_dim = kv.get_int("spatial_hidden_dim", spatial_hidden_dim);
  spatial_dim = kv.get_int("spatial_dim", spatial_dim);
  prior_dim = kv.get_int("prior_dim", prior_dim);
  class_width = kv.get_int("class_width", class_width);
  prior_steps = kv.get_int("prior_steps", prior_steps);
}

nlohmann::json ModelConfig::to_json() const {
  return {{"appearance_dim", appearance_dim},
          {"union_dim", union_dim},
          {"num_object_classes", num_object_classes},
          {"num_predicates", num_predicates},
          {"feature_dim", feature_dim},
          {"hidden_dim", hidden_dim},
          {"relation_dim", relation_dim},
          {"spatial_hidden_dim", spatial_hidden_dim},
          {"spatial_dim", spatial_dim},
          {"prior_dim", prior_dim},
          {"class_width", class_width},
          {"prior_steps", prior_steps},
          {"ablation", ablation.to_json()}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  ModelConfig c;
  c.appearance_dim = doc.at("appearance_dim").get<int>();
  c.union_dim = doc.at("union_dim").get<int>();
  c.num_object_classes = doc.at("num_object_classes").get<int>();
  c.num_predicates = doc.at("num_predicates").get<int>();
  c.feature_dim = doc.at("feature_dim").get<int>();
  c.hidden_dim = doc.at("hidden_dim").get<int>();
  c.relation_dim = doc.at("relation_dim").get<int>();
  c.spatial_hidden_dim = doc.at("spatial_hidden_dim").get<int>();
  c.spatial_dim = doc.at("spatial_dim").get<int>();
  c.prior_dim = doc.at("prior_dim").get<int>();
  c.class_width = doc.at("class_width").get<int>();
  c.prior_steps = doc.at("prior_steps").get<int>();
  c.ablation = AblationConfig::from_json(doc.at("ablation"));
  c.validate();
  return c;
}

Model::Model(ModelConfig config, ad::Mat prior, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  set_prior(std::move(prior));
  Rng rng = make_rng(init_seed, {hash_string("init")});
  features_ = FeatureParams::create(store_, config_.feature_dims(), rng);
  object_ = ObjectBranchParams::create(store_, config_.object_dims(), rng);
  relation_ = RelationBranchParams::create(store_, config_.relation_dims(), rng);
}

void Model::set_prior(ad::Mat prior) {
  if (prior.rows() != config_.num_predicates || prior.cols() != config_.num_predicates) {
    throw DataError("prior matrix is " + std::to_string(prior.rows()) + "x" + std::to_string(prior.cols()) +
                    " but the model has " + std::to_string(config_.num_predicates) + " predicates");
  }
  prior_ = std::move(prior);
}

ModelOutputs Model::forward(ParamBinder& b, const SceneInput& in) const {
  ad::Tape& tape = b.tape();
  const AblationConfig& ab = config_.ablation;

  const ad::Var x = project_object_features(tape.constant(in.object_inputs), b(features_.object_W),
                                            b(features_.object_b));
  const ad::Var u = ad::linear(tape.constant(in.union_features), b(features_.union_W), b(features_.union_b));

  std::vector<int> ctx_subj, ctx_obj;
  for (const auto& p : in.context_pairs) {
    ctx_subj.push_back(p.subject);
    ctx_obj.push_back(p.object);
  }

  ad::Var xhat = x;
  if (ab.use_object_branch && !in.context_pairs.empty()) {
    const CrossAttentionWeights att{b(object_.W_s), b(object_.W_o), b(object_.Wca_s), b(object_.Wca_o)};
    const ad::Var coef = contextual_coefficients(ad::gather_rows(x, ctx_subj), ad::gather_rows(x, ctx_obj), u,
                                                 att, b(object_.W_coef), ab.literal_eq2);
    xhat = aggregate_object_context(x, coef, in.context_pairs, b(object_.W1), b(object_.W2), b(object_.W3),
                                    b(object_.ln_gain), b(object_.ln_bias));
  }
  ModelOutputs out;
  out.object_logits = ad::linear(xhat, b(object_.cls_W), b(object_.cls_b));

  if (in.candidates.empty()) {
    out.relation_logits = tape.constant(ad::Mat::Zero(0, config_.num_predicates));
    return out;
  }
  std::vector<int> subj, obj;
  for (std::size_t k = 0; k < in.candidates.size(); ++k) {
    const ObjectPair p = in.candidate_pair(k);
    subj.push_back(p.subject);
    obj.push_back(p.object);
  }
  const ad::Var uc = ad::gather_rows(u, in.candidates);
  const ad::Var xhat_i = ad::gather_rows(xhat, subj);
  const ad::Var xhat_j = ad::gather_rows(xhat, obj);

  ad::Var logits;
  bool have = false;
  if (ab.use_object_branch) {
    RelationHeadWeights head;
    head.pair_fusion = {b(object_.fuse_pair_Wx), b(object_.fuse_pair_Wy)};
    head.context_fusion = {b(object_.fuse_ctx_Wx), b(object_.fuse_ctx_Wy)};
    head.pair_W = b(object_.pair_W);
    head.pair_b = b(object_.pair_b);
    head.subj_W = b(object_.subj_skip_W);
    head.subj_b = b(object_.subj_skip_b);
    head.obj_W = b(object_.obj_skip_W);
    head.obj_b = b(object_.obj_skip_b);
    logits = object_branch_relation_logits(xhat_i, xhat_j, uc, ad::gather_rows(x, subj), ad::gather_rows(x, obj),
                                           head);
    have = true;
  }
  if (ab.use_relation_branch) {
    const RelationBranchWeights w = RelationBranchWeights::bind(b, relation_);
    const ad::Var nodes = build_relation_nodes(xhat_i, uc, xhat_j, w.node_W, w.node_b);
    const ad::Var spatial = encode_spatial_features(tape.constant(in.spatial_raw), b(features_.spatial_W1),
                                                    b(features_.spatial_b1), b(features_.spatial_W2),
                                                    b(features_.spatial_b2));
    const ad::Var edges = edge_weights(nodes, spatial, w.W_G, w.W_K, w.W_Q);
    const ad::Var prior = ab.use_prior
                              ? prior_context(nodes, prior_, w, config_.prior_steps)
                              : tape.constant(ad::Mat::Zero(nodes.rows(), config_.prior_dim));
    const ad::Var rel = relation_branch_logits(message_passing(nodes, edges, prior, w), w.cls_W, w.cls_b);
    logits = have ? ad::add(logits, rel) : rel;
  }
  out.relation_logits = logits;
  return out;
}

std::vector<std::string> Model::active_parameters() const {
  const AblationConfig& ab = config_.ablation;
  std::vector<std::string> names;
  for (const auto& p : store_.all()) {
    const bool object_part = p.name.rfind("obj.", 0) == 0 && p.name.rfind("obj.cls.", 0) != 0;
    const bool relation_part = p.name.rfind("rel.", 0) == 0 || p.name.rfind("feat.spatial.", 0) == 0;
    const bool prior_part = p.name == "rel.W_q" || p.name.rfind("rel.psi.", 0) == 0 ||
                            p.name.rfind("rel.varphi.", 0) == 0;
    if (object_part && !ab.use_object_branch) continue;
    if (relation_part && !ab.use_relation_branch) continue;
    if (prior_part && !ab.use_prior) continue;
    names.push_back(p.name);
  }
  return names;
}

Model assemble(const AblationConfig& ablation, ModelConfig config, const CooccurrenceMatrix& prior,
               std::uint64_t init_seed) {
  ablation.validate();
  config.ablation = ablation;
  return Model(std::move(config), prior.M, init_seed);
}

}  // namespace dualres
