#pragma once

#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/params.hpp"
#include "dualres/types.hpp"

namespace dualres {

struct ObjectBranchDims {
  int feature_dim = 64;  // d
  int heads = 4;         // N contextual coefficients per pair
  int hidden_dim = 64;   // d_h, width after W_2 and the layer norm
  int num_object_classes = 8;
  int num_predicates = 11;
};

/// Ids of every learnable tensor of the object branch inside a ParameterStore.
struct ObjectBranchParams {
  ParamId W_s, W_o, Wca_s, Wca_o;
  ParamId W_coef;  // N x d, row n is the projection of head n
  ParamId W1, W2, W3;
  ParamId ln_gain, ln_bias;
  ParamId cls_W, cls_b;
  ParamId fuse_pair_Wx, fuse_pair_Wy;
  ParamId fuse_ctx_Wx, fuse_ctx_Wy;
  ParamId pair_W, pair_b;
  ParamId subj_skip_W, subj_skip_b;
  ParamId obj_skip_W, obj_skip_b;

  static ObjectBranchParams create(ParameterStore& store, const ObjectBranchDims& dims, Rng& rng);
};

struct CrossAttentionWeights {
  ad::Var W_s, W_o, Wca_s, Wca_o;
};

struct FusionWeights {
  ad::Var Wx, Wy;
};

struct RelationHeadWeights {
  FusionWeights pair_fusion;
  FusionWeights context_fusion;
  ad::Var pair_W, pair_b;
  ad::Var subj_W, subj_b;
  ad::Var obj_W, obj_b;
};

struct ObjectBranchWeights {
  CrossAttentionWeights attention;
  ad::Var W_coef, W1, W2, W3, ln_gain, ln_bias;
  ad::Var cls_W, cls_b;
  RelationHeadWeights relation;

  static ObjectBranchWeights bind(ParamBinder& binder, const ObjectBranchParams& ids);
};

/// Row-wise (W_s x_i ⊙ σ(W^CA_o x_j) + W_s x_i) ⊙ (W_o x_j ⊙ σ(W^CA_s x_i) + W_o x_j).
ad::Var cross_attention(ad::Var x_i, ad::Var x_j, const CrossAttentionWeights& w);

/// s_ij = σ(W^(n) · CA(CA(x_i, x_j), u_ij)) for each head n; one row per pair.
/// With `literal_form` the inner call is CA(x_i, x_i).
ad::Var contextual_coefficients(ad::Var x_i, ad::Var x_j, ad::Var u, const CrossAttentionWeights& w,
                                ad::Var W_coef, bool literal_form = false);

/// out[i] = Σ_{p : subject(p) = i} s_p ⊗ v_{object(p)}; shape num_objects x (N·d).
ad::Var kronecker_neighbor_sum(ad::Var coefficients, ad::Var values, const std::vector<ObjectPair>& pairs,
                               int num_objects);

/// x̂ = x + ReLU(W_3 LN(W_2 Σ_j s_ij ⊗ W_1 x_j)).
ad::Var aggregate_object_context(ad::Var x, ad::Var coefficients, const std::vector<ObjectPair>& pairs,
                                 ad::Var W1, ad::Var W2, ad::Var W3, ad::Var ln_gain, ad::Var ln_bias);

/// x ⊕ y = ReLU(W_x x + W_y y) - (W_x x - W_y y) ⊙ (W_x x - W_y y).
ad::Var fuse(ad::Var x, ad::Var y, const FusionWeights& w);

/// P^{rô} = pair_cls((x̂_i ⊕ x̂_j) ⊕ u) + subj_skip(x_i) + obj_skip(x_j), unnormalised.
ad::Var object_branch_relation_logits(ad::Var xhat_i, ad::Var xhat_j, ad::Var u, ad::Var x_i, ad::Var x_j,
                                      const RelationHeadWeights& w);

struct ObjectPrediction {
  Mat probabilities;
  std::vector<int> labels;
  std::vector<double> scores;
};

/// Softmax + argmax; in PredCls the given labels win with score 1.
ObjectPrediction predict_object_classes(const Mat& logits, TaskMode mode, const std::vector<int>& given_labels);

}  // namespace dualres
