#pragma once

#include "dualres/autodiff.hpp"
#include "dualres/params.hpp"

namespace dualres {

struct RelationBranchDims {
  int feature_dim = 64;    // d: width of x̂ and of the key/query/geometric embeddings
  int relation_dim = 64;   // d_r: width of relation node features
  int spatial_dim = 32;    // d_b
  int prior_dim = 64;      // d_q: width of q̂_i
  int class_width = 8;     // d_r': per-class width after ψ_r
  int num_predicates = 11;
  int prior_steps = 1;     // T propagation steps over the co-occurrence graph
};

struct RelationBranchParams {
  ParamId node_W, node_b;  // [x̂_i ; u_ij ; x̂_j] -> d_r
  ParamId W_V, W_K, W_Q, W_G;
  ParamId W_q;             // prior state update, 2·d_r -> d_r
  ParamId psi_W, psi_b;    // per-class combiner, 2·d_r -> d_r'
  ParamId varphi_W, varphi_b;  // cross-class combiner, C^r·d_r' -> d_q
  ParamId ln_gain, ln_bias;
  ParamId phi_W, phi_b;    // message transform, d_r + d_q -> d_r
  ParamId cls_W, cls_b;

  static RelationBranchParams create(ParameterStore& store, const RelationBranchDims& dims, Rng& rng);
};

struct RelationBranchWeights {
  ad::Var node_W, node_b, W_V, W_K, W_Q, W_G, W_q, psi_W, psi_b, varphi_W, varphi_b;
  ad::Var ln_gain, ln_bias, phi_W, phi_b, cls_W, cls_b;

  static RelationBranchWeights bind(ParamBinder& binder, const RelationBranchParams& ids);
};

/// x^r = W [x̂_i ; u_ij ; x̂_j] + b, one row per candidate pair.
ad::Var build_relation_nodes(ad::Var xhat_i, ad::Var u, ad::Var xhat_j, ad::Var node_W, ad::Var node_b);

/// e_ij = g_ij exp(a_ij) / Σ_{k≠i} g_ik exp(a_ik) with the diagonal excluded;
/// entries with g_ij <= 0 do not contribute and a row whose denominator is zero stays zero.
ad::Var normalized_edge_weights(ad::Var geometric, ad::Var appearance);

/// w^G = max(0, <W_G x^b_i, W_G x^b_j>)/√d, w^r = <W_K x^r_i, W_Q x^r_j>/√d, then normalised.
ad::Var edge_weights(ad::Var visual, ad::Var spatial, ad::Var W_G, ad::Var W_K, ad::Var W_Q);

/// Bidirectional co-occurrence aggregation. `states` has num_nodes·C rows
/// (row i·C + c is q_ic); output row i·C + c is
/// [Σ_{j≠i} Σ_c' M[c',c] q_jc' ; Σ_{j≠i} Σ_c' M[c,c'] q_jc'] / max(1, num_nodes - 1).
ad::Var cooccurrence_aggregate(ad::Var states, const Mat& M, int num_nodes);

/// q̂_i from the co-occurrence graph: states start at x^r_i for every class,
/// `steps` tanh updates, then ψ_r per class and φ over the class concatenation.
ad::Var prior_context(ad::Var visual, const Mat& M, const RelationBranchWeights& w, int steps);

/// x̂^r_i = x^r_i + ReLU(φ_r(LN([Σ_j e_ij W_V x^r_j ; q̂_i]))).
ad::Var message_passing(ad::Var visual, ad::Var edges, ad::Var prior, const RelationBranchWeights& w);

ad::Var relation_branch_logits(ad::Var refined, ad::Var cls_W, ad::Var cls_b);

}  // namespace dualres
