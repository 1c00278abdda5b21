#include "dualres/object_resgcn.hpp"

#include <stdexcept>

namespace dualres {

ObjectBranchParams ObjectBranchParams::create(ParameterStore& store, const ObjectBranchDims& dims, Rng& rng) {
  const int d = dims.feature_dim;
  const int C_r = dims.num_predicates;
  ObjectBranchParams p{};
  p.W_s = store.add_weight("obj.W_s", d, d, rng);
  p.W_o = store.add_weight("obj.W_o", d, d, rng);
  p.Wca_s = store.add_weight("obj.Wca_s", d, d, rng);
  p.Wca_o = store.add_weight("obj.Wca_o", d, d, rng);
  p.W_coef = store.add_weight("obj.W_coef", dims.heads, d, rng);
  p.W1 = store.add_weight("obj.W1", d, d, rng);
  p.W2 = store.add_weight("obj.W2", dims.hidden_dim, dims.heads * d, rng);
  p.W3 = store.add_weight("obj.W3", d, dims.hidden_dim, rng);
  p.ln_gain = store.add_constant("obj.ln_gain", 1, dims.hidden_dim, 1.0);
  p.ln_bias = store.add_constant("obj.ln_bias", 1, dims.hidden_dim, 0.0);
  p.cls_W = store.add_weight("obj.cls.W", dims.num_object_classes, d, rng);
  p.cls_b = store.add_constant("obj.cls.b", 1, dims.num_object_classes, 0.0);
  p.fuse_pair_Wx = store.add_weight("obj.fuse_pair.Wx", d, d, rng);
  p.fuse_pair_Wy = store.add_weight("obj.fuse_pair.Wy", d, d, rng);
  p.fuse_ctx_Wx = store.add_weight("obj.fuse_ctx.Wx", d, d, rng);
  p.fuse_ctx_Wy = store.add_weight("obj.fuse_ctx.Wy", d, d, rng);
  p.pair_W = store.add_weight("obj.pair_cls.W", C_r, d, rng);
  p.pair_b = store.add_constant("obj.pair_cls.b", 1, C_r, 0.0);
  p.subj_skip_W = store.add_weight("obj.subj_skip.W", C_r, d, rng);
  p.subj_skip_b = store.add_constant("obj.subj_skip.b", 1, C_r, 0.0);
  p.obj_skip_W = store.add_weight("obj.obj_skip.W", C_r, d, rng);
  p.obj_skip_b = store.add_constant("obj.obj_skip.b", 1, C_r, 0.0);
  return p;
}

ObjectBranchWeights ObjectBranchWeights::bind(ParamBinder& b, const ObjectBranchParams& p) {
  ObjectBranchWeights w;
  w.attention = {b(p.W_s), b(p.W_o), b(p.Wca_s), b(p.Wca_o)};
  w.W_coef = b(p.W_coef);
  w.W1 = b(p.W1);
  w.W2 = b(p.W2);
  w.W3 = b(p.W3);
  w.ln_gain = b(p.ln_gain);
  w.ln_bias = b(p.ln_bias);
  w.cls_W = b(p.cls_W);
  w.cls_b = b(p.cls_b);
  w.relation.pair_fusion = {b(p.fuse_pair_Wx), b(p.fuse_pair_Wy)};
  w.relation.context_fusion = {b(p.fuse_ctx_Wx), b(p.fuse_ctx_Wy)};
  w.relation.pair_W = b(p.pair_W);
  w.relation.pair_b = b(p.pair_b);
  w.relation.subj_W = b(p.subj_skip_W);
  w.relation.subj_b = b(p.subj_skip_b);
  w.relation.obj_W = b(p.obj_skip_W);
  w.relation.obj_b = b(p.obj_skip_b);
  return w;
}

ad::Var cross_attention(ad::Var x_i, ad::Var x_j, const CrossAttentionWeights& w) {
  const ad::Var subj = ad::linear(x_i, w.W_s);
  const ad::Var obj = ad::linear(x_j, w.W_o);
  const ad::Var left = ad::add(ad::mul(subj, ad::sigmoid(ad::linear(x_j, w.Wca_o))), subj);
  const ad::Var right = ad::add(ad::mul(obj, ad::sigmoid(ad::linear(x_i, w.Wca_s))), obj);
  return ad::mul(left, right);
}

ad::Var contextual_coefficients(ad::Var x_i, ad::Var x_j, ad::Var u, const CrossAttentionWeights& w,
                                ad::Var W_coef, bool literal_form) {
  const ad::Var pair = cross_attention(x_i, literal_form ? x_i : x_j, w);
  return ad::sigmoid(ad::linear(cross_attention(pair, u, w), W_coef));
}

ad::Var kronecker_neighbor_sum(ad::Var coefficients, ad::Var values, const std::vector<ObjectPair>& pairs,
                               int num_objects) {
  if (coefficients.rows() != static_cast<Eigen::Index>(pairs.size())) {
    throw std::invalid_argument("kronecker_neighbor_sum: one coefficient row per pair required");
  }
  const Eigen::Index heads = coefficients.cols();
  const Eigen::Index d = values.cols();
  Mat out = Mat::Zero(num_objects, heads * d);
  const Mat& S = coefficients.value();
  const Mat& V = values.value();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    if (i < 0 || i >= num_objects || j < 0 || j >= V.rows()) {
      throw std::invalid_argument("kronecker_neighbor_sum: pair index out of range");
    }
    for (Eigen::Index h = 0; h < heads; ++h) {
      out.row(i).segment(h * d, d) += S(static_cast<Eigen::Index>(p), h) * V.row(j);
    }
  }
  return coefficients.tape().record(
      std::move(out), {coefficients, values}, [coefficients, values, pairs](ad::Tape& t, const Mat& g) {
        const Mat& S = t.value(coefficients);
        const Mat& V = t.value(values);
        const Eigen::Index heads = S.cols();
        const Eigen::Index d = V.cols();
        const bool need_s = t.requires_grad(coefficients);
        const bool need_v = t.requires_grad(values);
        Mat* gs = need_s ? &t.grad_buffer(coefficients) : nullptr;
        Mat* gv = need_v ? &t.grad_buffer(values) : nullptr;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          const auto [i, j] = pairs[p];
          const auto pr = static_cast<Eigen::Index>(p);
          for (Eigen::Index h = 0; h < heads; ++h) {
            const auto block = g.row(i).segment(h * d, d);
            if (gs) (*gs)(pr, h) += block.dot(V.row(j));
            if (gv) gv->row(j) += S(pr, h) * block;
          }
        }
      });
}

ad::Var aggregate_object_context(ad::Var x, ad::Var coefficients, const std::vector<ObjectPair>& pairs,
                                 ad::Var W1, ad::Var W2, ad::Var W3, ad::Var ln_gain, ad::Var ln_bias) {
  const ad::Var values = ad::linear(x, W1);
  const ad::Var stacked = kronecker_neighbor_sum(coefficients, values, pairs, static_cast<int>(x.rows()));
  const ad::Var normed = ad::layer_norm(ad::linear(stacked, W2), ln_gain, ln_bias);
  return ad::add(x, ad::relu(ad::linear(normed, W3)));
}

ad::Var fuse(ad::Var x, ad::Var y, const FusionWeights& w) {
  const ad::Var px = ad::linear(x, w.Wx);
  const ad::Var py = ad::linear(y, w.Wy);
  const ad::Var diff = ad::sub(px, py);
  return ad::sub(ad::relu(ad::add(px, py)), ad::mul(diff, diff));
}

ad::Var object_branch_relation_logits(ad::Var xhat_i, ad::Var xhat_j, ad::Var u, ad::Var x_i, ad::Var x_j,
                                      const RelationHeadWeights& w) {
  const ad::Var r = fuse(fuse(xhat_i, xhat_j, w.pair_fusion), u, w.context_fusion);
  const ad::Var pair_logits = ad::linear(r, w.pair_W, w.pair_b);
  const ad::Var subj_logits = ad::linear(x_i, w.subj_W, w.subj_b);
  const ad::Var obj_logits = ad::linear(x_j, w.obj_W, w.obj_b);
  return ad::add(ad::add(pair_logits, subj_logits), obj_logits);
}

ObjectPrediction predict_object_classes(const Mat& logits, TaskMode mode, const std::vector<int>& given_labels) {
  ObjectPrediction out;
  out.probabilities = ad::softmax_rows(logits);
  const auto n = static_cast<std::size_t>(logits.rows());
  out.labels.resize(n);
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    out.scores[i] = out.probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    out.labels[i] = static_cast<int>(best);
  }
  if (mode == TaskMode::PredCls) {
    if (given_labels.size() != n) throw std::invalid_argument("predict_object_classes: PredCls needs labels");
    for (std::size_t i = 0; i < n; ++i) {
      out.labels[i] = given_labels[i];
      out.scores[i] = 1.0;
    }
  }
  return out;
}

}  // namespace dualres
