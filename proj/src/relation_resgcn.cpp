#include "dualres/relation_resgcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dualres {

RelationBranchParams RelationBranchParams::create(ParameterStore& store, const RelationBranchDims& dims, Rng& rng) {
  const int d = dims.feature_dim;
  const int dr = dims.relation_dim;
  const int C = dims.num_predicates;
  RelationBranchParams p{};
  p.node_W = store.add_weight("rel.node.W", dr, 3 * d, rng);
  p.node_b = store.add_constant("rel.node.b", 1, dr, 0.0);
  p.W_V = store.add_weight("rel.W_V", dr, dr, rng);
  p.W_K = store.add_weight("rel.W_K", d, dr, rng);
  p.W_Q = store.add_weight("rel.W_Q", d, dr, rng);
  p.W_G = store.add_weight("rel.W_G", d, dims.spatial_dim, rng);
  p.W_q = store.add_weight("rel.W_q", dr, 2 * dr, rng);
  p.psi_W = store.add_weight("rel.psi.W", dims.class_width, 2 * dr, rng);
  p.psi_b = store.add_constant("rel.psi.b", 1, dims.class_width, 0.0);
  p.varphi_W = store.add_weight("rel.varphi.W", dims.prior_dim, C * dims.class_width, rng);
  p.varphi_b = store.add_constant("rel.varphi.b", 1, dims.prior_dim, 0.0);
  p.ln_gain = store.add_constant("rel.ln_gain", 1, dr + dims.prior_dim, 1.0);
  p.ln_bias = store.add_constant("rel.ln_bias", 1, dr + dims.prior_dim, 0.0);
  p.phi_W = store.add_weight("rel.phi.W", dr, dr + dims.prior_dim, rng);
  p.phi_b = store.add_constant("rel.phi.b", 1, dr, 0.0);
  p.cls_W = store.add_weight("rel.cls.W", C, dr, rng);
  p.cls_b = store.add_constant("rel.cls.b", 1, C, 0.0);
  return p;
}

RelationBranchWeights RelationBranchWeights::bind(ParamBinder& b, const RelationBranchParams& p) {
  return {b(p.node_W), b(p.node_b), b(p.W_V),     b(p.W_K),      b(p.W_Q),     b(p.W_G),
          b(p.W_q),    b(p.psi_W),  b(p.psi_b),   b(p.varphi_W), b(p.varphi_b), b(p.ln_gain),
          b(p.ln_bias), b(p.phi_W), b(p.phi_b),   b(p.cls_W),    b(p.cls_b)};
}

ad::Var build_relation_nodes(ad::Var xhat_i, ad::Var u, ad::Var xhat_j, ad::Var node_W, ad::Var node_b) {
  return ad::linear(ad::concat_cols({xhat_i, u, xhat_j}), node_W, node_b);
}

ad::Var normalized_edge_weights(ad::Var geometric, ad::Var appearance) {
  const Mat& G = geometric.value();
  const Mat& A = appearance.value();
  const Eigen::Index n = G.rows();
  if (G.cols() != n || A.rows() != n || A.cols() != n) {
    throw std::invalid_argument("normalized_edge_weights: square matrices of equal size required");
  }
  // exp(a_ij - m_i) with a per-row shift m_i; the shift cancels in the ratio. It is
  // taken over contributing entries only, so a_ij with g_ij = 0 has no effect at all.
  Mat expo = Mat::Zero(n, n);
  Mat E = Mat::Zero(n, n);
  Eigen::VectorXd denom = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && G(i, j) > 0.0) m = std::max(m, A(i, j));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || !(G(i, j) > 0.0)) continue;
      expo(i, j) = std::exp(A(i, j) - m);
      E(i, j) = G(i, j) * expo(i, j);
      denom(i) += E(i, j);
    }
    if (denom(i) > 0.0) {
      E.row(i) /= denom(i);
    } else {
      E.row(i).setZero();
    }
  }
  Mat out = E;
  return geometric.tape().record(
      std::move(out), {geometric, appearance},
      [geometric, appearance, E = std::move(E), expo = std::move(expo), denom = std::move(denom)](
          ad::Tape& t, const Mat& g) {
        const Eigen::Index n = E.rows();
        const bool need_g = t.requires_grad(geometric);
        const bool need_a = t.requires_grad(appearance);
        Mat* gg = need_g ? &t.grad_buffer(geometric) : nullptr;
        Mat* ga = need_a ? &t.grad_buffer(appearance) : nullptr;
        const Mat& G = t.value(geometric);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!(denom(i) > 0.0)) continue;
          const double inner = g.row(i).dot(E.row(i));
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            // d e_ij / d raw_ij where raw_ij = g_ij exp(a_ij - m_i)
            const double draw = (g(i, j) - inner) / denom(i);
            if (gg) (*gg)(i, j) += draw * expo(i, j);
            if (ga) (*ga)(i, j) += draw * G(i, j) * expo(i, j);
          }
        }
      });
}

ad::Var edge_weights(ad::Var visual, ad::Var spatial, ad::Var W_G, ad::Var W_K, ad::Var W_Q) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(W_K.rows()));
  const ad::Var geo = ad::linear(spatial, W_G);
  const ad::Var geometric = ad::scale(ad::relu(ad::matmul_nt(geo, geo)), inv_sqrt_d);
  const ad::Var appearance =
      ad::scale(ad::matmul_nt(ad::linear(visual, W_K), ad::linear(visual, W_Q)), inv_sqrt_d);
  return normalized_edge_weights(geometric, appearance);
}

ad::Var cooccurrence_aggregate(ad::Var states, const Mat& M, int num_nodes) {
  const Eigen::Index C = M.rows();
  if (M.cols() != C || states.rows() != num_nodes * C) {
    throw std::invalid_argument("cooccurrence_aggregate: states must have num_nodes * C rows");
  }
  const Eigen::Index D = states.cols();
  const double norm = 1.0 / std::max(1, num_nodes - 1);
  const Mat& Q = states.value();
  Mat total = Mat::Zero(C, D);
  for (int j = 0; j < num_nodes; ++j) total += Q.middleRows(j * C, C);
  Mat out(num_nodes * C, 2 * D);
  for (int i = 0; i < num_nodes; ++i) {
    const Mat others = total - Q.middleRows(i * C, C);
    out.block(i * C, 0, C, D).noalias() = norm * (M.transpose() * others);
    out.block(i * C, D, C, D).noalias() = norm * (M * others);
  }
  return states.tape().record(std::move(out), {states}, [states, M, num_nodes, norm](ad::Tape& t, const Mat& g) {
    const Eigen::Index C = M.rows();
    const Eigen::Index D = t.value(states).cols();
    Mat d_others_total = Mat::Zero(C, D);
    std::vector<Mat> d_others(static_cast<std::size_t>(num_nodes));
    for (int i = 0; i < num_nodes; ++i) {
      d_others[static_cast<std::size_t>(i)] =
          norm * (M * g.block(i * C, 0, C, D) + M.transpose() * g.block(i * C, D, C, D));
      d_others_total += d_others[static_cast<std::size_t>(i)];
    }
    Mat& gq = t.grad_buffer(states);
    for (int j = 0; j < num_nodes; ++j) {
      gq.middleRows(j * C, C) += d_others_total - d_others[static_cast<std::size_t>(j)];
    }
  });
}

ad::Var prior_context(ad::Var visual, const Mat& M, const RelationBranchWeights& w, int steps) {
  const int n = static_cast<int>(visual.rows());
  const int C = static_cast<int>(M.rows());
  const ad::Var initial = ad::repeat_rows(visual, C);
  ad::Var state = initial;
  for (int s = 0; s < steps; ++s) {
    state = ad::tanh(ad::linear(cooccurrence_aggregate(state, M, n), w.W_q));
  }
  const ad::Var per_class = ad::tanh(ad::linear(ad::concat_cols({initial, state}), w.psi_W, w.psi_b));
  const ad::Var stacked = ad::reshape(per_class, n, C * per_class.cols());
  return ad::linear(stacked, w.varphi_W, w.varphi_b);
}

ad::Var message_passing(ad::Var visual, ad::Var edges, ad::Var prior, const RelationBranchWeights& w) {
  const ad::Var messages = ad::matmul(edges, ad::linear(visual, w.W_V));
  const ad::Var normed = ad::layer_norm(ad::concat_cols({messages, prior}), w.ln_gain, w.ln_bias);
  return ad::add(visual, ad::relu(ad::linear(normed, w.phi_W, w.phi_b)));
}

ad::Var relation_branch_logits(ad::Var refined, ad::Var cls_W, ad::Var cls_b) {
  return ad::linear(refined, cls_W, cls_b);
}

}  // namespace dualres
