#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dualres/gradcheck.hpp"
#include "dualres/prior.hpp"
#include "dualres/relation_resgcn.hpp"
#include "test_support.hpp"

namespace dualres {
namespace {

using ad::Mat;
using ad::Tape;
using ad::Var;
using testing::random_matrix;

Mat edge_ref(const Mat& X, const Mat& B, const Mat& WG, const Mat& WK, const Mat& WQ) {
  const Eigen::Index n = X.rows();
  const double root = std::sqrt(static_cast<double>(WK.rows()));
  Mat e = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double denom = 0.0;
    std::vector<double> raw(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double g = std::max(0.0, (WG * B.row(i).transpose()).dot(WG * B.row(j).transpose())) / root;
      const double a = (WK * X.row(i).transpose()).dot(WQ * X.row(j).transpose()) / root;
      raw[static_cast<std::size_t>(j)] = g * std::exp(a);
      denom += raw[static_cast<std::size_t>(j)];
    }
    for (Eigen::Index j = 0; j < n; ++j) e(i, j) = denom > 0.0 ? raw[static_cast<std::size_t>(j)] / denom : 0.0;
  }
  return e;
}

// Four nested loops over (i, c, j, c'), no matrix algebra.
Mat aggregate_ref(const Mat& Q, const Mat& M, int n) {
  const int C = static_cast<int>(M.rows());
  const Eigen::Index D = Q.cols();
  const double norm = 1.0 / std::max(1, n - 1);
  Mat out = Mat::Zero(n * C, 2 * D);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < C; ++c) {
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        for (int cp = 0; cp < C; ++cp) {
          for (Eigen::Index k = 0; k < D; ++k) {
            out(i * C + c, k) += norm * M(cp, c) * Q(j * C + cp, k);
            out(i * C + c, D + k) += norm * M(c, cp) * Q(j * C + cp, k);
          }
        }
      }
    }
  }
  return out;
}

struct BranchMats {
  Mat node_W, node_b, W_V, W_K, W_Q, W_G, W_q, psi_W, psi_b, varphi_W, varphi_b, ln_gain, ln_bias, phi_W, phi_b,
      cls_W, cls_b;
};

BranchMats random_branch(const RelationBranchDims& d, std::mt19937_64& rng) {
  const int dr = d.relation_dim, dq = d.prior_dim;
  return {random_matrix(dr, 3 * d.feature_dim, rng), random_matrix(1, dr, rng), random_matrix(dr, dr, rng),
          random_matrix(d.feature_dim, dr, rng), random_matrix(d.feature_dim, dr, rng),
          random_matrix(d.feature_dim, d.spatial_dim, rng), random_matrix(dr, 2 * dr, rng),
          random_matrix(d.class_width, 2 * dr, rng), random_matrix(1, d.class_width, rng),
          random_matrix(dq, d.num_predicates * d.class_width, rng), random_matrix(1, dq, rng),
          Mat::Ones(1, dr + dq) + random_matrix(1, dr + dq, rng, 0.2), random_matrix(1, dr + dq, rng),
          random_matrix(dr, dr + dq, rng), random_matrix(1, dr, rng), random_matrix(d.num_predicates, dr, rng),
          random_matrix(1, d.num_predicates, rng)};
}

std::vector<Mat> as_list(const BranchMats& m) {
  return {m.node_W, m.node_b, m.W_V, m.W_K, m.W_Q, m.W_G, m.W_q, m.psi_W, m.psi_b,
          m.varphi_W, m.varphi_b, m.ln_gain, m.ln_bias, m.phi_W, m.phi_b, m.cls_W, m.cls_b};
}

RelationBranchWeights from_vars(const std::vector<Var>& v, std::size_t o) {
  return {v[o],      v[o + 1],  v[o + 2],  v[o + 3],  v[o + 4],  v[o + 5],  v[o + 6],  v[o + 7], v[o + 8],
          v[o + 9],  v[o + 10], v[o + 11], v[o + 12], v[o + 13], v[o + 14], v[o + 15], v[o + 16]};
}

RelationBranchWeights bind(Tape& t, const BranchMats& m) {
  std::vector<Var> v;
  for (const Mat& x : as_list(m)) v.push_back(t.constant(x));
  return from_vars(v, 0);
}

RelationBranchDims small_dims() {
  RelationBranchDims d;
  d.feature_dim = 3;
  d.relation_dim = 4;
  d.spatial_dim = 5;
  d.prior_dim = 3;
  d.class_width = 2;
  d.num_predicates = 3;
  return d;
}

TEST(RelationNodes, ConcatenateThenProject) {
  std::mt19937_64 rng(1);
  const Mat xi = random_matrix(6, 3, rng), u = random_matrix(6, 3, rng), xj = random_matrix(6, 3, rng);
  const Mat W = random_matrix(4, 9, rng), b = random_matrix(1, 4, rng);
  Tape t;
  const Mat got = build_relation_nodes(t.constant(xi), t.constant(u), t.constant(xj), t.constant(W), t.constant(b)).value();
  ASSERT_EQ(got.rows(), 6);
  for (int k = 0; k < 6; ++k) {
    Mat cat(1, 9);
    cat << xi.row(k), u.row(k), xj.row(k);
    EXPECT_TRUE(got.row(k).isApprox(cat * W.transpose() + b, 1e-13));
  }
  const Mat zero = build_relation_nodes(t.constant(Mat::Zero(2, 3)), t.constant(Mat::Zero(2, 3)), t.constant(Mat::Zero(2, 3)),
                                        t.constant(W), t.constant(Mat::Zero(1, 4)))
                       .value();
  EXPECT_TRUE(zero.isZero(0.0));
}

TEST(EdgeWeights, SingleLiveLink) {
  Tape t;
  Mat G = Mat::Zero(3, 3);
  G(0, 1) = 1.0;
  std::mt19937_64 rng(2);
  const Mat e = normalized_edge_weights(t.constant(G), t.constant(random_matrix(3, 3, rng, 5.0))).value();
  EXPECT_DOUBLE_EQ(e(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(e(0, 2), 0.0);
  EXPECT_TRUE(e.row(1).isZero(0.0));
  EXPECT_TRUE(e.row(2).isZero(0.0));
}

TEST(EdgeWeights, EqualScoresShareEvenly) {
  Tape t;
  const Mat e = normalized_edge_weights(t.constant(Mat::Constant(4, 4, 0.3)), t.constant(Mat::Constant(4, 4, -1.1))).value();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(e(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-15);
  }
}

TEST(EdgeWeights, MatchesDirectEvaluation) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat X = random_matrix(4, 5, rng), B = random_matrix(4, 6, rng);
    const Mat WG = random_matrix(3, 6, rng), WK = random_matrix(3, 5, rng), WQ = random_matrix(3, 5, rng);
    Tape t;
    const Mat got = edge_weights(t.constant(X), t.constant(B), t.constant(WG), t.constant(WK), t.constant(WQ)).value();
    EXPECT_TRUE(got.isApprox(edge_ref(X, B, WG, WK, WQ), 1e-12));
  }
}

TEST(EdgeWeights, RowStochasticAndNonNegative) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 6;
    Tape t;
    const Mat G = random_matrix(n, n, rng).cwiseMax(0.0);
    const Mat e = normalized_edge_weights(t.constant(G), t.constant(random_matrix(n, n, rng, 30.0))).value();
    EXPECT_GE(e.minCoeff(), 0.0);
    for (int i = 0; i < n; ++i) {
      bool live = false;
      for (int j = 0; j < n; ++j) {
        if (j != i && G(i, j) > 0.0) live = true;
        if (G(i, j) == 0.0 || i == j) EXPECT_EQ(e(i, j), 0.0);
      }
      if (live) EXPECT_NEAR(e.row(i).sum(), 1.0, 1e-6);
      else EXPECT_EQ(e.row(i).sum(), 0.0);
    }
  }
}

TEST(PriorAggregation, MatchesLoopNestOnHandCorpus) {
  const Mat full = build_cooccurrence(testing::hand_corpus()).M;
  const Mat M = full.bottomRightCorner(3, 3);
  std::mt19937_64 rng(5);
  const int n = 3, C = 3;
  const Mat Q = random_matrix(n * C, 4, rng);
  Tape t;
  EXPECT_TRUE(cooccurrence_aggregate(t.constant(Q), M, n).value().isApprox(aggregate_ref(Q, M, n), 1e-13));
}

TEST(PriorAggregation, RandomInstancesMatchLoopNest) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5, C = 2 + trial % 3;
    const Mat M = random_matrix(C, C, rng).cwiseAbs();
    const Mat Q = random_matrix(n * C, 3, rng);
    Tape t;
    EXPECT_TRUE(cooccurrence_aggregate(t.constant(Q), M, n).value().isApprox(aggregate_ref(Q, M, n), 1e-12));
  }
}

TEST(PriorAggregation, IdentityPriorKeepsMatchingClass) {
  std::mt19937_64 rng(7);
  const int C = 4;
  const Mat Q = random_matrix(2 * C, 3, rng);
  Tape t;
  const Mat a = cooccurrence_aggregate(t.constant(Q), Mat::Identity(C, C), 2).value();
  for (int c = 0; c < C; ++c) {
    EXPECT_TRUE(a.row(c).leftCols(3) == Q.row(C + c));
    EXPECT_TRUE(a.row(c).rightCols(3) == Q.row(C + c));
  }
}

TEST(PriorAggregation, SingleNodeHasNoContext) {
  std::mt19937_64 rng(8);
  const RelationBranchDims d = small_dims();
  const BranchMats m = random_branch(d, rng);
  Tape t;
  EXPECT_TRUE(cooccurrence_aggregate(t.constant(random_matrix(3, 2, rng)), Mat::Ones(3, 3), 1).value().isZero(0.0));
  // With a zero aggregate the update is tanh(0) = 0, so q̂ depends only on the initial state.
  const Var x = t.constant(random_matrix(1, d.relation_dim, rng));
  const Mat with_prior = prior_context(x, Mat::Ones(3, 3), bind(t, m), 1).value();
  const Mat identity = prior_context(x, Mat::Identity(3, 3), bind(t, m), 1).value();
  EXPECT_TRUE(with_prior == identity);
}

TEST(PriorContext, ChangingThePriorChangesTheOutput) {
  std::mt19937_64 rng(9);
  const RelationBranchDims d = small_dims();
  for (int trial = 0; trial < 20; ++trial) {
    const BranchMats m = random_branch(d, rng);
    Tape t;
    const Var x = t.constant(random_matrix(4, d.relation_dim, rng));
    const Mat M = random_matrix(3, 3, rng).cwiseAbs();
    const Mat a = prior_context(x, M, bind(t, m), 1).value();
    const Mat b = prior_context(x, Mat::Identity(3, 3), bind(t, m), 1).value();
    EXPECT_EQ(a.rows(), 4);
    EXPECT_EQ(a.cols(), d.prior_dim);
    EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(PriorContext, MatchesComposedOracle) {
  std::mt19937_64 rng(10);
  const RelationBranchDims d = small_dims();
  const BranchMats m = random_branch(d, rng);
  const int n = 3, C = d.num_predicates;
  const Mat X = random_matrix(n, d.relation_dim, rng);
  const Mat M = random_matrix(C, C, rng).cwiseAbs();
  Mat Q0(n * C, d.relation_dim);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < C; ++c) Q0.row(i * C + c) = X.row(i);
  }
  const Mat Q1 = (aggregate_ref(Q0, M, n) * m.W_q.transpose()).array().tanh().matrix();
  Mat expect(n, d.prior_dim);
  for (int i = 0; i < n; ++i) {
    Mat stacked(1, C * d.class_width);
    for (int c = 0; c < C; ++c) {
      Mat cat(1, 2 * d.relation_dim);
      cat << Q0.row(i * C + c), Q1.row(i * C + c);
      stacked.middleCols(c * d.class_width, d.class_width) = (cat * m.psi_W.transpose() + m.psi_b).array().tanh().matrix();
    }
    expect.row(i) = stacked * m.varphi_W.transpose() + m.varphi_b;
  }
  Tape t;
  EXPECT_TRUE(prior_context(t.constant(X), M, bind(t, m), 1).value().isApprox(expect, 1e-12));
}

TEST(MessagePassing, MatchesDirectSummation) {
  std::mt19937_64 rng(11);
  const RelationBranchDims d = small_dims();
  const BranchMats m = random_branch(d, rng);
  const int n = 3;
  const Mat X = random_matrix(n, d.relation_dim, rng);
  Mat E = random_matrix(n, n, rng).cwiseAbs();
  E.diagonal().setZero();
  const Mat q = random_matrix(n, d.prior_dim, rng);
  Tape t;
  const Mat got = message_passing(t.constant(X), t.constant(E), t.constant(q), bind(t, m)).value();
  for (int i = 0; i < n; ++i) {
    Mat msg = Mat::Zero(1, d.relation_dim);
    for (int j = 0; j < n; ++j) {
      if (j != i) msg += E(i, j) * (X.row(j) * m.W_V.transpose());
    }
    Mat cat(1, d.relation_dim + d.prior_dim);
    cat << msg, q.row(i);
    const double mean = cat.mean();
    const double var = (cat.array() - mean).square().mean();
    const Mat normed = ((cat.array() - mean) / std::sqrt(var + 1e-5) * m.ln_gain.array() + m.ln_bias.array()).matrix();
    const Mat expect = X.row(i) + (normed * m.phi_W.transpose() + m.phi_b).cwiseMax(0.0);
    EXPECT_TRUE(got.row(i).isApprox(expect, 1e-12));
  }
}

TEST(MessagePassing, ZeroTransformIsIdentity) {
  std::mt19937_64 rng(12);
  const RelationBranchDims d = small_dims();
  BranchMats m = random_branch(d, rng);
  m.phi_W.setZero();
  m.phi_b.setZero();
  const Mat X = random_matrix(4, d.relation_dim, rng);
  Tape t;
  const Mat got = message_passing(t.constant(X), t.constant(random_matrix(4, 4, rng).cwiseAbs()),
                                  t.constant(random_matrix(4, d.prior_dim, rng)), bind(t, m))
                      .value();
  EXPECT_TRUE(got == X);
}

TEST(MessagePassing, ZeroEdgesAndPriorIsIdentityWithZeroBias) {
  std::mt19937_64 rng(13);
  const RelationBranchDims d = small_dims();
  BranchMats m = random_branch(d, rng);
  m.ln_bias.setZero();
  m.phi_b.setZero();
  const Mat X = random_matrix(3, d.relation_dim, rng);
  Tape t;
  const Mat got = message_passing(t.constant(X), t.constant(Mat::Zero(3, 3)), t.constant(Mat::Zero(3, d.prior_dim)),
                                  bind(t, m))
                      .value();
  EXPECT_TRUE(got == X);
}

TEST(RelationClassifier, DenseOracle) {
  std::mt19937_64 rng(14);
  const Mat X = random_matrix(5, 4, rng), W = random_matrix(6, 4, rng), b = random_matrix(1, 6, rng);
  Tape t;
  const Mat got = relation_branch_logits(t.constant(X), t.constant(W), t.constant(b)).value();
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 6; ++c) {
      double v = b(0, c);
      for (int k = 0; k < 4; ++k) v += X(r, k) * W(c, k);
      EXPECT_NEAR(got(r, c), v, 1e-13);
    }
  }
  EXPECT_TRUE(relation_branch_logits(t.constant(Mat::Zero(2, 4)), t.constant(W), t.constant(Mat::Zero(1, 6))).value().isZero(0.0));
}

TEST(RelationBranchGradients, PassFiniteDifferences) {
  const RelationBranchDims d = small_dims();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const GraphFn edges = [](Tape&, const std::vector<Var>& v) { return edge_weights(v[0], v[1], v[2], v[3], v[4]); };
    const std::vector<Mat> edge_in{random_matrix(4, 5, rng), random_matrix(4, 6, rng), random_matrix(3, 6, rng),
                                   random_matrix(3, 5, rng), random_matrix(3, 5, rng)};
    EXPECT_LE(gradient_check(edges, edge_in, 1e-5, seed).max_relative_error, 1e-4);

    const Mat M = random_matrix(3, 3, rng).cwiseAbs();
    const GraphFn agg = [&M](Tape&, const std::vector<Var>& v) { return cooccurrence_aggregate(v[0], M, 3); };
    EXPECT_LE(gradient_check(agg, {random_matrix(9, 2, rng)}, 1e-5, seed).max_relative_error, 1e-4);

    // Whole branch: nodes, edges, prior context, message passing, classifier.
    const BranchMats m = random_branch(d, rng);
    const GraphFn branch = [&M, &d](Tape&, const std::vector<Var>& v) {
      const RelationBranchWeights w = from_vars(v, 4);
      const Var nodes = build_relation_nodes(v[0], v[1], v[2], w.node_W, w.node_b);
      const Var e = edge_weights(nodes, v[3], w.W_G, w.W_K, w.W_Q);
      const Var q = prior_context(nodes, M, w, d.prior_steps);
      return relation_branch_logits(message_passing(nodes, e, q, w), w.cls_W, w.cls_b);
    };
    std::vector<Mat> in{random_matrix(3, 3, rng), random_matrix(3, 3, rng), random_matrix(3, 3, rng),
                        random_matrix(3, d.spatial_dim, rng)};
    for (const Mat& p : as_list(m)) in.push_back(p);
    const auto res = gradient_check(branch, in, 1e-5, seed);
    EXPECT_TRUE(res.finite);
    EXPECT_LE(res.max_relative_error, 1e-4) << res.worst;
  }
}

}  // namespace
}  // namespace dualres
