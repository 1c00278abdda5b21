#include "dualres/features.hpp"

namespace dualres {

FeatureParams FeatureParams::create(ParameterStore& store, const FeatureDims& dims, Rng& rng) {
  FeatureParams p{};
  p.object_W = store.add_weight("feat.object.W", dims.hidden_dim, dims.object_input_dim(), rng);
  p.object_b = store.add_constant("feat.object.b", 1, dims.hidden_dim, 0.0);
  p.union_W = store.add_weight("feat.union.W", dims.hidden_dim, dims.union_dim, rng);
  p.union_b = store.add_constant("feat.union.b", 1, dims.hidden_dim, 0.0);
  p.spatial_W1 = store.add_weight("feat.spatial.W1", dims.spatial_hidden_dim, kRawSpatialDim, rng);
  p.spatial_b1 = store.add_constant("feat.spatial.b1", 1, dims.spatial_hidden_dim, 0.0);
  p.spatial_W2 = store.add_weight("feat.spatial.W2", dims.spatial_dim, dims.spatial_hidden_dim, rng);
  p.spatial_b2 = store.add_constant("feat.spatial.b2", 1, dims.spatial_dim, 0.0);
  return p;
}

std::array<double, kRawSpatialDim> raw_spatial_features(const BoundingBox& subject, const BoundingBox& object,
                                                        double image_width, double image_height) {
  std::array<double, kRawSpatialDim> out{};
  const BoundingBox boxes[4] = {subject, object, union_box(subject, object), intersection_box(subject, object)};
  for (int k = 0; k < 4; ++k) {
    const auto nb = normalize_box(boxes[k], image_width, image_height);
    for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(4 * k + c)] = nb[static_cast<std::size_t>(c)];
  }
  return out;
}

Mat object_input_rows(const std::vector<ObjectProposal>& proposals, double image_width, double image_height,
                      const FeatureDims& dims) {
  Mat rows(static_cast<Eigen::Index>(proposals.size()), dims.object_input_dim());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& p = proposals[i];
    if (static_cast<int>(p.appearance.size()) != dims.appearance_dim) {
      throw DataError("object " + std::to_string(i) + ": appearance has " + std::to_string(p.appearance.size()) +
                      " values, expected " + std::to_string(dims.appearance_dim));
    }
    if (static_cast<int>(p.class_scores.size()) != dims.num_object_classes) {
      throw DataError("object " + std::to_string(i) + ": class_scores has " +
                      std::to_string(p.class_scores.size()) + " values, expected " +
                      std::to_string(dims.num_object_classes));
    }
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    for (double v : p.appearance) rows(r, c++) = v;
    for (double v : normalize_box(p.box, image_width, image_height)) rows(r, c++) = v;
    for (double v : p.class_scores) rows(r, c++) = v;
  }
  return rows;
}

ad::Var project_object_features(ad::Var inputs, ad::Var weight, ad::Var bias) {
  return ad::linear(inputs, weight, bias);
}

ad::Var encode_spatial_features(ad::Var raw, ad::Var W1, ad::Var b1, ad::Var W2, ad::Var b2) {
  return ad::linear(ad::relu(ad::linear(raw, W1, b1)), W2, b2);
}

}  // namespace dualres
