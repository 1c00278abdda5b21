#pragma once

#include <array>
#include <vector>

#include "dualres/autodiff.hpp"
#include "dualres/box.hpp"
#include "dualres/params.hpp"
#include "dualres/types.hpp"

namespace dualres {

struct FeatureDims {
  int appearance_dim = 64;
  int num_object_classes = 8;
  int union_dim = 64;
  /// Shared object feature width d.
  int hidden_dim = 64;
  int spatial_hidden_dim = 32;
  int spatial_dim = 32;

  int object_input_dim() const { return appearance_dim + 4 + num_object_classes; }
};

struct FeatureParams {
  ParamId object_W, object_b;
  ParamId union_W, union_b;
  ParamId spatial_W1, spatial_b1, spatial_W2, spatial_b2;

  static FeatureParams create(ParameterStore& store, const FeatureDims& dims, Rng& rng);
};

inline constexpr int kRawSpatialDim = 16;

/// [b_i, b_j, b_i∪j, b_i∩j] in normalised coordinates.
std::array<double, kRawSpatialDim> raw_spatial_features(const BoundingBox& subject, const BoundingBox& object,
                                                        double image_width, double image_height);

/// Rows of [appearance ; normalised box ; class scores]. Throws DataError on
/// dimension mismatch against `dims`.
Mat object_input_rows(const std::vector<ObjectProposal>& proposals, double image_width, double image_height,
                      const FeatureDims& dims);

/// x_i = W [f ; b ; s] + bias, one row per object.
ad::Var project_object_features(ad::Var inputs, ad::Var weight, ad::Var bias);

/// Two-layer perceptron from the 16-dim raw box encoding to the spatial width.
ad::Var encode_spatial_features(ad::Var raw, ad::Var W1, ad::Var b1, ad::Var W2, ad::Var b2);

}  // namespace dualres
