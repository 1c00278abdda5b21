#pragma once

#include <array>

namespace dualres {

/// Axis-aligned box in corner form (x1, y1, x2, y2), pixel coordinates.
struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const;
  double height() const;
  /// max(0, x2 - x1) * max(0, y2 - y1)
  double area() const;
  bool valid() const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double compute_iou(const BoundingBox& a, const BoundingBox& b);

/// Smallest box covering both inputs.
BoundingBox union_box(const BoundingBox& a, const BoundingBox& b);

/// Overlap rectangle; the all-zero box when the inputs are disjoint.
BoundingBox intersection_box(const BoundingBox& a, const BoundingBox& b);

/// Divides x by image width and y by image height. Throws on zero-sized dims.
std::array<double, 4> normalize_box(const BoundingBox& box, double width, double height);

}  // namespace dualres
