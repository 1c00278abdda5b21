#include "dualres/box.hpp"

#include <algorithm>
#include <cmath>

#include "dualres/types.hpp"

namespace dualres {

double BoundingBox::width() const { return std::max(0.0, x2 - x1); }
double BoundingBox::height() const { return std::max(0.0, y2 - y1); }
double BoundingBox::area() const { return width() * height(); }

bool BoundingBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 <= x2 && y1 <= y2;
}

double compute_iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_box(a, b).area();
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2), std::max(a.y2, b.y2)};
}

BoundingBox intersection_box(const BoundingBox& a, const BoundingBox& b) {
  const BoundingBox r{std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2),
                      std::min(a.y2, b.y2)};
  if (r.x1 > r.x2 || r.y1 > r.y2) return {};
  return r;
}

std::array<double, 4> normalize_box(const BoundingBox& box, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw DataError("normalize_box: image dimensions must be positive");
  }
  return {box.x1 / width, box.y1 / height, box.x2 / width, box.y2 / height};
}

}  // namespace dualres
