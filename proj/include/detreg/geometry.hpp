#pragma once

#include <algorithm>
#include <cmath>

namespace detreg {

/// Axis-aligned box in corner form. Corner form keeps the intersection
/// arithmetic branch-free; (x, y, w, h) inputs are converted at ingestion.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;
};

inline bool is_valid(const BoundingBox& b) {
    return std::isfinite(b.x_min) && std::isfinite(b.y_min) &&
           std::isfinite(b.x_max) && std::isfinite(b.y_max) &&
           b.x_min < b.x_max && b.y_min < b.y_max;
}

inline double area(const BoundingBox& b) {
    return (b.x_max - b.x_min) * (b.y_max - b.y_min);
}

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

/// Intersection over union, in [0,1]. Symmetric; 0 for disjoint boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = area(a) + area(b) - inter;
    return inter / uni;
}

}  // namespace detreg
