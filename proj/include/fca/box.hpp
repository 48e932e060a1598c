// box.hpp — axis-aligned pixel-space box and IoU.
#pragma once

#include <algorithm>

namespace fca {

struct Box {
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    bool valid() const { return x_min < x_max && y_min < y_max; }
};

inline double intersection_area(const Box& a, const Box& b) {
    double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline double iou(const Box& a, const Box& b) {
    double inter = intersection_area(a, b);
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace fca
