#pragma once

#include <cmath>

namespace cfrs {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }
};

inline double distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

// Planar isometry p -> R(angle) * M * p + t, where M mirrors across the
// x-axis when `reflect` is set. Composition order is fixed so that
// inverse(apply(p)) == p.
struct Isometry {
    double rotation_angle = 0.0;
    bool reflect = false;
    Point translation{0.0, 0.0};

    Point apply(const Point& p) const {
        const double px = p.x;
        const double py = reflect ? -p.y : p.y;
        const double c = std::cos(rotation_angle);
        const double s = std::sin(rotation_angle);
        return {c * px - s * py + translation.x, s * px + c * py + translation.y};
    }

    Point invert(const Point& p) const {
        const double qx = p.x - translation.x;
        const double qy = p.y - translation.y;
        const double c = std::cos(rotation_angle);
        const double s = std::sin(rotation_angle);
        const double rx = c * qx + s * qy;
        const double ry = -s * qx + c * qy;
        return {rx, reflect ? -ry : ry};
    }

    static Isometry identity() { return {}; }
};

}  // namespace cfrs
