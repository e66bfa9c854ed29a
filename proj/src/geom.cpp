#include "cellevac/geom.hpp"

#include <algorithm>
#include <limits>

namespace cellevac {

Vec2 closest_point_on_segment(Vec2 p, const Segment& s) {
    Vec2 d = s.b - s.a;
    double len2 = d.norm2();
    if (len2 < 1e-24) return s.a;
    double t = (p - s.a).dot(d) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return s.a + d * t;
}

double point_segment_distance(Vec2 p, const Segment& s) {
    return (p - closest_point_on_segment(p, s)).norm();
}

double polygon_signed_area(const Polygon& poly) {
    double acc = 0.0;
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        Vec2 a = poly[i];
        Vec2 b = poly[(i + 1) % n];
        acc += a.cross(b);
    }
    return 0.5 * acc;
}

double polygon_area(const Polygon& poly) {
    return std::abs(polygon_signed_area(poly));
}

bool point_in_polygon(Vec2 p, const Polygon& poly) {
    bool inside = false;
    size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        Vec2 a = poly[i];
        Vec2 b = poly[j];
        bool crosses = (a.y > p.y) != (b.y > p.y);
        if (crosses) {
            double x_at = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < x_at) inside = !inside;
        }
    }
    return inside;
}

double distance_to_polygon_outline(Vec2 p, const Polygon& poly) {
    double best = std::numeric_limits<double>::infinity();
    size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        Segment e{poly[i], poly[(i + 1) % n]};
        best = std::min(best, point_segment_distance(p, e));
    }
    return best;
}

namespace {

int orientation(Vec2 a, Vec2 b, Vec2 c) {
    double v = (b - a).cross(c - a);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
           std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
}

} // namespace

bool segments_intersect(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1) {
    int o1 = orientation(p0, p1, q0);
    int o2 = orientation(p0, p1, q1);
    int o3 = orientation(q0, q1, p0);
    int o4 = orientation(q0, q1, p1);

    if (o1 != o2 && o3 != o4) return true;

    if (o1 == 0 && on_segment(p0, p1, q0)) return true;
    if (o2 == 0 && on_segment(p0, p1, q1)) return true;
    if (o3 == 0 && on_segment(q0, q1, p0)) return true;
    if (o4 == 0 && on_segment(q0, q1, p1)) return true;
    return false;
}

} // namespace cellevac
