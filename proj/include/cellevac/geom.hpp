#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace cellevac {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }

    // Unit vector; falls back to +x for near-zero input.
    Vec2 normalized() const {
        double n = norm();
        if (n < 1e-12) return {1.0, 0.0};
        return {x / n, y / n};
    }

    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct Segment {
    Vec2 a;
    Vec2 b;

    double length() const { return (b - a).norm(); }
    Vec2 midpoint() const { return (a + b) * 0.5; }
};

// Closed polygon; edge i runs from vertex i to vertex (i+1) % size.
using Polygon = std::vector<Vec2>;

Vec2 closest_point_on_segment(Vec2 p, const Segment& s);
double point_segment_distance(Vec2 p, const Segment& s);

// Signed area (positive for counter-clockwise winding).
double polygon_signed_area(const Polygon& poly);
double polygon_area(const Polygon& poly);

// Crossing-number containment test. Points exactly on the outline are
// resolved by the crossing parity; callers that care use distance checks.
bool point_in_polygon(Vec2 p, const Polygon& poly);

double distance_to_polygon_outline(Vec2 p, const Polygon& poly);

// True if segments [p0,p1] and [q0,q1] share at least one point,
// including endpoint touches and collinear overlap.
bool segments_intersect(Vec2 p0, Vec2 p1, Vec2 q0, Vec2 q1);

} // namespace cellevac
