#pragma once
//
// Rigid-body math for the object-centric pick-and-place action space.
//
// Conventions: right-handed world frame with +Z up, lengths in meters.
// Rotations are unit quaternions canonicalized to w >= 0 so that equality
// and round-trip tests are cheap. The gripper body frame is +X = palm
// normal (insertion axis) and +Z = camera-up.

#include <cmath>
#include <cstdint>
#include <vector>

namespace pickplace {

inline constexpr double kUnitTolerance = 1e-9;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return dot(*this); }
    double norm() const { return std::sqrt(squared_norm()); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Unit quaternion (w, x, y, z), canonicalized to w >= 0.
struct Rotation {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Rotation identity() { return {}; }

    /// Axis-angle constructor; axis need not be unit.
    static Rotation from_axis_angle(const Vec3& axis, double angle);

    /// Shortest rotation mapping `from` onto `to` (both unit). For
    /// anti-parallel inputs the axis is tie-broken deterministically.
    static Rotation between(const Vec3& from, const Vec3& to);

    /// Builds from orthonormal basis vectors given as matrix columns.
    static Rotation from_columns(const Vec3& cx, const Vec3& cy, const Vec3& cz);

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    /// Renormalizes and flips sign so w >= 0 (w == 0 breaks the tie on the
    /// first nonzero vector component).
    Rotation canonicalized() const;

    Rotation inverse() const { return Rotation{w, -x, -y, -z}.canonicalized(); }

    /// Hamilton product; result is renormalized.
    Rotation operator*(const Rotation& o) const;

    Vec3 rotate(const Vec3& v) const;

    Vec3 col_x() const { return rotate({1, 0, 0}); }
    Vec3 col_y() const { return rotate({0, 1, 0}); }
    Vec3 col_z() const { return rotate({0, 0, 1}); }
};

/// Geodesic distance on SO(3), in radians, in [0, pi].
double geodesic_angle(const Rotation& a, const Rotation& b);

struct RigidTransform {
    Rotation rotation;
    Vec3 translation;

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

/// Gripper orientation for an insertion direction: maps gripper +X (palm
/// normal) onto d and points gripper +Z (camera-up) as close to world +Z as
/// orthogonality allows. When d is within 1e-6 of +/-Z the camera-up
/// tie-breaks to world +X.
Rotation insertion_frame(const Vec3& d);

/// Required object rotation for a placement: R_pick^-1 * R_insert.
Rotation place_rotation(const Rotation& r_pick, const Rotation& r_insert);

/// Required pick rotation for a placement: R_insert * R_object^-1.
/// Inverse of place_rotation: place_rotation(pick_rotation(Ro, Ri), Ri) = Ro.
Rotation pick_rotation(const Rotation& r_object, const Rotation& r_insert);

/// n unit viewing directions pointing toward the scene, Fibonacci-spiral
/// distributed over the elevation band [elev_lo, elev_hi] (radians, negative
/// elevations look downward). Deterministic in n and the band.
/// Throws InvalidBand when elev_lo > elev_hi.
std::vector<Vec3> sample_view_directions(int n, double elev_lo, double elev_hi);

/// n rotations uniformly spaced about `axis`: angles 2*pi*i/n, i = 0..n-1.
std::vector<Rotation> sample_object_rotations(int n, const Vec3& axis);

}  // namespace pickplace
