#include "pickplace/geometry.hpp"

#include <cassert>

#include "pickplace/errors.hpp"

namespace pickplace {

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-15) return Rotation::identity();
    const double half = 0.5 * angle;
    const double s = std::sin(half) / n;
    return Rotation{std::cos(half), axis.x * s, axis.y * s, axis.z * s}.canonicalized();
}

Rotation Rotation::between(const Vec3& from, const Vec3& to) {
    const Vec3 axis = from.cross(to);
    const double s = axis.norm();
    const double c = from.dot(to);
    if (s < 1e-12) {
        if (c > 0.0) return Rotation::identity();
        // Anti-parallel: rotate 180 degrees about a deterministic
        // perpendicular (prefer the one built from world +X).
        Vec3 perp = from.cross(Vec3{1, 0, 0});
        if (perp.norm() < 1e-9) perp = from.cross(Vec3{0, 1, 0});
        return from_axis_angle(perp.normalized(), M_PI);
    }
    return from_axis_angle(axis * (1.0 / s), std::atan2(s, c));
}

Rotation Rotation::from_columns(const Vec3& cx, const Vec3& cy, const Vec3& cz) {
    // Shepperd's method on the column-major rotation matrix.
    const double m00 = cx.x, m01 = cy.x, m02 = cz.x;
    const double m10 = cx.y, m11 = cy.y, m12 = cz.y;
    const double m20 = cx.z, m21 = cy.z, m22 = cz.z;
    const double trace = m00 + m11 + m22;
    Rotation q;
    if (trace > 0.0) {
        const double s = std::sqrt(trace + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (m21 - m12) / s;
        q.y = (m02 - m20) / s;
        q.z = (m10 - m01) / s;
    } else if (m00 > m11 && m00 > m22) {
        const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        q.w = (m21 - m12) / s;
        q.x = 0.25 * s;
        q.y = (m01 + m10) / s;
        q.z = (m02 + m20) / s;
    } else if (m11 > m22) {
        const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        q.w = (m02 - m20) / s;
        q.x = (m01 + m10) / s;
        q.y = 0.25 * s;
        q.z = (m12 + m21) / s;
    } else {
        const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        q.w = (m10 - m01) / s;
        q.x = (m02 + m20) / s;
        q.y = (m12 + m21) / s;
        q.z = 0.25 * s;
    }
    return q.canonicalized();
}

Rotation Rotation::canonicalized() const {
    const double n = norm();
    Rotation q{w / n, x / n, y / n, z / n};
    bool flip = q.w < 0.0;
    if (q.w == 0.0) {
        if (q.x != 0.0)
            flip = q.x < 0.0;
        else if (q.y != 0.0)
            flip = q.y < 0.0;
        else
            flip = q.z < 0.0;
    }
    if (flip) {
        q.w = -q.w;
        q.x = -q.x;
        q.y = -q.y;
        q.z = -q.z;
    }
    return q;
}

Rotation Rotation::operator*(const Rotation& o) const {
    Rotation r;
    r.w = w * o.w - x * o.x - y * o.y - z * o.z;
    r.x = w * o.x + x * o.w + y * o.z - z * o.y;
    r.y = w * o.y - x * o.z + y * o.w + z * o.x;
    r.z = w * o.z + x * o.y - y * o.x + z * o.w;
    return r.canonicalized();
}

Vec3 Rotation::rotate(const Vec3& v) const {
    // v' = v + 2w(q x v) + 2 q x (q x v)
    const Vec3 q{x, y, z};
    const Vec3 t = q.cross(v) * 2.0;
    return v + t * w + q.cross(t);
}

double geodesic_angle(const Rotation& a, const Rotation& b) {
    // Relative quaternion conj(a) * b, measured with atan2 so angles near
    // zero keep full precision (acos loses ~1e-8 at the pole).
    const double w = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
    const double x = a.w * b.x - a.x * b.w - a.y * b.z + a.z * b.y;
    const double y = a.w * b.y + a.x * b.z - a.y * b.w - a.z * b.x;
    const double z = a.w * b.z - a.x * b.y + a.y * b.x - a.z * b.w;
    return 2.0 * std::atan2(std::sqrt(x * x + y * y + z * z), std::abs(w));
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.rotation * b.rotation, a.rotation.rotate(b.translation) + a.translation};
}

RigidTransform invert(const RigidTransform& t) {
    const Rotation r_inv = t.rotation.inverse();
    return {r_inv, -r_inv.rotate(t.translation)};
}

Rotation insertion_frame(const Vec3& d) {
    const Vec3 palm = d.normalized();
    Vec3 up = Vec3{0, 0, 1} - palm * palm.z;  // world +Z minus its palm component
    if (up.norm() < 1e-6) {
        // d parallel to gravity: camera-up tie-breaks to world +X.
        up = Vec3{1, 0, 0} - palm * palm.x;
    }
    const Vec3 cam_up = up.normalized();
    const Vec3 closing = cam_up.cross(palm);  // +Y completes the right-handed frame
    return Rotation::from_columns(palm, closing, cam_up);
}

Rotation place_rotation(const Rotation& r_pick, const Rotation& r_insert) {
    return r_pick.inverse() * r_insert;
}

Rotation pick_rotation(const Rotation& r_object, const Rotation& r_insert) {
    return r_insert * r_object.inverse();
}

std::vector<Vec3> sample_view_directions(int n, double elev_lo, double elev_hi) {
    assert(n >= 1);
    if (elev_lo > elev_hi) throw InvalidBand("sample_view_directions: empty elevation band");
    const double z_lo = std::sin(elev_lo);
    const double z_hi = std::sin(elev_hi);
    // Golden angle gives pairwise-distinct azimuths for any count.
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs;
    dirs.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double z = z_lo + (z_hi - z_lo) * ((i + 0.5) / n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = golden * i;
        dirs.push_back(Vec3{r * std::cos(az), r * std::sin(az), z}.normalized());
    }
    return dirs;
}

std::vector<Rotation> sample_object_rotations(int n, const Vec3& axis) {
    assert(n >= 1);
    const Vec3 a = axis.normalized();
    std::vector<Rotation> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(Rotation::from_axis_angle(a, 2.0 * M_PI * i / n));
    }
    return out;
}

}  // namespace pickplace
