#include "pickplace/oracle.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "pickplace/errors.hpp"
#include "pickplace/parallel.hpp"

namespace pickplace {

OracleParams make_oracle_params(double scene_voxel) {
    OracleParams p;
    p.contact_eps = scene_voxel;
    p.contact_band = scene_voxel;
    return p;
}

bool check_collision(const VoxelGrid& scene, const SurfaceSamples& samples,
                     const RigidTransform& pose, double clearance) {
    assert(!samples.points.empty());
    for (const Vec3& p : samples.points) {
        if (sdf_query(scene, pose.apply(p)) < clearance) return false;
    }
    return true;
}

bool check_insertion(const VoxelGrid& scene, const SurfaceSamples& samples,
                     const RigidTransform& final_pose, const Vec3& d, double standoff, int steps,
                     double clearance) {
    assert(steps >= 2);
    const Vec3 dir = d.normalized();
    for (int i = 0; i < steps; ++i) {
        const double back = standoff * (1.0 - static_cast<double>(i) / (steps - 1));
        RigidTransform pose = final_pose;
        pose.translation = final_pose.translation - dir * back;
        if (!check_collision(scene, samples, pose, clearance)) return false;
    }
    return true;
}

namespace {

double min_scene_distance(const VoxelGrid& scene, const std::vector<Vec3>& points,
                          const RigidTransform& pose) {
    double lo = 1e30;
    for (const Vec3& p : points) {
        lo = std::min(lo, sdf_query(scene, pose.apply(p)));
    }
    return lo;
}

// Monotone-chain convex hull of 2D points; returns counter-clockwise hull.
struct P2 {
    double x, y;
};

std::vector<P2> convex_hull(std::vector<P2> pts) {
    std::sort(pts.begin(), pts.end(), [](const P2& a, const P2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const P2& a, const P2& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const auto cross = [](const P2& o, const P2& a, const P2& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    if (pts.size() < 3) return pts;
    std::vector<P2> hull(2 * pts.size());
    size_t k = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const size_t lower = k + 1;
    for (size_t i = pts.size() - 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// Signed margin of point q inside a CCW convex hull: the smallest distance
// to an edge, negative outside.
double hull_margin(const std::vector<P2>& hull, const P2& q) {
    if (hull.size() < 3) return -1.0;
    double margin = 1e30;
    for (size_t i = 0; i < hull.size(); ++i) {
        const P2& a = hull[i];
        const P2& b = hull[(i + 1) % hull.size()];
        const double ex = b.x - a.x;
        const double ey = b.y - a.y;
        const double len = std::sqrt(ex * ex + ey * ey);
        if (len < 1e-12) continue;
        // Left of each edge is inside for CCW order.
        const double dist = (ex * (q.y - a.y) - ey * (q.x - a.x)) / len;
        margin = std::min(margin, dist);
    }
    return margin;
}

}  // namespace

SettleResult settle_object(const VoxelGrid& scene, const SurfaceSamples& samples,
                           const RigidTransform& pose, const OracleParams& params) {
    SettleResult result;
    result.pose = pose;
    double prev = 0.0;
    double prev_sdf = min_scene_distance(scene, samples.points, pose);
    if (prev_sdf <= params.contact_eps) {
        result.contact = true;
        return result;
    }
    const double step = std::max(params.contact_eps * 0.5, 1e-4);
    for (double t = step; t <= params.settle_max + step; t += step) {
        RigidTransform moved = pose;
        moved.translation.z -= t;
        const double sdf = min_scene_distance(scene, samples.points, moved);
        if (sdf <= params.contact_eps) {
            // Bisect [prev, t] to the contact boundary.
            double lo = prev, hi = t;
            for (int i = 0; i < 20; ++i) {
                const double mid = 0.5 * (lo + hi);
                RigidTransform m = pose;
                m.translation.z -= mid;
                if (min_scene_distance(scene, samples.points, m) <= params.contact_eps)
                    hi = mid;
                else
                    lo = mid;
            }
            result.contact = true;
            result.distance = hi;
            result.pose = pose;
            result.pose.translation.z -= hi;
            return result;
        }
        prev = t;
        prev_sdf = sdf;
    }
    result.contact = false;
    result.distance = params.settle_max;
    result.pose.translation.z -= params.settle_max;
    return result;
}

bool check_stability(const VoxelGrid& scene, const SurfaceSamples& samples, const Vec3& com,
                     const RigidTransform& pose, const OracleParams& params,
                     SettleResult* settled_out) {
    const SettleResult settled = settle_object(scene, samples, pose, params);
    if (settled_out) *settled_out = settled;
    if (!settled.contact || settled.distance > params.settle_max) return false;

    std::vector<P2> contacts;
    for (const Vec3& p : samples.points) {
        const Vec3 world = settled.pose.apply(p);
        if (sdf_query(scene, world) <= params.contact_band) {
            contacts.push_back({world.x, world.y});
        }
    }
    if (contacts.size() < 3) return false;
    const std::vector<P2> hull = convex_hull(std::move(contacts));
    const Vec3 com_world = settled.pose.apply(com);
    return hull_margin(hull, {com_world.x, com_world.y}) >= params.support_margin;
}

bool check_stability(const VoxelGrid& scene, const VoxelGrid& object, const RigidTransform& pose,
                     const OracleParams& params) {
    const SurfaceSamples samples = extract_surface_samples(object, 256);
    const Vec3 com = interior_centroid(object);
    return check_stability(scene, samples, com, pose, params, nullptr);
}

PlacementOutcome evaluate_placement(const VoxelGrid& scene, const std::vector<Vec3>& rotated_samples,
                                    const Vec3& rotated_com, const Rotation& applied_rotation,
                                    const Vec3& anchor, const Vec3& insert_dir,
                                    const TargetRegion& region, const OracleParams& params) {
    PlacementOutcome out;
    SurfaceSamples samples;
    samples.points = rotated_samples;  // already rotated; pose is translation-only
    const RigidTransform pose{Rotation::identity(), anchor};

    out.collision_free = check_collision(scene, samples, pose, params.clearance);
    if (!out.collision_free) return out;

    out.insertable = check_insertion(scene, samples, pose, insert_dir, params.standoff,
                                     params.sweep_steps, params.clearance);
    if (!out.insertable) return out;

    SettleResult settled;
    if (region.kind == TargetRegion::Kind::pose) {
        // Fixture insertions are secured by the cavity walls; quasi-static
        // stability reduces to coming to rest in contact.
        settled = settle_object(scene, samples, pose, params);
        out.stable = settled.contact && settled.distance <= params.settle_max;
    } else {
        out.stable = check_stability(scene, samples, rotated_com, pose, params, &settled);
    }
    out.settled_pose = settled.pose;
    out.settle_distance = settled.distance;
    if (!out.stable) return out;

    switch (region.kind) {
        case TargetRegion::Kind::anywhere:
            out.in_region = true;
            break;
        case TargetRegion::Kind::box: {
            out.in_region = true;
            for (const Vec3& p : rotated_samples) {
                if (!region.box.contains(settled.pose.apply(p))) {
                    out.in_region = false;
                    break;
                }
            }
            break;
        }
        case TargetRegion::Kind::pose: {
            const double pos_err = (settled.pose.translation - region.nominal_anchor).norm();
            const double ang_err = geodesic_angle(applied_rotation, region.nominal_rotation);
            out.in_region = pos_err <= region.pos_tol && ang_err <= region.ang_tol;
            break;
        }
    }
    out.success = out.collision_free && out.insertable && out.stable && out.in_region;
    return out;
}

double z_offset(const VoxelGrid& object_rotated) {
    double min_z = 1e30;
    for (int z = 0; z < object_rotated.dims.nz; ++z) {
        for (int y = 0; y < object_rotated.dims.ny; ++y) {
            for (int x = 0; x < object_rotated.dims.nx; ++x) {
                if (object_rotated.at(x, y, z) < 0.0f) {
                    min_z = std::min(min_z, object_rotated.voxel_center(x, y, z).z);
                }
            }
        }
    }
    if (min_z > 1e29) throw NoInterior("z_offset: grid has no interior voxel");
    // The voxel extends half a cell below its center.
    return object_rotated.grid_center().z - (min_z - 0.5 * object_rotated.voxel_size);
}

double z_offset_from_samples(const std::vector<Vec3>& rotated_samples) {
    double min_z = 1e30;
    for (const Vec3& p : rotated_samples) min_z = std::min(min_z, p.z);
    return -min_z;
}

bool region_rejects_rotation(const TargetRegion& region, const Rotation& applied_rotation) {
    return region.kind == TargetRegion::Kind::pose &&
           geodesic_angle(applied_rotation, region.nominal_rotation) > region.ang_tol;
}

bool region_rejects_anchor(const TargetRegion& region, const Vec3& anchor, double sample_radius,
                           double settle_max) {
    // Settling only moves the object down by at most settle_max, so these
    // bounds can never reject a pose the full evaluation would accept.
    switch (region.kind) {
        case TargetRegion::Kind::anywhere:
            return false;
        case TargetRegion::Kind::pose:
            return (anchor - region.nominal_anchor).norm() > region.pos_tol + settle_max;
        case TargetRegion::Kind::box: {
            const double slack = sample_radius + settle_max;
            return anchor.x < region.box.lo.x - slack || anchor.x > region.box.hi.x + slack ||
                   anchor.y < region.box.lo.y - slack || anchor.y > region.box.hi.y + slack ||
                   anchor.z < region.box.lo.z - slack || anchor.z > region.box.hi.z + slack;
        }
    }
    return false;
}

AffordanceMap oracle_affordance_map(const VoxelGrid& scene, const std::vector<Vec3>& rotated_samples,
                                    const Vec3& rotated_com, const Rotation& object_rotation,
                                    const Vec3& d, const Camera& cam, const TargetRegion& region,
                                    const OracleParams& params, const RenderParams& render_params,
                                    const DepthImage* depth) {
    DepthImage rendered;
    if (!depth) {
        rendered = render_depth(scene, cam, render_params);
        depth = &rendered;
    }
    AffordanceMap map(cam.intr.width, cam.intr.height);
    map.insert_dir = d.normalized();
    map.object_rotation = object_rotation;
    map.camera = cam;
    if (region_rejects_rotation(region, object_rotation)) return map;

    double sample_radius = 0.0;
    for (const Vec3& p : rotated_samples) sample_radius = std::max(sample_radius, p.norm());
    const double lift = z_offset_from_samples(rotated_samples) + params.rest_gap;
    parallel_for(cam.intr.height, [&](int64_t row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < cam.intr.width; ++u) {
            const float z = depth->at(u, v);
            if (!std::isfinite(z)) continue;
            const Vec3 anchor = pixel_to_world(u, v, z, cam) + Vec3{0, 0, lift};
            if (region_rejects_anchor(region, anchor, sample_radius, params.settle_max)) continue;
            const PlacementOutcome outcome = evaluate_placement(
                scene, rotated_samples, rotated_com, object_rotation, anchor, map.insert_dir,
                region, params);
            map.score(u, v) = outcome.success ? 1.0f : 0.0f;
        }
    });
    return map;
}

PlaceAction argmax_action(const std::vector<AffordanceMap>& maps) {
    if (maps.empty()) throw EmptyMapSet("argmax_action: no maps");
    PlaceAction best;
    best.map_index = -1;
    float best_score = -1.0f;
    for (size_t m = 0; m < maps.size(); ++m) {
        const AffordanceMap& map = maps[m];
        for (int v = 0; v < map.height; ++v) {
            for (int u = 0; u < map.width; ++u) {
                const float s = map.score(u, v);
                if (s > best_score) {
                    best_score = s;
                    best = PlaceAction{u, v, static_cast<int>(m), s, map.insert_dir,
                                       map.object_rotation};
                }
            }
        }
    }
    return best;
}

}  // namespace pickplace
