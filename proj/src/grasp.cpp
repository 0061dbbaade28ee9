#include "pickplace/grasp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>
#include <set>
#include <cstdio>
#include <cstdlib>

#include "pickplace/errors.hpp"
#include "pickplace/parallel.hpp"

namespace pickplace {

namespace {

Vec3 any_perpendicular(const Vec3& a) {
    Vec3 p = a.cross(Vec3{0, 0, 1});
    if (p.norm() < 1e-6) p = a.cross(Vec3{1, 0, 0});
    return p.normalized();
}

std::vector<Vec3> rotate_points(const std::vector<Vec3>& pts, const Rotation& r) {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const Vec3& p : pts) out.push_back(r.rotate(p));
    return out;
}

double axis_angle_between(const Vec3& a, const Vec3& b) {
    // Closing axes are sign-symmetric.
    const double d = std::min(1.0, std::abs(a.dot(b)));
    return std::acos(d);
}

}  // namespace

std::vector<Grasp> sample_antipodal_grasps(const ObjectModel& object,
                                           const GraspSamplerParams& params) {
    assert(params.count >= 1);
    const std::vector<Vec3>& pts = object.samples.points;
    const Vec3 center = object.grid.grid_center();

    std::vector<Vec3> normals(pts.size());
    std::vector<bool> usable(pts.size(), false);
    const double voxel = object.grid.voxel_size;
    const double flat_cos = std::cos(12.0 * M_PI / 180.0);
    for (size_t i = 0; i < pts.size(); ++i) {
        const Vec3 world = center + pts[i];
        const Vec3 grad = sdf_gradient(object.grid, world);
        const double n = grad.norm();
        if (n < 1e-6) continue;
        const Vec3 normal = grad / n;
        // Contacts need a flat patch: the field normal must hold steady a
        // voxel away in both tangent directions, which rejects the blended
        // pseudo-normals of edges and corners.
        const Vec3 t1 = any_perpendicular(normal);
        const Vec3 t2 = normal.cross(t1);
        bool flat = true;
        for (const Vec3& offset : {t1 * voxel, t1 * -voxel, t2 * voxel, t2 * -voxel}) {
            const Vec3 g2 = sdf_gradient(object.grid, world + offset);
            const double m = g2.norm();
            if (m < 1e-6 || normal.dot(g2 / m) < flat_cos) {
                flat = false;
                break;
            }
        }
        if (!flat) continue;
        normals[i] = normal;
        usable[i] = true;
    }

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<size_t> pick(0, pts.size() - 1);
    std::set<std::pair<size_t, size_t>> seen;
    std::vector<Grasp> grasps;
    std::vector<Vec3> kept_axes;

    for (int trial = 0; trial < params.budget && static_cast<int>(grasps.size()) < params.count;
         ++trial) {
        size_t i = pick(rng);
        size_t j = pick(rng);
        if (i == j || !usable[i] || !usable[j]) continue;
        if (i > j) std::swap(i, j);
        if (!seen.insert({i, j}).second) continue;

        const Vec3 delta = pts[j] - pts[i];
        const double width = delta.norm();
        if (width < params.min_width || width > params.max_width) continue;
        const Vec3 axis = delta / width;
        const double dev_i = std::acos(std::clamp(normals[i].dot(-axis), -1.0, 1.0));
        const double dev_j = std::acos(std::clamp(normals[j].dot(axis), -1.0, 1.0));
        const double worst = std::max(dev_i, dev_j);
        if (worst > params.friction_angle) continue;
        if (params.axis_separation > 0.0) {
            bool crowded = false;
            for (const Vec3& a : kept_axes) {
                if (axis_angle_between(a, axis) < params.axis_separation) {
                    crowded = true;
                    break;
                }
            }
            if (crowded) continue;
        }
        kept_axes.push_back(axis);

        const Vec3 mid = center + (pts[i] + pts[j]) * 0.5;
        const Vec3 e1 = any_perpendicular(axis);
        const Vec3 e2 = axis.cross(e1);
        for (int k = 0; k < params.spins && static_cast<int>(grasps.size()) < params.count; ++k) {
            const double psi = 2.0 * M_PI * k / params.spins;
            const Vec3 palm = e1 * std::cos(psi) + e2 * std::sin(psi);
            Grasp g;
            g.pose.rotation = Rotation::from_columns(palm, axis, palm.cross(axis));
            g.pose.translation = mid;
            g.width = width;
            g.quality = std::cos(worst);
            grasps.push_back(g);
        }
    }
    if (grasps.empty()) {
        throw NoGraspFound("sample_antipodal_grasps: no antipodal pair within budget");
    }
    return grasps;
}

Rotation couple_pick_to_place(const Grasp& g, const Vec3& d) {
    return place_rotation(g.pose.rotation, insertion_frame(d));
}

std::optional<Grasp> couple_place_to_pick(const Rotation& r_object, const Vec3& d,
                                          const std::vector<Grasp>& grasps, double tolerance) {
    const Rotation required = pick_rotation(r_object, insertion_frame(d));
    int best = -1;
    double best_angle = tolerance;
    for (size_t i = 0; i < grasps.size(); ++i) {
        const double angle = geodesic_angle(required, grasps[i].pose.rotation);
        if (angle < best_angle - 1e-12 ||
            (best >= 0 && std::abs(angle - best_angle) <= 1e-12 &&
             grasps[i].quality > grasps[static_cast<size_t>(best)].quality)) {
            best = static_cast<int>(i);
            best_angle = angle;
        }
    }
    if (best < 0) return std::nullopt;
    return grasps[static_cast<size_t>(best)];
}

std::optional<Grasp> snap_grasp_to_rotation(const std::vector<Grasp>& grasps,
                                            const Rotation& required_pick,
                                            double axis_tolerance) {
    const Vec3 required_axis = required_pick.col_y();
    int best = -1;
    double best_angle = axis_tolerance;
    for (size_t i = 0; i < grasps.size(); ++i) {
        const double angle = axis_angle_between(grasps[i].pose.rotation.col_y(), required_axis);
        if (angle < best_angle - 1e-12 ||
            (best >= 0 && std::abs(angle - best_angle) <= 1e-12 &&
             grasps[i].quality > grasps[static_cast<size_t>(best)].quality)) {
            best = static_cast<int>(i);
            best_angle = angle;
        }
    }
    if (best < 0) return std::nullopt;
    Grasp g = grasps[static_cast<size_t>(best)];
    g.pose.rotation = required_pick;
    return g;
}

bool in_workspace(const RigidTransform& pose, const Workspace& w) {
    return (pose.translation - w.center).norm() <= w.radius;
}

std::vector<RigidTransform> workspace_filter(const std::vector<RigidTransform>& poses,
                                             const Workspace& w) {
    std::vector<RigidTransform> kept;
    for (const RigidTransform& p : poses) {
        if (in_workspace(p, w)) kept.push_back(p);
    }
    return kept;
}

AffordanceMap OracleValue::score_map(const VoxelGrid& scene, int, const std::vector<Vec3>& samples,
                                     const Vec3& com, const Rotation& object_rotation,
                                     const VoxelGrid&, const Vec3& d, const Camera& cam,
                                     const DepthImage& depth, double* fit_score) {
    AffordanceMap map(cam.intr.width, cam.intr.height);
    map.insert_dir = d.normalized();
    map.object_rotation = object_rotation;
    map.camera = cam;
    const double lift = z_offset_from_samples(samples) + params_.rest_gap;
    double sample_radius = 0.0;
    for (const Vec3& p : samples) sample_radius = std::max(sample_radius, p.norm());

    const bool rotation_rejected = region_rejects_rotation(region_, object_rotation);
    if (!rotation_rejected) {
        parallel_for(cam.intr.height, [&](int64_t row) {
            const int v = static_cast<int>(row);
            for (int u = 0; u < cam.intr.width; ++u) {
                const float z = depth.at(u, v);
                if (!std::isfinite(z)) continue;
                const Vec3 anchor = pixel_to_world(u, v, z, cam) + Vec3{0, 0, lift};
                if (region_rejects_anchor(region_, anchor, sample_radius, params_.settle_max)) {
                    continue;
                }
                const PlacementOutcome outcome =
                    evaluate_placement(scene, samples, com, object_rotation, anchor,
                                       map.insert_dir, region_, params_);
                map.score(u, v) = outcome.success ? 1.0f : 0.0f;
            }
        });
    }

    if (fit_score) {
        if (region_.kind == TargetRegion::Kind::pose) {
            // Pose targets carry the answer's rotation; the achievable
            // rotation error is the exact refinement signal (it shrinks as
            // the direction approaches the cavity axis).
            *fit_score = -geodesic_angle(object_rotation, region_.nominal_rotation);
        } else {
            // Box regions: best final-pose scene clearance over a sparse
            // pixel probe inside the region neighborhood.
            const int step = 5;
            double best = -1e30;
            for (int v = 0; v < cam.intr.height; v += step) {
                for (int u = 0; u < cam.intr.width; u += step) {
                    const float z = depth.at(u, v);
                    if (!std::isfinite(z)) continue;
                    const Vec3 anchor = pixel_to_world(u, v, z, cam) + Vec3{0, 0, lift};
                    if (region_rejects_anchor(region_, anchor, sample_radius,
                                              params_.settle_max)) {
                        continue;
                    }
                    double lo = 1e30;
                    for (const Vec3& p : samples) {
                        lo = std::min(lo, sdf_query(scene, p + anchor));
                        if (lo < best) break;  // cannot beat the incumbent
                    }
                    best = std::max(best, lo);
                }
            }
            *fit_score = best;
        }
    }
    return map;
}

namespace {

// One grasp candidate precomputed from a sampled contact pair: the planner
// snaps the required pick rotation onto the nearest closing axis, so the
// realized object rotation equals the evaluated one exactly.
struct PairInfo {
    Vec3 axis;
    Vec3 midpoint;
    double width;
    double quality;
    bool pick_ok;  // midpoint clearance and pick workspace
};

struct Candidate {
    Vec3 d;
    int view = -1;
    Rotation object_rotation;  // world rotation applied to the object grid
    Grasp pick;
};

struct ViewData {
    Vec3 d;
    Camera cam;
    DepthImage depth;
};

int match_pair(const std::vector<PairInfo>& pairs, const Vec3& required_axis, double tol) {
    int best = -1;
    double best_angle = tol;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i].pick_ok) continue;
        const double angle = axis_angle_between(pairs[i].axis, required_axis);
        if (angle < best_angle - 1e-12 ||
            (best >= 0 && std::abs(angle - best_angle) <= 1e-12 &&
             pairs[i].quality > pairs[static_cast<size_t>(best)].quality)) {
            best = static_cast<int>(i);
            best_angle = angle;
        }
    }
    return best;
}

Vec3 clamp_to_band(const Vec3& d, double elev_lo, double elev_hi) {
    const Vec3 u = d.normalized();
    const double elev = std::asin(std::clamp(u.z, -1.0, 1.0));
    const double clamped = std::clamp(elev, elev_lo, elev_hi);
    if (std::abs(clamped - elev) < 1e-12) return u;
    const double r_xy = std::sqrt(std::max(0.0, u.x * u.x + u.y * u.y));
    double az = 0.0;
    if (r_xy > 1e-12) az = std::atan2(u.y, u.x);
    const double c = std::cos(clamped);
    return Vec3{c * std::cos(az), c * std::sin(az), std::sin(clamped)}.normalized();
}

}  // namespace

std::optional<PlanResult> plan_pick_and_place(const VoxelGrid& scene, const ObjectModel& object,
                                              const std::vector<Grasp>& grasps,
                                              PlacementValue& value, const PlannerConfig& cfg) {
    assert(!grasps.empty());
    const Vec3 object_center = object.grid.grid_center();

    // Contact pairs from the grasp set (spins share pair geometry).
    std::vector<PairInfo> pairs;
    for (const Grasp& g : grasps) {
        const Vec3 axis = g.pose.rotation.col_y();
        bool dup = false;
        for (const PairInfo& p : pairs) {
            if (axis_angle_between(p.axis, axis) < 1e-9 &&
                (p.midpoint - g.pose.translation).norm() < 1e-9) {
                dup = true;
                break;
            }
        }
        if (dup) continue;
        PairInfo info;
        info.axis = axis;
        info.midpoint = g.pose.translation;
        info.width = g.width;
        info.quality = g.quality;
        const double obstacle_distance = cfg.pick_obstacle_distance
                                             ? cfg.pick_obstacle_distance(g.pose.translation)
                                             : sdf_query(scene, g.pose.translation);
        info.pick_ok = obstacle_distance >= cfg.pick_clearance;
        if (info.pick_ok && cfg.workspace) {
            info.pick_ok = in_workspace(g.pose, *cfg.workspace);
        }
        pairs.push_back(info);
    }

    std::vector<ViewData> views;
    views.reserve(static_cast<size_t>(cfg.views));
    const std::vector<Vec3> dirs = sample_view_directions(cfg.views, cfg.elev_lo, cfg.elev_hi);
    for (size_t i = 0; i < dirs.size(); ++i) {
        ViewData vd;
        vd.d = dirs[i];
        vd.cam = camera_looking_along(dirs[i], cfg.view_target, cfg.camera_distance, cfg.intrinsics);
        vd.depth = render_depth(scene, vd.cam, cfg.render);
        views.push_back(std::move(vd));
    }

    const std::vector<Rotation> yaws = sample_object_rotations(cfg.rotations, Vec3{0, 0, 1});
    // Grasp-matched spin arcs subtend only a few degrees, so the exact value
    // function sweeps the aligned family finely; map work stays bounded
    // because pose-region maps reject mismatched rotations up front.
    const int aligned_spins = value.exact() ? std::max(cfg.rotations, 360) : cfg.rotations;

    const auto candidates_for = [&](const Vec3& d, int view_index) {
        std::vector<Candidate> cands;
        const Rotation r_insert = insertion_frame(d);
        const auto add_snapped = [&](const Rotation& w_cand) {
            const Rotation required = w_cand.inverse() * r_insert;
            const int pair = match_pair(pairs, required.col_y(), cfg.grasp_match_tol);
            if (pair < 0) return;
            Candidate c;
            c.d = d;
            c.view = view_index;
            c.object_rotation = w_cand;
            c.pick.pose = {required, pairs[static_cast<size_t>(pair)].midpoint};
            c.pick.width = pairs[static_cast<size_t>(pair)].width;
            c.pick.quality = pairs[static_cast<size_t>(pair)].quality;
            cands.push_back(c);
        };
        if (cfg.mode == PlanMode::pick_first) {
            for (const Grasp& g : grasps) {
                const double clear = cfg.pick_obstacle_distance
                                         ? cfg.pick_obstacle_distance(g.pose.translation)
                                         : sdf_query(scene, g.pose.translation);
                if (clear < cfg.pick_clearance) continue;
                if (cfg.workspace && !in_workspace(g.pose, *cfg.workspace)) continue;
                Candidate c;
                c.d = d;
                c.view = view_index;
                c.object_rotation = r_insert * g.pose.rotation.inverse();
                c.pick = g;
                cands.push_back(c);
            }
            return cands;
        }
        if (cfg.upright_rotations) {
            for (const Rotation& yaw : yaws) add_snapped(yaw);
        }
        if (cfg.aligned_rotations) {
            const Rotation base = Rotation::between(Vec3{0, 0, -1}, d);
            if (geodesic_angle(base, Rotation::identity()) > 1e-9) {
                for (const Rotation& spin : sample_object_rotations(aligned_spins, d)) {
                    add_snapped(spin * base);
                }
            }
        }
        return cands;
    };

    struct LearnedPick {
        float score;
        int map_index;
        int u, v;
        Candidate cand;
        Vec3 anchor;
    };
    std::vector<LearnedPick> learned;

    int map_index = 0;
    double best_fit_score = -1e30;
    Vec3 best_fit_dir{0, 0, -1};

    const auto evaluate_candidate =
        [&](const Candidate& cand, const ViewData& view,
            double* fit_score) -> std::optional<PlanResult> {
        const std::vector<Vec3> samples = rotate_points(object.samples.points, cand.object_rotation);
        const Vec3 com = cand.object_rotation.rotate(object.com);
        double fits = -1e30;
        const AffordanceMap map =
            value.score_map(scene, cand.view, samples, com, cand.object_rotation, object.grid,
                            cand.d, view.cam, view.depth,
                            value.exact() && fit_score ? &fits : nullptr);
        if (fit_score) *fit_score = fits;
        const double lift = z_offset_from_samples(samples) + cfg.oracle.rest_gap;
        const int this_map = map_index++;

        const auto result_at = [&](int u, int v, float score) {
            PlanResult res;
            res.pick = cand.pick;
            res.object_rotation = cand.object_rotation;
            res.insert_dir = map.insert_dir;
            res.view_index = cand.view;
            res.u = u;
            res.v = v;
            res.score = score;
            res.anchor = pixel_to_world(u, v, view.depth.at(u, v), view.cam) + Vec3{0, 0, lift};
            res.object_transform.rotation = cand.object_rotation;
            res.object_transform.translation =
                res.anchor - cand.object_rotation.rotate(object_center);
            return res;
        };

        if (value.exact()) {
            if (std::getenv("PICKPLACE_PLAN_DEBUG2")) {
                const auto align = value.rotation_alignment(cand.object_rotation);
                if (align && *align > -0.1) {
                    int wins = 0;
                    for (float s : map.scores) wins += s >= 1.0f;
                    std::fprintf(stderr,
                                 "[cand] d=(%.3f,%.3f,%.3f) Werr=%.2fdeg wins=%d pick_q=%.2f\n",
                                 cand.d.x, cand.d.y, cand.d.z, -*align * 180 / M_PI, wins,
                                 cand.pick.quality);
                }
            }
            for (int v = 0; v < map.height; ++v) {
                for (int u = 0; u < map.width; ++u) {
                    if (map.score(u, v) < 1.0f) continue;
                    PlanResult res = result_at(u, v, 1.0);
                    if (cfg.workspace) {
                        const Vec3 grasp_offset = cand.pick.pose.translation - object_center;
                        const Vec3 ee_pos =
                            res.anchor + cand.object_rotation.rotate(grasp_offset);
                        if (!in_workspace({insertion_frame(cand.d), ee_pos}, *cfg.workspace)) {
                            continue;
                        }
                    }
                    return res;
                }
            }
            return std::nullopt;
        }

        // Learned values: remember the best pixels per map for the global
        // feasibility fallback.
        std::vector<std::pair<float, int>> top;
        for (int v = 0; v < map.height; ++v) {
            for (int u = 0; u < map.width; ++u) {
                if (!std::isfinite(view.depth.at(u, v))) continue;
                top.push_back({map.score(u, v), v * map.width + u});
            }
        }
        std::stable_sort(top.begin(), top.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        const size_t keep = std::min<size_t>(4, top.size());
        for (size_t i = 0; i < keep; ++i) {
            const int u = top[i].second % map.width;
            const int v = top[i].second / map.width;
            LearnedPick lp;
            lp.score = top[i].first;
            lp.map_index = this_map;
            lp.u = u;
            lp.v = v;
            lp.cand = cand;
            lp.anchor = pixel_to_world(u, v, view.depth.at(u, v), view.cam) + Vec3{0, 0, lift};
            learned.push_back(lp);
        }
        return std::nullopt;
    };

    // Achievable alignment for a direction over its whole rotation family,
    // whether or not a sampled grasp matches: keeps the refinement walk
    // informed where grasp-matchable spins are still sparse.
    const auto family_alignment_fit = [&](const Vec3& d) -> double {
        double best = -1e30;
        const Rotation base = Rotation::between(Vec3{0, 0, -1}, d);
        const bool tilted = geodesic_angle(base, Rotation::identity()) > 1e-9;
        for (const Rotation& spin : sample_object_rotations(360, d)) {
            const Rotation w = tilted ? spin * base : spin;
            if (const auto a = value.rotation_alignment(w)) best = std::max(best, *a);
        }
        return best;
    };

    // Pose-target values expose the rotation alignment analytically; use it
    // to skip directions whose whole rotation family misses the tolerance
    // (their maps are all zero by construction) and to seed refinement.
    const bool have_alignment = value.rotation_alignment(Rotation::identity()).has_value();
    constexpr double kAlignmentSlack = -0.12;  // ~7 degrees

    // Coarse sweep over the sampled action set.
    const bool plan_debug_views = std::getenv("PICKPLACE_PLAN_DEBUG") != nullptr;
    bool any_candidate = false;
    for (size_t vi = 0; vi < views.size(); ++vi) {
        double view_fit = -1e30;
        int view_cands = 0;
        if (value.exact()) {
            view_fit = family_alignment_fit(views[vi].d);
        }
        if (value.exact() && have_alignment && view_fit <= kAlignmentSlack) {
            any_candidate = true;  // steer by alignment, skip the zero maps
        } else {
            for (const Candidate& cand : candidates_for(views[vi].d, static_cast<int>(vi))) {
                double fit = -1e30;
                if (auto res = evaluate_candidate(cand, views[vi], &fit)) return res;
                any_candidate = true;
                ++view_cands;
                view_fit = std::max(view_fit, fit);
            }
        }
        if (view_fit > best_fit_score) {
            best_fit_score = view_fit;
            best_fit_dir = views[vi].d;
        }
        if (plan_debug_views) {
            std::fprintf(stderr, "[plan] view %zu d=(%.3f,%.3f,%.3f) cands=%d fit=%.4f\n", vi,
                         views[vi].d.x, views[vi].d.y, views[vi].d.z, view_cands, view_fit);
        }
    }

    const bool plan_debug = std::getenv("PICKPLACE_PLAN_DEBUG") != nullptr;
    if (plan_debug) {
        std::fprintf(stderr, "[plan] coarse best_fit=%.4f dir=(%.3f,%.3f,%.3f)\n", best_fit_score,
                     best_fit_dir.x, best_fit_dir.y, best_fit_dir.z);
    }
    // Dense analytic seeding of the direction search (no rendering).
    if (value.exact() && cfg.refine && have_alignment && cfg.views > 1) {
        const std::vector<Vec3> dense =
            sample_view_directions(256, cfg.elev_lo, cfg.elev_hi);
        for (const Vec3& d : dense) {
            const double fit = family_alignment_fit(d);
            if (fit > best_fit_score) {
                best_fit_score = fit;
                best_fit_dir = d;
            }
        }
    }

    if (value.exact() && cfg.refine && any_candidate && best_fit_score > -1e29) {
        // Local refinement: ring directions around the best near-fit, with
        // fresh spin sweeps, until a strict success appears. Directions stay
        // inside the configured elevation band, so a degenerate (top-down)
        // band never leaves the vertical.
        Vec3 center_dir = best_fit_dir;
        const double base_radius = have_alignment ? 7.5 : 15.0;
        for (int round = 0; round < cfg.refine_rounds; ++round) {
            const double radius = (base_radius * M_PI / 180.0) / std::pow(2.0, round);
            std::vector<Vec3> ring{center_dir};
            const Vec3 e1 = any_perpendicular(center_dir);
            const Vec3 e2 = center_dir.cross(e1);
            for (int k = 0; k < 6; ++k) {
                const double phi = 2.0 * M_PI * k / 6.0;
                const Vec3 cand_dir =
                    (center_dir * std::cos(radius) +
                     (e1 * std::cos(phi) + e2 * std::sin(phi)) * std::sin(radius))
                        .normalized();
                const Vec3 clamped = clamp_to_band(cand_dir, cfg.elev_lo, cfg.elev_hi);
                bool dup = false;
                for (const Vec3& existing : ring) {
                    if (std::acos(std::clamp(existing.dot(clamped), -1.0, 1.0)) < 2e-3) {
                        dup = true;
                        break;
                    }
                }
                if (!dup) ring.push_back(clamped);
            }
            if (ring.size() == 1 && round > 0) break;

            double round_best_fit = -1e30;
            Vec3 round_best_dir = center_dir;
            for (const Vec3& d : ring) {
                double dir_fit = family_alignment_fit(d);
                if (have_alignment && dir_fit <= kAlignmentSlack) {
                    // No rotation in this direction's family can reach the
                    // pose tolerance; steer by alignment without rendering.
                    if (dir_fit > round_best_fit) {
                        round_best_fit = dir_fit;
                        round_best_dir = d;
                    }
                    continue;
                }
                ViewData vd;
                vd.d = d;
                vd.cam = camera_looking_along(d, cfg.view_target, cfg.camera_distance,
                                              cfg.intrinsics);
                vd.depth = render_depth(scene, vd.cam, cfg.render);
                const Rotation r_insert = insertion_frame(d);
                const Rotation base = Rotation::between(Vec3{0, 0, -1}, d);
                std::vector<Rotation> spins = sample_object_rotations(aligned_spins, d);
                for (const Rotation& spin : spins) {
                    const Rotation w_cand =
                        geodesic_angle(base, Rotation::identity()) > 1e-9 ? spin * base : spin;
                    const Rotation required = w_cand.inverse() * r_insert;
                    const int pair = match_pair(pairs, required.col_y(), cfg.grasp_match_tol);
                    if (pair < 0) continue;
                    Candidate c;
                    c.d = d;
                    c.view = -1;
                    c.object_rotation = w_cand;
                    c.pick.pose = {required, pairs[static_cast<size_t>(pair)].midpoint};
                    c.pick.width = pairs[static_cast<size_t>(pair)].width;
                    c.pick.quality = pairs[static_cast<size_t>(pair)].quality;
                    double fit = -1e30;
                    if (auto res = evaluate_candidate(c, vd, &fit)) return res;
                    dir_fit = std::max(dir_fit, fit);
                }
                if (dir_fit > round_best_fit) {
                    round_best_fit = dir_fit;
                    round_best_dir = d;
                }
            }
            if (plan_debug) {
                std::fprintf(stderr, "[plan] round %d radius=%.2fdeg fit=%.4f dir=(%.3f,%.3f,%.3f)\n",
                             round, radius * 180 / M_PI, round_best_fit, round_best_dir.x,
                             round_best_dir.y, round_best_dir.z);
            }
            center_dir = round_best_dir;
        }
        return std::nullopt;
    }

    if (!value.exact() && !learned.empty()) {
        std::stable_sort(learned.begin(), learned.end(), [](const LearnedPick& a,
                                                            const LearnedPick& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.map_index != b.map_index) return a.map_index < b.map_index;
            return a.v * 1000000 + a.u < b.v * 1000000 + b.u;
        });
        const int limit = std::min<int>(cfg.learned_candidates, static_cast<int>(learned.size()));
        for (int i = 0; i < limit; ++i) {
            const LearnedPick& lp = learned[static_cast<size_t>(i)];
            const std::vector<Vec3> samples =
                rotate_points(object.samples.points, lp.cand.object_rotation);
            SurfaceSamples moved;
            moved.points = samples;
            const RigidTransform pose{Rotation::identity(), lp.anchor};
            if (!check_insertion(scene, moved, pose, lp.cand.d, cfg.oracle.standoff,
                                 cfg.oracle.sweep_steps, cfg.oracle.clearance)) {
                continue;
            }
            if (cfg.workspace) {
                const Vec3 grasp_offset = lp.cand.pick.pose.translation - object_center;
                const Vec3 ee_pos = lp.anchor + lp.cand.object_rotation.rotate(grasp_offset);
                if (!in_workspace({insertion_frame(lp.cand.d), ee_pos}, *cfg.workspace)) continue;
            }
            PlanResult res;
            res.pick = lp.cand.pick;
            res.object_rotation = lp.cand.object_rotation;
            res.insert_dir = lp.cand.d.normalized();
            res.view_index = lp.cand.view;
            res.u = lp.u;
            res.v = lp.v;
            res.score = lp.score;
            res.anchor = lp.anchor;
            res.object_transform.rotation = lp.cand.object_rotation;
            res.object_transform.translation =
                res.anchor - lp.cand.object_rotation.rotate(object_center);
            return res;
        }
    }
    return std::nullopt;
}

PlacementOutcome execute_plan(const VoxelGrid& scene, const ObjectModel& object,
                              const PlanResult& plan, const TargetRegion& region,
                              const OracleParams& params) {
    const std::vector<Vec3> samples = rotate_points(object.samples.points, plan.object_rotation);
    const Vec3 com = plan.object_rotation.rotate(object.com);
    return evaluate_placement(scene, samples, com, plan.object_rotation, plan.anchor,
                              plan.insert_dir, region, params);
}

}  // namespace pickplace
