#pragma once
//
// Antipodal grasp proposals on object TSDFs, the exact pick <-> place
// coupling across a grasp set, and the argmax-over-sampled-actions planner.
//
// The planner enumerates (insertion direction x object rotation) candidates,
// binds each to a grasp that realizes it, and scores the realized rotation's
// affordance map. With the oracle value function it returns only actions the
// oracle scores 1 (anything else is infeasible); with a learned value it
// returns the highest-scoring candidate that passes the geometric filters.

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "pickplace/oracle.hpp"

namespace pickplace {

struct Grasp {
    RigidTransform pose;  // end-effector at grasp, world frame (T_pick)
    double width = 0.0;   // contact separation, meters
    double quality = 0.0; // cos of the worst antipodality deviation
};

struct Workspace {
    Vec3 center;
    double radius = 0.0;
};

struct GraspSamplerParams {
    int count = 64;
    double friction_angle = 15.0 * M_PI / 180.0;
    double max_width = 0.08;
    double min_width = 0.004;
    int budget = 5000;       // contact-pair trials
    int spins = 1;           // approach orientations emitted per contact pair
    double axis_separation = 0.0;  // reject pairs closer than this to kept axes
    uint64_t seed = 0;
};

/// Samples two-finger grasps whose contact normals oppose the closing axis
/// within the friction angle. Deterministic given the seed.
/// Throws NoGraspFound when no pair qualifies within the budget.
std::vector<Grasp> sample_antipodal_grasps(const ObjectModel& object,
                                           const GraspSamplerParams& params);

/// Body-frame object rotation realized by holding with grasp g and inserting
/// along d: place_rotation(rot(g), insertion_frame(d)).
Rotation couple_pick_to_place(const Grasp& g, const Vec3& d);

/// Grasp whose rotation is nearest (geodesic) to the pick rotation required
/// for r_object along d, within tolerance; quality then order break ties.
std::optional<Grasp> couple_place_to_pick(const Rotation& r_object, const Vec3& d,
                                          const std::vector<Grasp>& grasps,
                                          double tolerance = 10.0 * M_PI / 180.0);

/// The planner's grasp binding: pick the contact pair whose closing axis is
/// nearest the required rotation's closing axis (gripper +Y), within
/// `axis_tolerance`, and regrasp about it at exactly the required rotation.
/// Executed placements therefore realize the evaluated object rotation.
std::optional<Grasp> snap_grasp_to_rotation(const std::vector<Grasp>& grasps,
                                            const Rotation& required_pick, double axis_tolerance);

bool in_workspace(const RigidTransform& pose, const Workspace& w);

/// Keeps poses whose translation lies within the ball (<= radius).
std::vector<RigidTransform> workspace_filter(const std::vector<RigidTransform>& poses,
                                             const Workspace& w);

enum class PlanMode { place_first, pick_first };

struct PlannerConfig {
    int views = 16;
    double elev_lo = -90.0 * M_PI / 180.0;
    double elev_hi = -20.0 * M_PI / 180.0;
    int rotations = 72;
    double camera_distance = 0.9;
    Intrinsics intrinsics;
    Vec3 view_target;
    PlanMode mode = PlanMode::place_first;
    bool upright_rotations = true;  // world-yaw family (object stays upright)
    bool aligned_rotations = true;  // direction-aligned family (object tilts onto d)
    // Closing-axis tolerance for grasp binding. The snap regrasps at exactly
    // the required rotation, so this bounds finger-axis vs contact-normal
    // deviation; the friction cone is the physical limit.
    double grasp_match_tol = 15.0 * M_PI / 180.0;
    double pick_clearance = 0.02;  // grasp midpoint distance to obstacles
    /// Distance from a point to the geometry that can obstruct the pick
    /// approach (everything except the object and the surface it rests on).
    /// Defaults to the scene grid, which also counts the support; tasks bind
    /// a primitive-exact query that excludes it.
    std::function<double(const Vec3&)> pick_obstacle_distance;
    bool refine = true;             // local direction/spin refinement (oracle mode)
    int refine_rounds = 4;          // ring radii 15, 7.5, 3.75, 1.875 degrees
    int learned_candidates = 50;    // feasibility fallback depth for learned values
    std::optional<Workspace> workspace;
    RenderParams render;
    OracleParams oracle;
};

/// A full object-centric action: the grasp, the object transformation and
/// the insertion direction. `object_rotation` is the world rotation applied
/// to the object from its initial configuration; `anchor` is where the
/// object grid center ends up.
struct PlanResult {
    Grasp pick;
    Rotation object_rotation;
    RigidTransform object_transform;
    Vec3 insert_dir;
    Vec3 anchor;
    double score = 0.0;
    int view_index = -1;
    int u = 0;
    int v = 0;
};

/// Scores one (rotated object, direction) pair as an affordance map.
class PlacementValue {
public:
    virtual ~PlacementValue() = default;
    /// `object_grid` is the unrotated object TSDF; implementations that need
    /// volumetric input rotate/resample it themselves. `fit_score`, when
    /// non-null, receives a graded alignment signal (the best final-pose
    /// scene clearance over a sparse pixel probe) used to seed the planner's
    /// refinement; values that cannot provide it leave it untouched.
    virtual AffordanceMap score_map(const VoxelGrid& scene, int view_index,
                                    const std::vector<Vec3>& rotated_samples,
                                    const Vec3& rotated_com, const Rotation& object_rotation,
                                    const VoxelGrid& object_grid, const Vec3& d,
                                    const Camera& cam, const DepthImage& depth,
                                    double* fit_score) = 0;
    /// True when scores are ground truth (enables first-success early exit).
    virtual bool exact() const = 0;
    /// Optional grasp-independent alignment signal for an object rotation
    /// (higher is better); lets the planner's refinement walk toward the
    /// right direction even where no sampled grasp matches yet.
    virtual std::optional<double> rotation_alignment(const Rotation&) const {
        return std::nullopt;
    }
};

/// Ground-truth value function backed by the placement oracle.
class OracleValue : public PlacementValue {
public:
    OracleValue(TargetRegion region, OracleParams params) : region_(region), params_(params) {}
    std::optional<double> rotation_alignment(const Rotation& object_rotation) const override {
        if (region_.kind != TargetRegion::Kind::pose) return std::nullopt;
        return -geodesic_angle(object_rotation, region_.nominal_rotation);
    }
    AffordanceMap score_map(const VoxelGrid& scene, int view_index,
                            const std::vector<Vec3>& rotated_samples, const Vec3& rotated_com,
                            const Rotation& object_rotation, const VoxelGrid& object_grid,
                            const Vec3& d, const Camera& cam, const DepthImage& depth,
                            double* fit_score) override;
    bool exact() const override { return true; }
    const TargetRegion& region() const { return region_; }
    const OracleParams& params() const { return params_; }

private:
    TargetRegion region_;
    OracleParams params_;
};

/// Enumerates actions, binds grasps, scores affordances and returns the best
/// feasible action, or nullopt when nothing qualifies.
std::optional<PlanResult> plan_pick_and_place(const VoxelGrid& scene, const ObjectModel& object,
                                              const std::vector<Grasp>& grasps,
                                              PlacementValue& value, const PlannerConfig& cfg);

/// Re-evaluates a planned action against the ground-truth scene with the
/// same oracle computation the maps use.
PlacementOutcome execute_plan(const VoxelGrid& scene, const ObjectModel& object,
                              const PlanResult& plan, const TargetRegion& region,
                              const OracleParams& params);

}  // namespace pickplace
