#pragma once
//
// Ground-truth placement evaluation: collision, insertability along a
// direction, quasi-static stability (settle, then support polygon), and
// target-region membership. A placement scores 1 only when all four hold.
// The induced per-pixel affordance maps label training data and double as
// a standalone oracle policy.
//
// Everything here is pure over immutable grids; per-pixel evaluation
// parallelizes freely.

#include <optional>
#include <vector>

#include "pickplace/image.hpp"
#include "pickplace/render.hpp"
#include "pickplace/voxel.hpp"

namespace pickplace {

struct OracleParams {
    double clearance = 0.002;       // min scene distance at the final pose
    double contact_eps = 0.01;      // scene distance counting as contact (= scene voxel)
    double contact_band = 0.01;     // samples this close to the scene support the object
    double settle_max = 0.05;       // farther drops than this are "floating"
    double support_margin = 0.003;  // COM must sit this far inside the support hull
    double standoff = 0.15;         // insertion sweep length
    int sweep_steps = 24;
    double rest_gap = 0.004;        // placement float above the support surface
};

/// Contact thresholds track the scene resolution.
OracleParams make_oracle_params(double scene_voxel);

/// Success region for a task: an axis-aligned volume the settled object must
/// lie in (shelf), or a nominal object transform with tolerances (insertion).
struct TargetRegion {
    enum class Kind { anywhere, box, pose };
    Kind kind = Kind::anywhere;
    Aabb box;
    Rotation nominal_rotation;  // required object rotation from its initial pose
    Vec3 nominal_anchor;        // required world position of the object grid center
    double pos_tol = 0.005;
    double ang_tol = 5.0 * M_PI / 180.0;

    static TargetRegion anywhere() { return {}; }
    static TargetRegion inside_box(const Aabb& b) {
        TargetRegion r;
        r.kind = Kind::box;
        r.box = b;
        return r;
    }
    static TargetRegion at_pose(const Rotation& rot, const Vec3& anchor, double pos_tol,
                                double ang_tol) {
        TargetRegion r;
        r.kind = Kind::pose;
        r.nominal_rotation = rot;
        r.nominal_anchor = anchor;
        r.pos_tol = pos_tol;
        r.ang_tol = ang_tol;
        return r;
    }
};

/// True iff every transformed sample keeps at least `clearance` distance
/// from the scene.
bool check_collision(const VoxelGrid& scene, const SurfaceSamples& samples,
                     const RigidTransform& pose, double clearance);

/// True iff the straight-line sweep from final_pose - standoff*d to
/// final_pose (inclusive, `steps` poses) is collision free throughout.
bool check_insertion(const VoxelGrid& scene, const SurfaceSamples& samples,
                     const RigidTransform& final_pose, const Vec3& d, double standoff, int steps,
                     double clearance);

struct SettleResult {
    bool contact = false;
    double distance = 0.0;
    RigidTransform pose;  // input pose translated down by `distance`
};

/// Translates the object along -Z until the scene comes within contact_eps,
/// up to settle_max. No rotation is applied.
SettleResult settle_object(const VoxelGrid& scene, const SurfaceSamples& samples,
                           const RigidTransform& pose, const OracleParams& params);

/// Settles the object, then requires the horizontal convex hull of contact
/// points to contain the center-of-mass projection with support_margin.
bool check_stability(const VoxelGrid& scene, const SurfaceSamples& samples, const Vec3& com,
                     const RigidTransform& pose, const OracleParams& params,
                     SettleResult* settled_out = nullptr);

/// Convenience overload building samples and COM from the grid.
bool check_stability(const VoxelGrid& scene, const VoxelGrid& object, const RigidTransform& pose,
                     const OracleParams& params);

struct PlacementOutcome {
    bool collision_free = false;
    bool insertable = false;
    bool stable = false;
    bool in_region = false;
    bool success = false;
    RigidTransform settled_pose;
    double settle_distance = 0.0;
};

/// Full placement check for an object whose samples/COM were already rotated
/// by `applied_rotation`; `anchor` is the world position of the object grid
/// center. Checks run in order collision, insertion, stability, region and
/// stop at the first failure.
PlacementOutcome evaluate_placement(const VoxelGrid& scene, const std::vector<Vec3>& rotated_samples,
                                    const Vec3& rotated_com, const Rotation& applied_rotation,
                                    const Vec3& anchor, const Vec3& insert_dir,
                                    const TargetRegion& region, const OracleParams& params);

struct AffordanceMap {
    int width = 0;
    int height = 0;
    std::vector<float> scores;  // row-major, in [0, 1]
    Vec3 insert_dir;
    Rotation object_rotation;
    Camera camera;

    AffordanceMap() = default;
    AffordanceMap(int w, int h) : width(w), height(h), scores(static_cast<size_t>(w) * h, 0.0f) {}
    float score(int u, int v) const { return scores[static_cast<size_t>(v) * width + u]; }
    float& score(int u, int v) { return scores[static_cast<size_t>(v) * width + u]; }
};

/// Distance from the object grid center down to the bottom face of its
/// lowest interior voxel, so anchoring at surface + z_offset rests the
/// object on, not in, the support. Throws NoInterior on all-positive grids.
double z_offset(const VoxelGrid& object_rotated);

/// Sample-based variant used on rotated sample clouds.
double z_offset_from_samples(const std::vector<Vec3>& rotated_samples);

/// Sound early rejections derived from the target region: a pose-region map
/// whose rotation misses the angular tolerance is all zero, and anchors too
/// far from the region cannot score whatever the geometry says (settling
/// moves the object down by at most settle_max).
bool region_rejects_rotation(const TargetRegion& region, const Rotation& applied_rotation);
bool region_rejects_anchor(const TargetRegion& region, const Vec3& anchor, double sample_radius,
                           double settle_max);

/// Brute-force affordance map: each finite-depth pixel places the object
/// grid center at the back-projected point lifted by z_offset + rest_gap and
/// scores 1 iff the full placement outcome succeeds. `object_rotation` is
/// the rotation already applied to the sample cloud. Pass a pre-rendered
/// depth image to skip the internal render.
AffordanceMap oracle_affordance_map(const VoxelGrid& scene, const std::vector<Vec3>& rotated_samples,
                                    const Vec3& rotated_com, const Rotation& object_rotation,
                                    const Vec3& d, const Camera& cam, const TargetRegion& region,
                                    const OracleParams& params, const RenderParams& render_params,
                                    const DepthImage* depth = nullptr);

struct PlaceAction {
    int u = 0;
    int v = 0;
    int map_index = 0;
    float score = 0.0f;
    Vec3 insert_dir;
    Rotation object_rotation;
};

/// Globally maximal pixel across the maps; ties break to the lowest map
/// index, then row-major pixel order. Throws EmptyMapSet.
PlaceAction argmax_action(const std::vector<AffordanceMap>& maps);

}  // namespace pickplace
