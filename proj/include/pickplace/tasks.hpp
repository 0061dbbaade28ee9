#pragma once
//
// Procedural 6DoF benchmarks: block-insertion (an L-shaped object into an
// arbitrarily tilted L-cavity fixture) and shelf-placing (an object into the
// upper, open-topped section of a cluttered two-level shelf). Scenes are
// analytic primitives so the oracle stays exact, generation is seed
// deterministic, and train/test seed streams never collide.
//
// World frame: Z up, table surface at z = 0.25 m. The shelf spans
// x in [-0.4, 0.2], its open upper section is the target region; objects to
// place spawn on the table strip in front of it. The paper-style workspace
// ball (0.2, -0.4, 0.5, r 0.5) covers the picks and the right-hand part of
// the shelf, which is what makes the limited-workspace comparison bite.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pickplace/grasp.hpp"
#include "pickplace/voxel.hpp"

namespace pickplace {

/// Deterministic seed stream derivation (splitmix64 mix).
uint64_t mix_seed(uint64_t seed, uint64_t salt);

enum class PoseDist { id, ood };
enum class SceneSplit { train, test };

struct Scene {
    std::string kind;  // "shelf" or "block"
    uint64_t seed = 0;
    std::vector<Primitive> statics;
    std::vector<Primitive> clutter;
    Primitive place_object;  // at its spawn pose
    Aabb bounds;
    TargetRegion target;
    Vec3 view_target;
    GridDims grid_dims;
    double grid_voxel = 0.01;
    Vec3 grid_origin;
};

/// Scene TSDF over statics + clutter (the object to place is excluded: the
/// affordance views show the placement scene after the pick).
VoxelGrid scene_grid(const Scene& scene);

/// Exact distance to everything that can obstruct a pick approach: all
/// statics except the table the object rests on, plus the clutter.
std::function<double(const Vec3&)> pick_obstacle_query(const Scene& scene);

/// Ground-truth object grid around the spawn pose (48^3 at 5 mm).
ObjectModel scene_object_model(const Scene& scene);

/// L-shape block and tilted L-cavity fixture. ID tilts stay within
/// +-pi/5 about x and y; OOD tilts lie in +-[pi/5, 2pi/5]. Yaw is free.
Scene gen_block_insertion(uint64_t seed, PoseDist dist);

/// Two-level shelf with n clutter objects rejection-sampled into the upper
/// section (train n in [5,7], test n in [5,9]) and the object to place on
/// the table. Throws SpawnBudgetExceeded after 1000 failed attempts.
Scene gen_shelf_scene(uint64_t seed, int n_objects, SceneSplit split);

/// Deterministic flat-fixture block-insertion instance: the cavity is only
/// yawed (by `fixture_yaw`), the object spawns unrotated, so the solution is
/// a top-down insertion at exactly that yaw. Used by sensitivity checks and
/// single-instance training.
Scene constructed_lshape_instance(double fixture_yaw = 30.0 * M_PI / 180.0);

enum class FailureCause { none, collision, unstable, out_of_region, infeasible };
const char* to_string(FailureCause cause);

struct EpisodeResult {
    int reward = 0;
    FailureCause cause = FailureCause::infeasible;
    double plan_ms = 0.0;
};

using Policy = std::function<std::optional<PlanResult>(const Scene&, const VoxelGrid&,
                                                       const ObjectModel&)>;

/// Evaluates the policy's action against the ground-truth scene with the
/// same oracle computation that labels affordance maps.
EpisodeResult run_episode(const Scene& scene, const VoxelGrid& grid, const ObjectModel& object,
                          const Policy& policy, const std::optional<Workspace>& workspace,
                          const OracleParams& params);

struct EvalOptions {
    std::string task = "shelf";  // "shelf" or "block"
    PoseDist dist = PoseDist::id;
    SceneSplit split = SceneSplit::test;
    int episodes = 10;
    uint64_t seed0 = 0;  // episode i uses seed seed0 + i
    std::optional<Workspace> workspace;
};

struct EpisodeRow {
    int episode = 0;
    uint64_t seed = 0;
    int reward = 0;
    FailureCause cause = FailureCause::infeasible;
    double plan_ms = 0.0;
};

struct Metrics {
    int episodes = 0;
    int successes = 0;
    std::map<std::string, int> failure_histogram;
    double mean_plan_ms = 0.0;
    std::vector<EpisodeRow> rows;

    double success_rate() const {
        return episodes == 0 ? 0.0 : static_cast<double>(successes) / episodes;
    }
};

/// Runs fresh-seeded episodes and aggregates; per-episode rows are kept for
/// the CSV emitters.
Metrics eval_suite(const EvalOptions& options, const Policy& policy);

/// Planner defaults per task: shelf sweeps 64x64 views from 0.9 m; block
/// insertion uses 160x160 views from 0.55 m so the pixel pitch resolves the
/// 5 mm insertion tolerance, and drops the upright rotation family.
PlannerConfig default_planner_config(const std::string& task);

/// Oracle-valued policy over the given planner configuration (view target
/// and contact thresholds are bound per scene).
Policy make_oracle_policy(PlannerConfig base, uint64_t grasp_seed = 7);

/// Uniform-random valid-pixel baseline: picks a random (view, rotation,
/// finite pixel) triple and executes it, without any oracle filtering.
Policy make_random_policy(PlannerConfig base, uint64_t seed, uint64_t grasp_seed = 7);

}  // namespace pickplace
