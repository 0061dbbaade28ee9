#include <doctest.h>

#include <random>

#include "pickplace/errors.hpp"
#include "pickplace/grasp.hpp"
#include "pickplace/tasks.hpp"

using namespace pickplace;

namespace {

std::mt19937_64 rng(606);

ObjectModel build_object(const Primitive& prim, int n = 32, double voxel = 0.0025) {
    const Vec3 origin = prim.pose.translation -
                        Vec3{(n - 1) * 0.5 * voxel, (n - 1) * 0.5 * voxel, (n - 1) * 0.5 * voxel};
    return make_object_model(grid_from_primitives({prim}, {n, n, n}, voxel, origin));
}

Rotation random_rotation() {
    std::normal_distribution<double> n(0.0, 1.0);
    return Rotation{n(rng), n(rng), n(rng), n(rng)}.canonicalized();
}

}  // namespace

TEST_SUITE("grasp") {

TEST_CASE("sphere grasps are diametral") {
    const double radius = 0.025;
    const ObjectModel sphere = build_object(make_sphere(radius, {0, 0, 0}), 32, 0.002);
    GraspSamplerParams params;
    params.seed = 4;
    const std::vector<Grasp> grasps = sample_antipodal_grasps(sphere, params);
    REQUIRE(!grasps.empty());
    for (const Grasp& g : grasps) {
        CHECK(std::abs(g.width - 2 * radius) <= 0.002 + 1e-9);
        CHECK(g.quality > std::cos(params.friction_angle) - 1e-9);
    }
}

TEST_CASE("cube grasp axes align with face normals") {
    const ObjectModel cube = build_object(make_box({0.02, 0.02, 0.02}, RigidTransform::identity()));
    GraspSamplerParams params;
    params.seed = 9;
    const std::vector<Grasp> grasps = sample_antipodal_grasps(cube, params);
    REQUIRE(!grasps.empty());
    for (const Grasp& g : grasps) {
        const Vec3 axis = g.pose.rotation.col_y();
        const double best = std::max({std::abs(axis.x), std::abs(axis.y), std::abs(axis.z)});
        CHECK(std::acos(std::min(1.0, best)) <= params.friction_angle + 0.02);
    }
}

TEST_CASE("width bound yields NoGraspFound") {
    const ObjectModel cube = build_object(make_box({0.03, 0.03, 0.03}, RigidTransform::identity()),
                                          40, 0.0025);
    GraspSamplerParams params;
    params.max_width = 0.02;  // cube needs 6 cm
    params.min_width = 0.015;
    params.seed = 2;
    CHECK_THROWS_AS(sample_antipodal_grasps(cube, params), NoGraspFound);
}

TEST_CASE("couple_pick_to_place identities") {
    Grasp g;
    const Vec3 d = Vec3{0.3, -0.2, -1}.normalized();
    g.pose.rotation = insertion_frame(d);
    CHECK(geodesic_angle(couple_pick_to_place(g, d), Rotation::identity()) < 1e-9);
}

TEST_CASE("couple_pick_to_place for a top-down grasp and lateral insertion is a 90 degree pitch") {
    Grasp g;
    g.pose.rotation = insertion_frame({0, 0, -1});
    const Rotation object = couple_pick_to_place(g, {1, 0, 0});
    const Rotation expected = Rotation::from_axis_angle({0, 1, 0}, -M_PI / 2);
    CHECK(geodesic_angle(object, expected) < 1e-9);
}

TEST_CASE("pick and place coupling round trips") {
    for (int i = 0; i < 200; ++i) {
        Grasp g;
        g.pose.rotation = random_rotation();
        const Vec3 d = Vec3{rng() % 100 / 50.0 - 1, rng() % 100 / 50.0 - 1, -1}.normalized();
        const Rotation object = couple_pick_to_place(g, d);
        const Rotation pick = pick_rotation(object, insertion_frame(d));
        CHECK(geodesic_angle(pick, g.pose.rotation) < 1e-9);
    }
}

TEST_CASE("couple_place_to_pick finds exact members and rejects distant ones") {
    const Vec3 d = Vec3{0.1, 0.4, -1}.normalized();
    const Rotation r_insert = insertion_frame(d);
    const Rotation r_object = random_rotation();
    const Rotation required = pick_rotation(r_object, r_insert);

    std::vector<Grasp> grasps;
    Grasp exact;
    exact.pose.rotation = required;
    exact.width = 0.03;
    exact.quality = 0.9;
    grasps.push_back(exact);
    const auto hit = couple_place_to_pick(r_object, d, grasps);
    REQUIRE(hit.has_value());
    CHECK(geodesic_angle(hit->pose.rotation, required) < 1e-9);

    CHECK_FALSE(couple_place_to_pick(r_object, d, {}).has_value());

    Grasp off;
    off.pose.rotation = Rotation::from_axis_angle({1, 0, 0}, 25.0 * M_PI / 180.0) * required;
    const auto miss = couple_place_to_pick(r_object, d, {off}, 10.0 * M_PI / 180.0);
    CHECK_FALSE(miss.has_value());
}

TEST_CASE("workspace_filter keeps the ball and drops the outside") {
    const Workspace ball{{0.2, -0.4, 0.5}, 0.5};
    const RigidTransform center{Rotation::identity(), {0.2, -0.4, 0.5}};
    const RigidTransform outside{Rotation::identity(), {0.2, -0.4, 1.01}};  // distance 0.51
    const auto kept = workspace_filter({center, outside}, ball);
    REQUIRE(kept.size() == 1);
    CHECK((kept[0].translation - center.translation).norm() < 1e-12);
    CHECK(workspace_filter({}, ball).empty());
}

TEST_CASE("oracle plan on an empty shelf succeeds end to end") {
    Scene scene = gen_shelf_scene(31, 5, SceneSplit::test);
    scene.clutter.clear();
    const VoxelGrid grid = scene_grid(scene);
    const ObjectModel object = scene_object_model(scene);
    const Policy policy = make_oracle_policy(default_planner_config("shelf"));
    const OracleParams params = make_oracle_params(scene.grid_voxel);
    const EpisodeResult result = run_episode(scene, grid, object, policy, std::nullopt, params);
    CHECK(result.reward == 1);
    CHECK(result.cause == FailureCause::none);
}

TEST_CASE("a workspace ball away from the shelf makes planning infeasible") {
    Scene scene = gen_shelf_scene(32, 5, SceneSplit::test);
    scene.clutter.clear();
    const VoxelGrid grid = scene_grid(scene);
    const ObjectModel object = scene_object_model(scene);
    PlannerConfig cfg = default_planner_config("shelf");
    cfg.workspace = Workspace{{3.0, 3.0, 3.0}, 0.5};
    const Policy policy = make_oracle_policy(cfg);
    const EpisodeResult result =
        run_episode(scene, grid, object, policy, cfg.workspace, make_oracle_params(0.01));
    CHECK(result.reward == 0);
    CHECK(result.cause == FailureCause::infeasible);
}

TEST_CASE("planned block insertion recovers the fixture rotation") {
    const Scene scene = constructed_lshape_instance(40.0 * M_PI / 180.0);
    const VoxelGrid grid = scene_grid(scene);
    const ObjectModel object = scene_object_model(scene);
    const Policy policy = make_oracle_policy(default_planner_config("block"));
    std::optional<PlanResult> plan = policy(scene, grid, object);
    REQUIRE(plan.has_value());
    CHECK(geodesic_angle(plan->object_rotation, scene.target.nominal_rotation) <=
          5.0 * M_PI / 180.0);
    OracleParams params = make_oracle_params(scene.grid_voxel);
    params.rest_gap = 0.006;
    const PlacementOutcome outcome = execute_plan(grid, object, *plan, scene.target, params);
    CHECK(outcome.success);
}

TEST_CASE("restricting the workspace never improves the returned score") {
    Scene scene = gen_shelf_scene(33, 5, SceneSplit::test);
    const VoxelGrid grid = scene_grid(scene);
    const ObjectModel object = scene_object_model(scene);

    PlannerConfig unrestricted = default_planner_config("shelf");
    PlannerConfig restricted = unrestricted;
    restricted.workspace = Workspace{{0.2, -0.4, 0.5}, 0.5};

    const auto plan_unrestricted = make_oracle_policy(unrestricted)(scene, grid, object);
    const auto plan_restricted = make_oracle_policy(restricted)(scene, grid, object);
    const double score_unrestricted = plan_unrestricted ? plan_unrestricted->score : 0.0;
    const double score_restricted = plan_restricted ? plan_restricted->score : 0.0;
    CHECK(score_restricted <= score_unrestricted + 1e-12);
}

}  // TEST_SUITE
