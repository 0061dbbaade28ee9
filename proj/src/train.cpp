#include "pickplace/train.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <filesystem>

#include "pickplace/errors.hpp"

namespace pickplace {

PlaceAction choose_epsilon_greedy(const std::vector<AffordanceMap>& maps,
                                  const std::vector<const DepthImage*>& depths, double epsilon,
                                  std::mt19937_64& rng) {
    if (maps.empty()) throw EmptyMapSet("choose_epsilon_greedy: no maps");
    assert(maps.size() == depths.size());
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) >= epsilon) {
        return argmax_action(maps);
    }
    std::vector<size_t> valid(maps.size());
    size_t total = 0;
    for (size_t m = 0; m < maps.size(); ++m) {
        valid[m] = static_cast<size_t>(depths[m]->valid_count());
        total += valid[m];
    }
    if (total == 0) return argmax_action(maps);
    std::uniform_int_distribution<size_t> dist(0, total - 1);
    size_t target = dist(rng);
    for (size_t m = 0; m < maps.size(); ++m) {
        if (target >= valid[m]) {
            target -= valid[m];
            continue;
        }
        const DepthImage& depth = *depths[m];
        size_t seen = 0;
        for (int v = 0; v < depth.height; ++v) {
            for (int u = 0; u < depth.width; ++u) {
                if (!depth.valid(u, v)) continue;
                if (seen == target) {
                    return PlaceAction{u, v, static_cast<int>(m), maps[m].score(u, v),
                                       maps[m].insert_dir, maps[m].object_rotation};
                }
                ++seen;
            }
        }
    }
    return argmax_action(maps);  // unreachable
}

std::vector<Rotation> rotation_candidates(const PlannerConfig& cfg, const Vec3& d) {
    std::vector<Rotation> out;
    if (cfg.upright_rotations) {
        for (const Rotation& yaw : sample_object_rotations(cfg.rotations, {0, 0, 1})) {
            out.push_back(yaw);
        }
    }
    if (cfg.aligned_rotations) {
        const Rotation tilt = Rotation::between({0, 0, -1}, d.normalized());
        if (geodesic_angle(tilt, Rotation::identity()) > 1e-9) {
            for (const Rotation& spin : sample_object_rotations(cfg.rotations, d)) {
                out.push_back(spin * tilt);
            }
        }
    }
    if (out.empty()) out = sample_object_rotations(cfg.rotations, {0, 0, 1});
    return out;
}

namespace {

struct RenderedViews {
    std::vector<Vec3> dirs;
    std::vector<Camera> cams;
    std::vector<DepthImage> depths;
};

RenderedViews render_views(const VoxelGrid& grid, const PlannerConfig& cfg) {
    RenderedViews views;
    views.dirs = sample_view_directions(cfg.views, cfg.elev_lo, cfg.elev_hi);
    for (const Vec3& d : views.dirs) {
        views.cams.push_back(
            camera_looking_along(d, cfg.view_target, cfg.camera_distance, cfg.intrinsics));
        views.depths.push_back(render_depth(grid, views.cams.back(), cfg.render));
    }
    return views;
}

}  // namespace

CollectedSample collect_epsilon_greedy(const Scene& scene, const VoxelGrid& grid,
                                       const ObjectModel& object, const AffordanceModel& model,
                                       double epsilon, const TrainConfig& cfg,
                                       std::mt19937_64& rng) {
    PlannerConfig planner = cfg.planner;
    planner.view_target = scene.view_target;
    planner.oracle.contact_eps = grid.voxel_size;
    planner.oracle.contact_band = grid.voxel_size;
    if (scene.kind == "block") planner.oracle.rest_gap = 0.006;

    const RenderedViews views = render_views(grid, planner);
    LearnedValue value(model, cfg.object_dims, cfg.object_voxel);

    // The sweep's action set: (view, rotation candidate) pairs. Exploration
    // picks without scoring; exploitation scores every map with the model.
    std::vector<std::pair<int, Rotation>> actions;
    for (size_t vi = 0; vi < views.dirs.size(); ++vi) {
        for (const Rotation& w : rotation_candidates(planner, views.dirs[vi])) {
            actions.push_back({static_cast<int>(vi), w});
        }
    }

    CollectedSample out;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    PlaceAction chosen;
    int chosen_view = 0;
    if (coin(rng) < epsilon) {
        // Uniform over (action, finite pixel).
        std::vector<size_t> valid(actions.size());
        size_t total = 0;
        for (size_t a = 0; a < actions.size(); ++a) {
            valid[a] = static_cast<size_t>(
                views.depths[static_cast<size_t>(actions[a].first)].valid_count());
            total += valid[a];
        }
        if (total == 0) {
            out.reward = 0;
            return out;
        }
        std::uniform_int_distribution<size_t> dist(0, total - 1);
        size_t target = dist(rng);
        size_t a = 0;
        while (a < actions.size() && target >= valid[a]) target -= valid[a++];
        chosen_view = actions[a].first;
        const DepthImage& depth = views.depths[static_cast<size_t>(chosen_view)];
        size_t seen = 0;
        for (int v = 0; v < depth.height; ++v) {
            for (int u = 0; u < depth.width; ++u) {
                if (!depth.valid(u, v)) continue;
                if (seen == target) {
                    chosen = PlaceAction{u, v, static_cast<int>(a), 0.0f,
                                         views.dirs[static_cast<size_t>(chosen_view)],
                                         actions[a].second};
                    v = depth.height;
                    break;
                }
                ++seen;
            }
        }
    } else {
        std::vector<AffordanceMap> maps;
        std::vector<const DepthImage*> depth_ptrs;
        maps.reserve(actions.size());
        for (size_t a = 0; a < actions.size(); ++a) {
            const int vi = actions[a].first;
            maps.push_back(value.score_map(
                grid, vi, {}, {}, actions[a].second, object.grid,
                views.dirs[static_cast<size_t>(vi)], views.cams[static_cast<size_t>(vi)],
                views.depths[static_cast<size_t>(vi)], nullptr));
            depth_ptrs.push_back(&views.depths[static_cast<size_t>(vi)]);
        }
        out.maps_evaluated = static_cast<int>(maps.size());
        chosen = argmax_action(maps);
        // Guard against an argmax on a miss pixel (scores exist everywhere).
        if (!depth_ptrs[static_cast<size_t>(chosen.map_index)]->valid(chosen.u, chosen.v)) {
            chosen = choose_epsilon_greedy(maps, depth_ptrs, 1.0, rng);
        }
        chosen_view = actions[static_cast<size_t>(chosen.map_index)].first;
    }
    out.action = chosen;

    // Execute: bind a grasp, realize the rotation exactly, evaluate.
    const Vec3 d = views.dirs[static_cast<size_t>(chosen_view)];
    const Rotation w = chosen.object_rotation;
    OracleParams params = planner.oracle;
    int reward = 0;
    std::vector<Grasp> grasps;
    try {
        GraspSamplerParams gp;
        gp.count = 384;
        gp.budget = 60000;
        gp.axis_separation = 0.03;
        gp.seed = mix_seed(scene.seed, 7);
        grasps = sample_antipodal_grasps(object, gp);
    } catch (const NoGraspFound&) {
    }
    const auto grasp =
        snap_grasp_to_rotation(grasps, w.inverse() * insertion_frame(d), planner.grasp_match_tol);
    if (grasp) {
        std::vector<Vec3> samples;
        samples.reserve(object.samples.points.size());
        for (const Vec3& p : object.samples.points) samples.push_back(w.rotate(p));
        const Vec3 com = w.rotate(object.com);
        const float depth_value =
            views.depths[static_cast<size_t>(chosen_view)].at(chosen.u, chosen.v);
        if (std::isfinite(depth_value)) {
            const Vec3 anchor =
                pixel_to_world(chosen.u, chosen.v, depth_value,
                               views.cams[static_cast<size_t>(chosen_view)]) +
                Vec3{0, 0, z_offset_from_samples(samples) + params.rest_gap};
            const PlacementOutcome outcome =
                evaluate_placement(grid, samples, com, w, anchor, d, scene.target, params);
            reward = outcome.success ? 1 : 0;
        }
    }
    out.reward = reward;

    // The training sample: the chosen pixel labeled with the episode reward.
    const ModelConfig& mc = model.config();
    out.sample.view = depth_to_tensor(views.depths[static_cast<size_t>(chosen_view)],
                                      mc.depth_offset, mc.depth_scale, mc.miss_value);
    out.sample.object = value.object_input(object.grid, w);
    out.sample.label = Tensor({1, views.depths[static_cast<size_t>(chosen_view)].height,
                               views.depths[static_cast<size_t>(chosen_view)].width});
    out.sample.mask = Tensor(out.sample.label.shape);
    const size_t px = static_cast<size_t>(chosen.v) *
                          static_cast<size_t>(out.sample.label.dim(2)) +
                      static_cast<size_t>(chosen.u);
    out.sample.label.data[px] = static_cast<float>(reward);
    out.sample.mask.data[px] = 1.0f;
    return out;
}

TrainOutcome run_training(const TrainConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    AffordanceModel model = cfg.resume_checkpoint.empty()
                                ? AffordanceModel(cfg.model, cfg.seed)
                                : AffordanceModel::load(cfg.resume_checkpoint);
    std::mt19937_64 rng(mix_seed(cfg.seed, 31));

    TrainOutcome outcome;
    std::vector<TrainSample> positives, negatives;
    const size_t replay_cap = 1500;

    // The block-instance mode memorizes one scene; cache its geometry.
    Scene fixed_scene;
    VoxelGrid fixed_grid;
    ObjectModel fixed_object;
    if (cfg.task == "block_instance") {
        fixed_scene = gen_block_insertion(cfg.fixed_scene_seed, PoseDist::id);
        fixed_grid = scene_grid(fixed_scene);
        fixed_object = scene_object_model(fixed_scene);
    }

    for (int episode = 0; episode < cfg.episodes; ++episode) {
        const double frac =
            cfg.epsilon_anneal <= 0
                ? 1.0
                : std::min(1.0, static_cast<double>(episode) / cfg.epsilon_anneal);
        const double epsilon =
            cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;

        CollectedSample collected;
        if (cfg.task == "block_instance") {
            collected = collect_epsilon_greedy(fixed_scene, fixed_grid, fixed_object, model,
                                               epsilon, cfg, rng);
        } else {
            const uint64_t seed = cfg.scene_seed0 + static_cast<uint64_t>(episode);
            std::mt19937_64 nrng(mix_seed(seed, 21));
            std::uniform_int_distribution<int> nd(5, 7);
            const Scene scene = gen_shelf_scene(seed, nd(nrng), SceneSplit::train);
            const VoxelGrid grid = scene_grid(scene);
            const ObjectModel object = scene_object_model(scene);
            collected = collect_epsilon_greedy(scene, grid, object, model, epsilon, cfg, rng);
        }
        outcome.positives += collected.reward;

        auto& pool = collected.reward ? positives : negatives;
        pool.push_back(std::move(collected.sample));
        if (pool.size() > replay_cap) pool.erase(pool.begin());

        double loss_sum = 0.0;
        int steps = 0;
        for (int s = 0; s < cfg.steps_per_episode; ++s) {
            std::vector<TrainSample> batch;
            for (int b = 0; b < cfg.batch; ++b) {
                const bool want_pos = !positives.empty() && (b % 2 == 0 || negatives.empty());
                const auto& pool_ref = want_pos ? positives : negatives;
                if (pool_ref.empty()) continue;
                std::uniform_int_distribution<size_t> pick(0, pool_ref.size() - 1);
                batch.push_back(pool_ref[pick(rng)]);
            }
            if (batch.empty()) continue;
            loss_sum += train_step(model, batch, cfg.lr, cfg.momentum);
            ++steps;
        }
        outcome.log.push_back(
            {episode, epsilon, collected.reward, steps ? loss_sum / steps : 0.0});

        if (cfg.checkpoint_every > 0 && (episode + 1) % cfg.checkpoint_every == 0) {
            model.save(cfg.out_dir + "/checkpoint_" + std::to_string(episode + 1) + ".afnet");
        }
    }
    outcome.checkpoint_path = cfg.out_dir + "/model.afnet";
    model.save(outcome.checkpoint_path);
    return outcome;
}

Policy make_learned_policy(const AffordanceModel& model, PlannerConfig base, GridDims object_dims,
                           double object_voxel, uint64_t grasp_seed) {
    return [&model, base, object_dims, object_voxel, grasp_seed](
               const Scene& scene, const VoxelGrid& grid,
               const ObjectModel& object) -> std::optional<PlanResult> {
        PlannerConfig cfg = base;
        cfg.view_target = scene.view_target;
        cfg.oracle.contact_eps = grid.voxel_size;
        cfg.oracle.contact_band = grid.voxel_size;
        cfg.pick_obstacle_distance = pick_obstacle_query(scene);
        GraspSamplerParams gp;
        gp.count = 384;
        gp.budget = 60000;
        gp.axis_separation = 0.03;
        gp.seed = mix_seed(scene.seed, grasp_seed);
        std::vector<Grasp> grasps;
        try {
            grasps = sample_antipodal_grasps(object, gp);
        } catch (const NoGraspFound&) {
            return std::nullopt;
        }
        LearnedValue value(model, object_dims, object_voxel);
        return plan_pick_and_place(grid, object, grasps, value, cfg);
    };
}

}  // namespace pickplace
