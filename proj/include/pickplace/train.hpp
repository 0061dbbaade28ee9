#pragma once
//
// Trial-and-error training: per episode the agent sweeps sampled views and
// object rotations, picks a pixel epsilon-greedily over the model's maps,
// executes it against the oracle, and labels exactly that pixel with the
// sparse episode reward. A small replay buffer with positive/negative
// balancing feeds the momentum-SGD updates.

#include <random>
#include <string>
#include <vector>

#include "pickplace/net.hpp"
#include "pickplace/tasks.hpp"

namespace pickplace {

struct TrainConfig {
    std::string task = "shelf";  // "shelf" or "block_instance"
    int episodes = 500;
    double epsilon_start = 1.0;
    double epsilon_end = 0.1;
    int epsilon_anneal = 500;  // episodes to anneal over
    double lr = 1e-3;
    double momentum = 0.9;
    int batch = 8;
    int steps_per_episode = 2;
    int checkpoint_every = 200;
    uint64_t seed = 1;
    uint64_t scene_seed0 = 100000;   // training scene seed stream
    uint64_t fixed_scene_seed = 42;  // block_instance mode trains on one scene
    GridDims object_dims{24, 24, 24};
    double object_voxel = 0.01;
    ModelConfig model;
    PlannerConfig planner;
    std::string out_dir;
    std::string resume_checkpoint;
};

struct TrainLogRow {
    int episode = 0;
    double epsilon = 0.0;
    int reward = 0;
    double loss = 0.0;
};

struct TrainOutcome {
    std::string checkpoint_path;
    std::vector<TrainLogRow> log;
    int positives = 0;
};

/// Uniformly random (map, finite pixel) with probability epsilon, else the
/// global argmax. Validity comes from the per-map depth images.
PlaceAction choose_epsilon_greedy(const std::vector<AffordanceMap>& maps,
                                  const std::vector<const DepthImage*>& depths, double epsilon,
                                  std::mt19937_64& rng);

/// The planner's candidate object rotations for a direction: world yaws
/// (upright family) plus spins about d composed with the minimal tilt from
/// -Z onto d (aligned family), per the config flags.
std::vector<Rotation> rotation_candidates(const PlannerConfig& cfg, const Vec3& d);

struct CollectedSample {
    TrainSample sample;
    int reward = 0;
    int maps_evaluated = 0;  // maps scored by the model (0 on exploration)
    PlaceAction action;
};

/// One trial-and-error episode on the given scene.
CollectedSample collect_epsilon_greedy(const Scene& scene, const VoxelGrid& grid,
                                       const ObjectModel& object, const AffordanceModel& model,
                                       double epsilon, const TrainConfig& cfg,
                                       std::mt19937_64& rng);

TrainOutcome run_training(const TrainConfig& cfg);

/// Model-backed policy over the planner's enumeration and filters.
Policy make_learned_policy(const AffordanceModel& model, PlannerConfig base, GridDims object_dims,
                           double object_voxel, uint64_t grasp_seed = 7);

}  // namespace pickplace
