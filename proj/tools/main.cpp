// Command-line harness: scene generation, affordance visualization,
// trial-and-error training, and policy evaluation.
//
// Exit codes: 0 success, 2 usage/config error, 3 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pickplace/errors.hpp"
#include "pickplace/io.hpp"
#include "pickplace/net.hpp"
#include "pickplace/parallel.hpp"
#include "pickplace/tasks.hpp"
#include "pickplace/train.hpp"

namespace pp = pickplace;
namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string command;
    std::string task = "shelf";
    std::string dist = "id";
    std::string split = "test";
    int n = 10;
    uint64_t seed = 0;
    int views = 16;
    int rotations = 72;
    double epsilon = 1.0;
    int episodes = 500;
    std::string workspace;  // "cx,cy,cz,r" or empty
    std::string value = "oracle";
    std::string out = "out";
    int threads = 0;
    std::string scene_file;
    std::string checkpoint;
    bool summary = false;
};

pp::json config_to_json(const RunConfig& c) {
    return pp::json{{"command", c.command}, {"task", c.task},       {"dist", c.dist},
                    {"split", c.split},     {"n", c.n},             {"seed", c.seed},
                    {"views", c.views},     {"rotations", c.rotations},
                    {"epsilon", c.epsilon}, {"episodes", c.episodes},
                    {"workspace", c.workspace},                     {"value", c.value},
                    {"out", c.out},         {"threads", c.threads}, {"scene", c.scene_file},
                    {"checkpoint", c.checkpoint},                   {"summary", c.summary}};
}

void config_from_json(const pp::json& j, RunConfig& c) {
    c.command = j.value("command", c.command);
    c.task = j.value("task", c.task);
    c.dist = j.value("dist", c.dist);
    c.split = j.value("split", c.split);
    c.n = j.value("n", c.n);
    c.seed = j.value("seed", c.seed);
    c.views = j.value("views", c.views);
    c.rotations = j.value("rotations", c.rotations);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.episodes = j.value("episodes", c.episodes);
    c.workspace = j.value("workspace", c.workspace);
    c.value = j.value("value", c.value);
    c.out = j.value("out", c.out);
    c.threads = j.value("threads", c.threads);
    c.scene_file = j.value("scene", c.scene_file);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.summary = j.value("summary", c.summary);
}

std::optional<pp::Workspace> parse_workspace(const std::string& text) {
    if (text.empty()) return std::nullopt;
    pp::Workspace w;
    if (std::sscanf(text.c_str(), "%lf,%lf,%lf,%lf", &w.center.x, &w.center.y, &w.center.z,
                    &w.radius) != 4 ||
        w.radius <= 0.0) {
        throw pp::Error("workspace must be cx,cy,cz,r with r > 0, got '" + text + "'");
    }
    return w;
}

void write_effective_config(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    pp::write_text_file(cfg.out + "/config.json", config_to_json(cfg).dump(2) + "\n");
}

int cmd_gen(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    for (int i = 0; i < cfg.n; ++i) {
        const uint64_t seed = cfg.seed + static_cast<uint64_t>(i);
        pp::Scene scene;
        if (cfg.task == "shelf") {
            std::mt19937_64 nrng(pp::mix_seed(seed, 21));
            const int hi = cfg.split == "train" ? 7 : 9;
            std::uniform_int_distribution<int> nd(5, hi);
            scene = pp::gen_shelf_scene(
                seed, nd(nrng),
                cfg.split == "train" ? pp::SceneSplit::train : pp::SceneSplit::test);
        } else if (cfg.task == "block") {
            scene = pp::gen_block_insertion(seed,
                                            cfg.dist == "ood" ? pp::PoseDist::ood
                                                              : pp::PoseDist::id);
        } else {
            throw pp::Error("unknown task '" + cfg.task + "'");
        }
        pp::save_scene(scene, cfg.out + "/scene_" + std::to_string(seed) + ".json");
    }
    std::cout << "wrote " << cfg.n << " scene(s) to " << cfg.out << "\n";
    return 0;
}

pp::PlannerConfig planner_from_config(const RunConfig& cfg, const std::string& task) {
    pp::PlannerConfig planner = pp::default_planner_config(task);
    planner.views = cfg.views;
    planner.rotations = cfg.rotations;
    planner.workspace = parse_workspace(cfg.workspace);
    if (cfg.views == 1) {
        // Single-view mode is the top-down ablation.
        planner.elev_lo = -M_PI / 2;
        planner.elev_hi = -M_PI / 2;
    }
    return planner;
}

int cmd_afford(const RunConfig& cfg) {
    const pp::Scene scene = pp::load_scene(cfg.scene_file);
    const pp::VoxelGrid grid = pp::scene_grid(scene);
    const pp::ObjectModel object = pp::scene_object_model(scene);
    pp::PlannerConfig planner = planner_from_config(cfg, scene.kind);
    planner.view_target = scene.view_target;
    planner.oracle.contact_eps = grid.voxel_size;
    planner.oracle.contact_band = grid.voxel_size;
    if (scene.kind == "block") planner.oracle.rest_gap = 0.006;

    std::unique_ptr<pp::AffordanceModel> model;
    std::unique_ptr<pp::LearnedValue> learned;
    pp::OracleValue oracle(scene.target, planner.oracle);
    pp::PlacementValue* value = &oracle;
    if (cfg.value == "learned") {
        if (cfg.checkpoint.empty() || !fs::exists(cfg.checkpoint)) {
            throw pp::Error("--value learned requires an existing --checkpoint");
        }
        model = std::make_unique<pp::AffordanceModel>(pp::AffordanceModel::load(cfg.checkpoint));
        learned = std::make_unique<pp::LearnedValue>(*model, pp::GridDims{24, 24, 24}, 0.01);
        value = learned.get();
    }

    fs::create_directories(cfg.out);
    const std::vector<pp::Vec3> dirs =
        pp::sample_view_directions(planner.views, planner.elev_lo, planner.elev_hi);
    std::vector<pp::AffordanceMap> maps;
    std::vector<pp::DepthImage> depths;
    std::vector<int> map_view;
    for (size_t vi = 0; vi < dirs.size(); ++vi) {
        const pp::Camera cam = pp::camera_looking_along(dirs[vi], planner.view_target,
                                                        planner.camera_distance,
                                                        planner.intrinsics);
        const pp::DepthImage depth = pp::render_depth(grid, cam, planner.render);
        const std::vector<pp::Rotation> rotations = pp::rotation_candidates(planner, dirs[vi]);
        for (size_t ri = 0; ri < rotations.size(); ++ri) {
            std::vector<pp::Vec3> samples;
            samples.reserve(object.samples.points.size());
            for (const pp::Vec3& p : object.samples.points) {
                samples.push_back(rotations[ri].rotate(p));
            }
            pp::AffordanceMap map = value->score_map(grid, static_cast<int>(vi), samples,
                                                     rotations[ri].rotate(object.com),
                                                     rotations[ri], object.grid, dirs[vi], cam,
                                                     depth, nullptr);
            if (!cfg.summary) {
                pp::save_pgm8(map, cfg.out + "/map_v" + std::to_string(vi) + "_r" +
                                       std::to_string(ri) + ".pgm");
            }
            maps.push_back(std::move(map));
            map_view.push_back(static_cast<int>(vi));
        }
        depths.push_back(depth);
    }
    const pp::PlaceAction best = pp::argmax_action(maps);
    const int best_view = map_view[static_cast<size_t>(best.map_index)];
    pp::save_pgm8(maps[static_cast<size_t>(best.map_index)], cfg.out + "/best_map.pgm");
    pp::save_overlay_png(depths[static_cast<size_t>(best_view)],
                         maps[static_cast<size_t>(best.map_index)], cfg.out + "/best_overlay.png");

    pp::json action{{"pixel", {best.u, best.v}},
                    {"map_index", best.map_index},
                    {"view_index", best_view},
                    {"score", best.score},
                    {"insert_dir", pp::to_json(best.insert_dir)},
                    {"object_rotation", pp::to_json(best.object_rotation)},
                    {"maps", maps.size()}};
    pp::write_text_file(cfg.out + "/action.json", action.dump(2) + "\n");
    std::cout << "evaluated " << maps.size() << " maps; best score " << best.score << " at ("
              << best.u << "," << best.v << ")\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    pp::TrainConfig train;
    train.task = cfg.task == "block_instance" ? "block_instance" : "shelf";
    train.episodes = cfg.episodes;
    train.epsilon_start = cfg.epsilon;
    train.seed = cfg.seed == 0 ? 1 : cfg.seed;
    train.out_dir = cfg.out;
    train.resume_checkpoint = cfg.checkpoint;
    if (train.task == "block_instance") {
        train.planner = pp::default_planner_config("block");
        train.planner.views = 1;
        train.planner.elev_lo = -M_PI / 2;
        train.planner.elev_hi = -M_PI / 2;
        train.planner.rotations = cfg.rotations;
        train.planner.intrinsics = pp::Intrinsics{112.0, 112.0, 56.0, 56.0, 112, 112};
        train.planner.camera_distance = 0.55;
    } else {
        train.planner = pp::default_planner_config("shelf");
        train.planner.views = cfg.views;
        train.planner.rotations = cfg.rotations;
    }
    train.model.depth_offset = train.planner.camera_distance;

    const pp::TrainOutcome outcome = pp::run_training(train);
    std::string log = "episode,epsilon,reward,loss\n";
    for (const pp::TrainLogRow& row : outcome.log) {
        log += std::to_string(row.episode) + "," + std::to_string(row.epsilon) + "," +
               std::to_string(row.reward) + "," + std::to_string(row.loss) + "\n";
    }
    pp::write_text_file(cfg.out + "/log.csv", log);
    std::cout << "trained " << cfg.episodes << " episodes, " << outcome.positives
              << " successes; checkpoint at " << outcome.checkpoint_path << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    pp::EvalOptions options;
    options.task = cfg.task;
    options.dist = cfg.dist == "ood" ? pp::PoseDist::ood : pp::PoseDist::id;
    options.split = cfg.split == "train" ? pp::SceneSplit::train : pp::SceneSplit::test;
    options.episodes = cfg.n;
    options.seed0 = cfg.seed;
    options.workspace = parse_workspace(cfg.workspace);

    const pp::PlannerConfig planner = planner_from_config(cfg, cfg.task);
    pp::Policy policy;
    std::unique_ptr<pp::AffordanceModel> model;
    if (cfg.value == "oracle") {
        policy = pp::make_oracle_policy(planner);
    } else if (cfg.value == "learned") {
        if (cfg.checkpoint.empty() || !fs::exists(cfg.checkpoint)) {
            throw pp::Error("--value learned requires an existing --checkpoint");
        }
        model = std::make_unique<pp::AffordanceModel>(pp::AffordanceModel::load(cfg.checkpoint));
        policy = pp::make_learned_policy(*model, planner, pp::GridDims{24, 24, 24}, 0.01);
    } else if (cfg.value == "random") {
        policy = pp::make_random_policy(planner, cfg.seed);
    } else {
        throw pp::Error("unknown value function '" + cfg.value + "'");
    }

    const pp::Metrics metrics = pp::eval_suite(options, policy);
    fs::create_directories(cfg.out);
    pp::write_text_file(cfg.out + "/metrics.csv", pp::metrics_csv(metrics));
    pp::write_text_file(cfg.out + "/summary.json", pp::to_json(metrics).dump(2) + "\n");
    std::cout << "success rate " << metrics.success_rate() << " over " << metrics.episodes
              << " episodes\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"placement-aware pick-and-place engine"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags win)");
        sub->add_option("--seed", cfg.seed, "master seed");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--threads", cfg.threads, "worker thread cap (0 = hardware)");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate benchmark scenes");
    add_common(gen);
    gen->add_option("--task", cfg.task, "shelf or block");
    gen->add_option("--dist", cfg.dist, "id or ood (block)");
    gen->add_option("--split", cfg.split, "train or test (shelf)");
    gen->add_option("--n", cfg.n, "number of scenes");

    CLI::App* afford = app.add_subcommand("afford", "affordance maps for one scene");
    add_common(afford);
    afford->add_option("--scene", cfg.scene_file, "scene JSON file")->required();
    afford->add_option("--views", cfg.views, "viewing directions");
    afford->add_option("--rotations", cfg.rotations, "object rotations per family");
    afford->add_option("--value", cfg.value, "oracle or learned");
    afford->add_option("--checkpoint", cfg.checkpoint, "model checkpoint (learned)");
    afford->add_flag("--summary", cfg.summary, "write only the best map image");

    CLI::App* train = app.add_subcommand("train", "trial-and-error training");
    add_common(train);
    train->add_option("--task", cfg.task, "shelf or block_instance");
    train->add_option("--episodes", cfg.episodes, "training episode budget");
    train->add_option("--epsilon", cfg.epsilon, "initial exploration rate");
    train->add_option("--views", cfg.views, "viewing directions (default 5)");
    train->add_option("--rotations", cfg.rotations, "object rotations per family (default 8)");
    train->add_option("--checkpoint", cfg.checkpoint, "resume from checkpoint");

    CLI::App* eval = app.add_subcommand("eval", "policy evaluation suite");
    add_common(eval);
    eval->add_option("--task", cfg.task, "shelf or block");
    eval->add_option("--dist", cfg.dist, "id or ood (block)");
    eval->add_option("--split", cfg.split, "train or test (shelf)");
    eval->add_option("--n", cfg.n, "episodes");
    eval->add_option("--views", cfg.views, "viewing directions");
    eval->add_option("--rotations", cfg.rotations, "object rotations per family");
    eval->add_option("--value", cfg.value, "oracle, learned or random");
    eval->add_option("--checkpoint", cfg.checkpoint, "model checkpoint (learned)");
    eval->add_option("--workspace", cfg.workspace, "workspace ball cx,cy,cz,r");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (!config_path.empty()) {
            // Config file fills gaps; explicit flags already won during parse,
            // so only apply values the user did not set.
            RunConfig file_cfg = cfg;
            config_from_json(pp::json::parse(pp::read_text_file(config_path)), file_cfg);
            CLI::App* sub = app.get_subcommands().front();
            const auto keep_if_set = [&](const std::string& flag, auto member,
                                         auto file_member) {
                if (sub->count(flag) == 0) *member = *file_member;
            };
            keep_if_set("--task", &cfg.task, &file_cfg.task);
            keep_if_set("--dist", &cfg.dist, &file_cfg.dist);
            keep_if_set("--split", &cfg.split, &file_cfg.split);
            keep_if_set("--n", &cfg.n, &file_cfg.n);
            keep_if_set("--seed", &cfg.seed, &file_cfg.seed);
            keep_if_set("--views", &cfg.views, &file_cfg.views);
            keep_if_set("--rotations", &cfg.rotations, &file_cfg.rotations);
            keep_if_set("--epsilon", &cfg.epsilon, &file_cfg.epsilon);
            keep_if_set("--episodes", &cfg.episodes, &file_cfg.episodes);
            keep_if_set("--workspace", &cfg.workspace, &file_cfg.workspace);
            keep_if_set("--value", &cfg.value, &file_cfg.value);
            keep_if_set("--out", &cfg.out, &file_cfg.out);
            keep_if_set("--threads", &cfg.threads, &file_cfg.threads);
            keep_if_set("--checkpoint", &cfg.checkpoint, &file_cfg.checkpoint);
        }
        pp::set_thread_count(cfg.threads);

        const std::string sub = app.get_subcommands().front()->get_name();
        cfg.command = sub;
        if (sub == "train") {
            CLI::App* tr = app.get_subcommands().front();
            if (tr->count("--views") == 0) cfg.views = 5;
            if (tr->count("--rotations") == 0) cfg.rotations = 8;
        }
        if (sub == "gen") {
            if (cfg.task != "shelf" && cfg.task != "block") {
                std::cerr << "error: unknown task '" << cfg.task << "'\n";
                return 2;
            }
            write_effective_config(cfg);
            return cmd_gen(cfg);
        }
        if (sub == "afford") {
            write_effective_config(cfg);
            return cmd_afford(cfg);
        }
        if (sub == "train") {
            write_effective_config(cfg);
            return cmd_train(cfg);
        }
        if (sub == "eval") {
            if (cfg.task != "shelf" && cfg.task != "block") {
                std::cerr << "error: unknown task '" << cfg.task << "'\n";
                return 2;
            }
            write_effective_config(cfg);
            return cmd_eval(cfg);
        }
        std::cerr << "error: unknown command\n";
        return 2;
    } catch (const pp::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pp::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 3;
    }
}
