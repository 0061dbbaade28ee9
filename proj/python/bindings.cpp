// Python bindings for the core pick-and-place operations: rigid math, TSDF
// grids, rendering, oracle maps, scene generation and planning.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pickplace/grasp.hpp"
#include "pickplace/io.hpp"
#include "pickplace/net.hpp"
#include "pickplace/oracle.hpp"
#include "pickplace/render.hpp"
#include "pickplace/tasks.hpp"
#include "pickplace/train.hpp"

namespace py = pybind11;
using namespace pickplace;

namespace {

Vec3 to_vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
std::array<double, 3> from_vec3(const Vec3& v) { return {v.x, v.y, v.z}; }

py::array_t<float> grid_values(const VoxelGrid& g) {
    py::array_t<float> arr({g.dims.nz, g.dims.ny, g.dims.nx});
    std::memcpy(arr.mutable_data(), g.values.data(), g.values.size() * sizeof(float));
    return arr;
}

py::array_t<float> depth_values(const DepthImage& img) {
    py::array_t<float> arr({img.height, img.width});
    std::memcpy(arr.mutable_data(), img.depth.data(), img.depth.size() * sizeof(float));
    return arr;
}

py::array_t<float> map_values(const AffordanceMap& map) {
    py::array_t<float> arr({map.height, map.width});
    std::memcpy(arr.mutable_data(), map.scores.data(), map.scores.size() * sizeof(float));
    return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "placement-aware pick-and-place engine";

    py::class_<Rotation>(m, "Rotation")
        .def(py::init<>())
        .def_static("from_axis_angle",
                    [](const std::array<double, 3>& axis, double angle) {
                        return Rotation::from_axis_angle(to_vec3(axis), angle);
                    })
        .def_static("identity", &Rotation::identity)
        .def("inverse", &Rotation::inverse)
        .def("__mul__", &Rotation::operator*)
        .def("rotate",
             [](const Rotation& r, const std::array<double, 3>& v) {
                 return from_vec3(r.rotate(to_vec3(v)));
             })
        .def_property_readonly("wxyz",
                               [](const Rotation& r) {
                                   return std::array<double, 4>{r.w, r.x, r.y, r.z};
                               })
        .def("__repr__", [](const Rotation& r) {
            return "Rotation(w=" + std::to_string(r.w) + ", x=" + std::to_string(r.x) +
                   ", y=" + std::to_string(r.y) + ", z=" + std::to_string(r.z) + ")";
        });

    py::class_<RigidTransform>(m, "RigidTransform")
        .def(py::init<>())
        .def(py::init([](const Rotation& r, const std::array<double, 3>& t) {
                 return RigidTransform{r, to_vec3(t)};
             }),
             py::arg("rotation"), py::arg("translation"))
        .def_readwrite("rotation", &RigidTransform::rotation)
        .def_property(
            "translation",
            [](const RigidTransform& t) { return from_vec3(t.translation); },
            [](RigidTransform& t, const std::array<double, 3>& v) { t.translation = to_vec3(v); })
        .def("apply", [](const RigidTransform& t, const std::array<double, 3>& p) {
            return from_vec3(t.apply(to_vec3(p)));
        });

    m.def("compose", &compose);
    m.def("invert", &invert);
    m.def("geodesic_angle", &geodesic_angle);
    m.def("insertion_frame",
          [](const std::array<double, 3>& d) { return insertion_frame(to_vec3(d)); });
    m.def("place_rotation", &place_rotation);
    m.def("pick_rotation", &pick_rotation);
    m.def("sample_view_directions", [](int n, double lo, double hi) {
        std::vector<std::array<double, 3>> out;
        for (const Vec3& d : sample_view_directions(n, lo, hi)) out.push_back(from_vec3(d));
        return out;
    });
    m.def("sample_object_rotations", [](int n, const std::array<double, 3>& axis) {
        return sample_object_rotations(n, to_vec3(axis));
    });

    py::class_<VoxelGrid>(m, "VoxelGrid")
        .def_property_readonly("dims",
                               [](const VoxelGrid& g) {
                                   return std::array<int, 3>{g.dims.nx, g.dims.ny, g.dims.nz};
                               })
        .def_readonly("voxel_size", &VoxelGrid::voxel_size)
        .def_readonly("trunc", &VoxelGrid::trunc)
        .def_property_readonly("origin",
                               [](const VoxelGrid& g) { return from_vec3(g.origin); })
        .def_property_readonly("values", &grid_values)
        .def("sdf", [](const VoxelGrid& g, const std::array<double, 3>& p) {
            return sdf_query(g, to_vec3(p));
        });
    m.def("rotate_grid", &rotate_grid);
    m.def("save_grid", &save_grid);
    m.def("load_grid", &load_grid);

    py::class_<DepthImage>(m, "DepthImage")
        .def_readonly("width", &DepthImage::width)
        .def_readonly("height", &DepthImage::height)
        .def_property_readonly("values", &depth_values)
        .def("valid_count", &DepthImage::valid_count);

    py::class_<Camera>(m, "Camera");
    m.def(
        "camera_looking_along",
        [](const std::array<double, 3>& d, const std::array<double, 3>& target, double distance,
           double focal, int size) {
            return camera_looking_along(to_vec3(d), to_vec3(target), distance,
                                        Intrinsics{focal, focal, size / 2.0, size / 2.0, size,
                                                   size});
        },
        py::arg("direction"), py::arg("target"), py::arg("distance"), py::arg("focal") = 64.0,
        py::arg("size") = 64);
    m.def(
        "render_depth",
        [](const VoxelGrid& scene, const Camera& cam, double max_range) {
            RenderParams params;
            params.max_range = max_range;
            return render_depth(scene, cam, params);
        },
        py::arg("scene"), py::arg("camera"), py::arg("max_range") = 2.5);

    py::class_<AffordanceMap>(m, "AffordanceMap")
        .def_readonly("width", &AffordanceMap::width)
        .def_readonly("height", &AffordanceMap::height)
        .def_readonly("object_rotation", &AffordanceMap::object_rotation)
        .def_property_readonly("scores", &map_values);

    py::class_<ObjectModel>(m, "ObjectModel")
        .def_readonly("grid", &ObjectModel::grid)
        .def_property_readonly("com", [](const ObjectModel& o) { return from_vec3(o.com); });

    py::class_<Scene>(m, "Scene")
        .def_readonly("kind", &Scene::kind)
        .def_readonly("seed", &Scene::seed)
        .def_property_readonly("view_target",
                               [](const Scene& s) { return from_vec3(s.view_target); })
        .def_property_readonly("clutter_count",
                               [](const Scene& s) { return s.clutter.size(); })
        .def("to_json", [](const Scene& s) { return to_json(s).dump(); });
    m.def("gen_shelf_scene", [](uint64_t seed, int n, const std::string& split) {
        return gen_shelf_scene(seed, n,
                               split == "train" ? SceneSplit::train : SceneSplit::test);
    });
    m.def("gen_block_insertion", [](uint64_t seed, const std::string& dist) {
        return gen_block_insertion(seed, dist == "ood" ? PoseDist::ood : PoseDist::id);
    });
    m.def("constructed_lshape_instance", &constructed_lshape_instance,
          py::arg("fixture_yaw") = 30.0 * M_PI / 180.0);
    m.def("scene_grid", &scene_grid);
    m.def("scene_object_model", &scene_object_model);
    m.def("save_scene", &save_scene);
    m.def("load_scene", &load_scene);

    m.def(
        "oracle_affordance_map",
        [](const VoxelGrid& scene, const ObjectModel& object, const Rotation& rotation,
           const std::array<double, 3>& d, const Camera& cam, const Scene& task_scene) {
            std::vector<Vec3> samples;
            samples.reserve(object.samples.points.size());
            for (const Vec3& p : object.samples.points) samples.push_back(rotation.rotate(p));
            OracleParams params = make_oracle_params(scene.voxel_size);
            if (task_scene.kind == "block") params.rest_gap = 0.006;
            return oracle_affordance_map(scene, samples, rotation.rotate(object.com), rotation,
                                         to_vec3(d), cam, task_scene.target, params,
                                         RenderParams{});
        },
        py::arg("scene_grid"), py::arg("object"), py::arg("rotation"), py::arg("direction"),
        py::arg("camera"), py::arg("scene"));

    py::class_<PlanResult>(m, "PlanResult")
        .def_readonly("score", &PlanResult::score)
        .def_readonly("view_index", &PlanResult::view_index)
        .def_readonly("u", &PlanResult::u)
        .def_readonly("v", &PlanResult::v)
        .def_readonly("object_rotation", &PlanResult::object_rotation)
        .def_property_readonly("insert_dir",
                               [](const PlanResult& p) { return from_vec3(p.insert_dir); })
        .def_property_readonly("anchor", [](const PlanResult& p) { return from_vec3(p.anchor); })
        .def("to_json", [](const PlanResult& p) { return to_json(p).dump(); });

    py::class_<EpisodeResult>(m, "EpisodeResult")
        .def_readonly("reward", &EpisodeResult::reward)
        .def_property_readonly("failure_cause",
                               [](const EpisodeResult& e) { return to_string(e.cause); });

    m.def(
        "plan_oracle",
        [](const Scene& scene, int views, int rotations,
           const std::optional<std::array<double, 4>>& workspace) -> std::optional<PlanResult> {
            PlannerConfig cfg = default_planner_config(scene.kind);
            cfg.views = views;
            cfg.rotations = rotations;
            if (views == 1) {
                cfg.elev_lo = -M_PI / 2;
                cfg.elev_hi = -M_PI / 2;
            }
            if (workspace) {
                cfg.workspace =
                    Workspace{{(*workspace)[0], (*workspace)[1], (*workspace)[2]},
                              (*workspace)[3]};
            }
            const VoxelGrid grid = scene_grid(scene);
            const ObjectModel object = scene_object_model(scene);
            const Policy policy = make_oracle_policy(cfg);
            return policy(scene, grid, object);
        },
        py::arg("scene"), py::arg("views") = 16, py::arg("rotations") = 72,
        py::arg("workspace") = std::nullopt,
        py::call_guard<py::gil_scoped_release>());

    m.def(
        "run_oracle_episode",
        [](const Scene& scene, int views, int rotations) {
            PlannerConfig cfg = default_planner_config(scene.kind);
            cfg.views = views;
            cfg.rotations = rotations;
            const VoxelGrid grid = scene_grid(scene);
            const ObjectModel object = scene_object_model(scene);
            OracleParams params = make_oracle_params(scene.grid_voxel);
            if (scene.kind == "block") params.rest_gap = 0.006;
            return run_episode(scene, grid, object, make_oracle_policy(cfg), std::nullopt,
                               params);
        },
        py::arg("scene"), py::arg("views") = 16, py::arg("rotations") = 72,
        py::call_guard<py::gil_scoped_release>());

    m.attr("__version__") = "0.1.0";
}
