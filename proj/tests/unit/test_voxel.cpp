#include <doctest.h>

#include <cstdio>
#include <random>

#include "pickplace/errors.hpp"
#include "pickplace/render.hpp"
#include "pickplace/voxel.hpp"

using namespace pickplace;

namespace {

std::mt19937_64 rng(777);

double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Containment oracle: point-in-solid by explicit geometry, no SDF involved.
bool inside_primitive(const Primitive& prim, const Vec3& p) {
    const Vec3 q = invert(prim.pose).apply(p);
    switch (prim.kind) {
        case PrimitiveKind::box:
            return std::abs(q.x) <= prim.half.x && std::abs(q.y) <= prim.half.y &&
                   std::abs(q.z) <= prim.half.z;
        case PrimitiveKind::sphere:
            return q.norm() <= prim.radius;
        case PrimitiveKind::cylinder:
            return std::hypot(q.x, q.y) <= prim.radius && std::abs(q.z) <= prim.half_height;
        case PrimitiveKind::lshape: {
            const Vec3 c{q.x + prim.leg_x / 2, q.y + prim.leg_y / 2, q.z + prim.height / 2};
            const bool in_a = c.x >= 0 && c.x <= prim.thickness && c.y >= 0 &&
                              c.y <= prim.leg_y && c.z >= 0 && c.z <= prim.height;
            const bool in_b = c.x >= 0 && c.x <= prim.leg_x && c.y >= 0 &&
                              c.y <= prim.thickness && c.z >= 0 && c.z <= prim.height;
            return in_a || in_b;
        }
    }
    return false;
}

VoxelGrid sphere_grid(double radius = 0.05, int n = 32, double voxel = 0.005) {
    const Vec3 origin{-(n - 1) * 0.5 * voxel, -(n - 1) * 0.5 * voxel, -(n - 1) * 0.5 * voxel};
    return grid_from_primitives({make_sphere(radius, {0, 0, 0})}, {n, n, n}, voxel, origin);
}

}  // namespace

TEST_SUITE("voxel") {

TEST_CASE("grid_from_primitives clamps to the truncation band") {
    const VoxelGrid g = sphere_grid();
    const int c = g.dims.nx / 2;
    CHECK(g.at(c, c, c) == doctest::Approx(-g.trunc));  // deep inside, clamped
    CHECK(g.at(0, 0, 0) == doctest::Approx(g.trunc));   // far corner, clamped
    for (float v : g.values) {
        CHECK(v >= -g.trunc);
        CHECK(v <= g.trunc);
    }
}

TEST_CASE("union of overlapping boxes matches a containment oracle") {
    const std::vector<Primitive> shapes = {
        make_box({0.03, 0.02, 0.025}, {Rotation::identity(), {0.0, 0.0, 0.0}}),
        make_box({0.025, 0.03, 0.02},
                 {Rotation::from_axis_angle({0, 0, 1}, 0.7), {0.02, 0.01, 0.005}}),
    };
    const VoxelGrid g = grid_from_primitives(shapes, {32, 32, 32}, 0.004,
                                             {-0.062, -0.062, -0.062});
    for (int z = 0; z < g.dims.nz; ++z) {
        for (int y = 0; y < g.dims.ny; ++y) {
            for (int x = 0; x < g.dims.nx; ++x) {
                const Vec3 p = g.voxel_center(x, y, z);
                const bool inside = inside_primitive(shapes[0], p) || inside_primitive(shapes[1], p);
                const float v = g.at(x, y, z);
                if (inside) {
                    CHECK(v <= 1e-6f);
                } else {
                    CHECK(v >= -1e-6f);
                }
            }
        }
    }
}

TEST_CASE("sdf_query returns stored values at voxel centers") {
    const VoxelGrid g = sphere_grid();
    for (int i = 0; i < 50; ++i) {
        const int x = static_cast<int>(uniform(0, g.dims.nx - 1));
        const int y = static_cast<int>(uniform(0, g.dims.ny - 1));
        const int z = static_cast<int>(uniform(0, g.dims.nz - 1));
        CHECK(sdf_query(g, g.voxel_center(x, y, z)) == doctest::Approx(g.at(x, y, z)));
    }
}

TEST_CASE("sdf_query outside the lattice returns +trunc") {
    const VoxelGrid g = sphere_grid();
    CHECK(sdf_query(g, {10, 0, 0}) == doctest::Approx(g.trunc));
    CHECK(sdf_query(g, {0, -10, 0}) == doctest::Approx(g.trunc));
}

TEST_CASE("sdf_query interpolates midpoints as the neighbor average") {
    VoxelGrid g;
    g.dims = {3, 3, 3};
    g.voxel_size = 0.01;
    g.origin = {0, 0, 0};
    g.trunc = 0.05;
    g.values.assign(27, 0.02f);
    g.at(1, 1, 1) = 0.01f;
    g.at(2, 1, 1) = 0.03f;
    const Vec3 midpoint{0.015, 0.01, 0.01};
    CHECK(sdf_query(g, midpoint) == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("sdf_query is 1-Lipschitz inside primitive grids") {
    const std::vector<Primitive> shapes = {
        make_box({0.04, 0.03, 0.02}, {Rotation::from_axis_angle({1, 1, 0}, 0.4), {0, 0, 0}}),
        make_sphere(0.03, {0.05, 0.02, 0.01}),
        make_cylinder(0.02, 0.04, {Rotation::from_axis_angle({1, 0, 0}, 0.3), {-0.04, 0.0, 0.02}}),
    };
    const VoxelGrid g = grid_from_primitives(shapes, {40, 40, 40}, 0.005, {-0.1, -0.1, -0.1});
    for (int i = 0; i < 5000; ++i) {
        const Vec3 a{uniform(-0.09, 0.09), uniform(-0.09, 0.09), uniform(-0.09, 0.09)};
        const Vec3 b{uniform(-0.09, 0.09), uniform(-0.09, 0.09), uniform(-0.09, 0.09)};
        const double lhs = std::abs(sdf_query(g, a) - sdf_query(g, b));
        CHECK(lhs <= (a - b).norm() * (1.0 + 1e-6) + 1e-9);
    }
}

TEST_CASE("rotate_grid by identity is bit-identical") {
    const VoxelGrid g = sphere_grid();
    const VoxelGrid r = rotate_grid(g, Rotation::identity());
    REQUIRE(r.values.size() == g.values.size());
    for (size_t i = 0; i < g.values.size(); ++i) CHECK(r.values[i] == g.values[i]);
}

TEST_CASE("rotate_grid of a box by 90 degrees matches the rotated box") {
    const Vec3 origin{-0.0775, -0.0775, -0.0775};
    const GridDims dims{32, 32, 32};
    const Primitive box = make_box({0.03, 0.015, 0.02}, {Rotation::identity(), {0, 0, 0}});
    const VoxelGrid g = grid_from_primitives({box}, dims, 0.005, origin);
    const Rotation quarter = Rotation::from_axis_angle({0, 0, 1}, M_PI / 2);
    const VoxelGrid rotated = rotate_grid(g, quarter);
    const Primitive expected = make_box({0.03, 0.015, 0.02}, {quarter, {0, 0, 0}});
    const VoxelGrid direct = grid_from_primitives({expected}, dims, 0.005, origin);
    for (size_t i = 0; i < rotated.values.size(); ++i) {
        CHECK(std::abs(rotated.values[i] - direct.values[i]) <= 0.005f);
    }
}

TEST_CASE("rotate_grid round trip stays within two voxels") {
    const VoxelGrid g = sphere_grid();
    const Rotation r = Rotation::from_axis_angle(Vec3{1, 2, 0.5}.normalized(), 0.8);
    const VoxelGrid round = rotate_grid(rotate_grid(g, r), r.inverse());
    for (size_t i = 0; i < g.values.size(); ++i) {
        CHECK(std::abs(round.values[i] - g.values[i]) <= 2 * g.voxel_size);
    }
}

TEST_CASE("rotate_grid conserves interior volume of convex solids") {
    const Vec3 origin{-0.0775, -0.0775, -0.0775};
    const VoxelGrid g = grid_from_primitives(
        {make_box({0.025, 0.02, 0.03}, {Rotation::identity(), {0, 0, 0}})}, {32, 32, 32}, 0.005,
        origin);
    const double volume = interior_volume(g);
    for (int i = 0; i < 10; ++i) {
        const Rotation r = Rotation{uniform(-1, 1), uniform(-1, 1), uniform(-1, 1),
                                    uniform(-1, 1)}.canonicalized();
        const double rotated = interior_volume(rotate_grid(g, r));
        CHECK(std::abs(rotated - volume) / volume <= 0.10);
    }
}

TEST_CASE("shell_complete builds a constant-thickness slab from a flat wall") {
    Camera cam;
    cam.intr = Intrinsics{32, 32, 16, 16, 32, 32};
    DepthImage entry(32, 32);
    for (float& d : entry.depth) d = 0.5f;
    const double thickness = 0.03;
    const VoxelGrid g = shell_complete(entry, cam, thickness, {48, 48, 48}, 0.005);
    // Along the optical axis the interior must span ~the requested thickness.
    int interior = 0;
    for (double z = 0.46; z <= 0.56; z += 0.001) {
        if (sdf_query(g, {0, 0, z}) < 0.0) ++interior;
    }
    CHECK(interior * 0.001 == doctest::Approx(thickness).epsilon(0.35));
    // Observed free space in front of the wall stays non-interior.
    CHECK(sdf_query(g, {0, 0, 0.47}) >= 0.0);
}

TEST_CASE("shell_complete of a cube face overlaps the true cube") {
    const Primitive cube = make_box({0.03, 0.03, 0.03}, {Rotation::identity(), {0, 0, 0}});
    const Vec3 origin{-0.1175, -0.1175, -0.1175};
    const VoxelGrid gt = grid_from_primitives({cube}, {48, 48, 48}, 0.005, origin);
    const Camera cam = camera_looking_along({0, 0, -1}, {0, 0, 0}, 0.4,
                                            Intrinsics{64, 64, 32, 32, 64, 64});
    const DepthImage entry = render_depth(gt, cam);
    REQUIRE(entry.valid_count() > 0);
    const VoxelGrid completed = shell_complete(entry, cam, 0.06, {48, 48, 48}, 0.005);

    int both = 0, either = 0;
    for (int z = 0; z < gt.dims.nz; ++z) {
        for (int y = 0; y < gt.dims.ny; ++y) {
            for (int x = 0; x < gt.dims.nx; ++x) {
                const Vec3 p = gt.voxel_center(x, y, z);
                const bool in_gt = gt.at(x, y, z) < 0.0f;
                const bool in_completed = sdf_query(completed, p) < 0.0;
                both += in_gt && in_completed;
                either += in_gt || in_completed;
            }
        }
    }
    REQUIRE(either > 0);
    CHECK(static_cast<double>(both) / either >= 0.7);
}

TEST_CASE("shell_complete rejects an all-invalid depth image") {
    Camera cam;
    DepthImage entry(16, 16);
    CHECK_THROWS_AS(shell_complete(entry, cam, 0.03, {16, 16, 16}, 0.005), EmptyDepthImage);
}

TEST_CASE("shell_complete never marks observed free space interior") {
    Camera cam;
    cam.intr = Intrinsics{24, 24, 12, 12, 24, 24};
    DepthImage entry(24, 24);
    std::uniform_real_distribution<float> depth_dist(0.4f, 0.7f);
    for (float& d : entry.depth) d = depth_dist(rng);
    const VoxelGrid g = shell_complete(entry, cam, 0.05, {48, 48, 48}, 0.005);
    for (int z = 0; z < g.dims.nz; ++z) {
        for (int y = 0; y < g.dims.ny; ++y) {
            for (int x = 0; x < g.dims.nx; ++x) {
                if (g.at(x, y, z) >= 0.0f) continue;
                const Vec3 p = g.voxel_center(x, y, z);
                double u, v, r;
                REQUIRE(project_to_pixel(p, cam, u, v, r));
                const int ui = static_cast<int>(std::lround(u));
                const int vi = static_cast<int>(std::lround(v));
                REQUIRE(ui >= 0);
                REQUIRE(vi >= 0);
                REQUIRE(ui < entry.width);
                REQUIRE(vi < entry.height);
                // Interior voxels must lie at or behind the entry surface.
                CHECK(r >= entry.at(ui, vi) - 1e-6);
            }
        }
    }
}

TEST_CASE("extract_surface_samples on a sphere lies at the radius") {
    const double radius = 0.05;
    const VoxelGrid g = sphere_grid(radius);
    const SurfaceSamples samples = extract_surface_samples(g, 200);
    REQUIRE(!samples.points.empty());
    CHECK(samples.points.size() <= 200);
    for (const Vec3& p : samples.points) {
        CHECK(std::abs(p.norm() - radius) <= g.voxel_size);
    }
}

TEST_CASE("extract_surface_samples rejects uniform grids") {
    VoxelGrid g;
    g.dims = {8, 8, 8};
    g.voxel_size = 0.01;
    g.trunc = 0.05;
    g.values.assign(g.dims.count(), 0.05f);
    CHECK_THROWS_AS(extract_surface_samples(g, 100), NoSurface);
}

TEST_CASE("extract_surface_samples of a box stays near its faces") {
    const Primitive box = make_box({0.03, 0.02, 0.025}, {Rotation::identity(), {0, 0, 0}});
    const VoxelGrid g = grid_from_primitives({box}, {32, 32, 32}, 0.005,
                                             {-0.0775, -0.0775, -0.0775});
    const SurfaceSamples samples = extract_surface_samples(g, 150);
    CHECK(samples.points.size() <= 150);
    for (const Vec3& p : samples.points) {
        CHECK(std::abs(primitive_sdf(box, p)) <= g.voxel_size);
    }
}

TEST_CASE("grid file round trip is bit exact") {
    const VoxelGrid g = sphere_grid();
    const std::string path = "test_grid_roundtrip.tsdf";
    save_grid(g, path);
    const VoxelGrid loaded = load_grid(path);
    std::remove(path.c_str());
    CHECK(loaded.dims.nx == g.dims.nx);
    CHECK(loaded.dims.ny == g.dims.ny);
    CHECK(loaded.dims.nz == g.dims.nz);
    CHECK(loaded.voxel_size == g.voxel_size);
    CHECK(loaded.trunc == g.trunc);
    CHECK((loaded.origin - g.origin).norm() == 0.0);
    REQUIRE(loaded.values.size() == g.values.size());
    for (size_t i = 0; i < g.values.size(); ++i) CHECK(loaded.values[i] == g.values[i]);
}

TEST_CASE("grid file header is the documented ASCII line") {
    const VoxelGrid g = sphere_grid(0.02, 4, 0.01);
    const std::string path = "test_grid_header.tsdf";
    save_grid(g, path);
    FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    char magic[6] = {};
    REQUIRE(std::fread(magic, 1, 5, f) == 5);
    std::fclose(f);
    std::remove(path.c_str());
    CHECK(std::string(magic) == "TSDF1");
}

}  // TEST_SUITE
