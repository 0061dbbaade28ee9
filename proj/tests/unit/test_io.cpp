#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "pickplace/io.hpp"

using namespace pickplace;

TEST_SUITE("io") {

TEST_CASE("transforms serialize as q/t documents") {
    RigidTransform t;
    t.rotation = Rotation::from_axis_angle({0, 0, 1}, 0.5);
    t.translation = {0.1, -0.2, 0.3};
    const json j = to_json(t);
    REQUIRE(j.contains("q"));
    REQUIRE(j.contains("t"));
    CHECK(j["q"].size() == 4);
    CHECK(j["t"].size() == 3);
    const RigidTransform back = transform_from_json(j);
    CHECK(geodesic_angle(back.rotation, t.rotation) < 1e-12);
    CHECK((back.translation - t.translation).norm() < 1e-12);
}

TEST_CASE("primitives round trip through JSON") {
    const Primitive prims[] = {
        make_box({0.02, 0.03, 0.04}, {Rotation::from_axis_angle({1, 0, 0}, 0.3), {0.1, 0.2, 0.3}}),
        make_sphere(0.05, {1, 2, 3}),
        make_cylinder(0.02, 0.05, {Rotation::from_axis_angle({0, 1, 0}, 1.0), {0, 0, 1}}),
        make_lshape(0.08, 0.07, 0.03, 0.04, {Rotation::identity(), {0.5, 0, 0}}),
    };
    for (const Primitive& p : prims) {
        const Primitive back = primitive_from_json(to_json(p));
        CHECK(to_json(back).dump() == to_json(p).dump());
        // Same geometry: SDF agrees at probe points.
        for (const Vec3& probe : {Vec3{0, 0, 0}, Vec3{0.1, 0.2, 0.25}, Vec3{1, 2, 3.04}}) {
            CHECK(primitive_sdf(back, probe) == doctest::Approx(primitive_sdf(p, probe)));
        }
    }
}

TEST_CASE("grasp sets serialize with pose, width, quality") {
    Grasp g;
    g.pose.rotation = Rotation::from_axis_angle({0, 1, 0}, 0.7);
    g.pose.translation = {0.2, 0.1, 0.4};
    g.width = 0.035;
    g.quality = 0.91;
    const json arr = grasps_to_json({g});
    REQUIRE(arr.size() == 1);
    CHECK(arr[0].contains("pose"));
    CHECK(arr[0]["width"] == 0.035);
    const Grasp back = grasp_from_json(arr[0]);
    CHECK(back.quality == doctest::Approx(0.91));
}

TEST_CASE("plan results carry the documented fields") {
    PlanResult plan;
    plan.view_index = 3;
    plan.u = 11;
    plan.v = 22;
    plan.score = 1.0;
    const json j = to_json(plan);
    CHECK(j.contains("pick"));
    CHECK(j.contains("object_transform"));
    CHECK(j.contains("insert_dir"));
    CHECK(j["view_index"] == 3);
    CHECK(j["pixel"][0] == 11);
    CHECK(j["pixel"][1] == 22);
}

TEST_CASE("metrics CSV uses the documented columns") {
    Metrics metrics;
    metrics.episodes = 2;
    metrics.successes = 1;
    metrics.rows.push_back({0, 100, 1, FailureCause::none, 12.0});
    metrics.rows.push_back({1, 101, 0, FailureCause::collision, 15.0});
    const std::string csv = metrics_csv(metrics);
    CHECK(csv.rfind("episode,seed,reward,failure_cause,plan_ms\n", 0) == 0);
    CHECK(csv.find("0,100,1,none,") != std::string::npos);
    CHECK(csv.find("1,101,0,collision,") != std::string::npos);
}

TEST_CASE("depth images round trip through 16-bit PGM in millimeters") {
    DepthImage img(8, 4);
    img.at(0, 0) = 0.5f;
    img.at(3, 2) = 1.234f;
    img.at(7, 3) = kDepthMiss;
    const std::string path = "test_depth.pgm";
    save_pgm16(img, path);
    const DepthImage back = load_pgm16(path);
    std::remove(path.c_str());
    CHECK(back.width == 8);
    CHECK(back.height == 4);
    CHECK(back.at(0, 0) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(back.at(3, 2) == doctest::Approx(1.234).epsilon(1e-3));
    CHECK_FALSE(back.valid(7, 3));
}

TEST_CASE("affordance maps export as 8-bit PGM") {
    AffordanceMap map(4, 4);
    map.score(1, 1) = 1.0f;
    const std::string path = "test_map.pgm";
    save_pgm8(map, path);
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string magic;
    int w, h, maxval;
    in >> magic >> w >> h >> maxval;
    in.get();
    CHECK(magic == "P5");
    CHECK(w == 4);
    CHECK(h == 4);
    CHECK(maxval == 255);
    std::vector<unsigned char> pixels(16);
    in.read(reinterpret_cast<char*>(pixels.data()), 16);
    CHECK(pixels[1 * 4 + 1] == 255);
    CHECK(pixels[0] == 0);
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("overlay PNG writes a valid signature and chunks") {
    DepthImage depth(6, 6);
    for (float& d : depth.depth) d = 0.4f;
    AffordanceMap map(6, 6);
    map.score(2, 3) = 1.0f;
    const std::string path = "test_overlay.png";
    save_overlay_png(depth, map, path);
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    unsigned char sig[8];
    in.read(reinterpret_cast<char*>(sig), 8);
    const unsigned char expected[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    for (int i = 0; i < 8; ++i) CHECK(sig[i] == expected[i]);
    in.close();
    std::remove(path.c_str());
}

}  // TEST_SUITE
