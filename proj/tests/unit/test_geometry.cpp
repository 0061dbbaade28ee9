#include <doctest.h>

#include <random>

#include "pickplace/errors.hpp"
#include "pickplace/geometry.hpp"

using namespace pickplace;

namespace {

std::mt19937_64 rng(12345);

Rotation random_rotation() {
    std::normal_distribution<double> n(0.0, 1.0);
    return Rotation{n(rng), n(rng), n(rng), n(rng)}.canonicalized();
}

Vec3 random_point(double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng), u(rng)};
}

Vec3 random_direction() { return random_point().normalized(); }

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("compose identity and inverse") {
    const RigidTransform identity;
    const RigidTransform both = compose(identity, identity);
    CHECK(both.translation.norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(geodesic_angle(both.rotation, Rotation::identity()) < 1e-12);

    for (int i = 0; i < 100; ++i) {
        const RigidTransform t{random_rotation(), random_point()};
        const RigidTransform round = compose(t, invert(t));
        CHECK(round.translation.norm() < 1e-9);
        CHECK(geodesic_angle(round.rotation, Rotation::identity()) < 1e-9);
    }
}

TEST_CASE("compose agrees with direct point application") {
    for (int i = 0; i < 200; ++i) {
        const RigidTransform a{random_rotation(), random_point()};
        const RigidTransform b{random_rotation(), random_point()};
        const Vec3 p = random_point();
        const Vec3 via_compose = compose(a, b).apply(p);
        const Vec3 direct = a.apply(b.apply(p));
        CHECK((via_compose - direct).norm() < 1e-12);
    }
}

TEST_CASE("inverse law invert(AB) = invert(B) invert(A)") {
    for (int i = 0; i < 100; ++i) {
        const RigidTransform a{random_rotation(), random_point()};
        const RigidTransform b{random_rotation(), random_point()};
        const RigidTransform lhs = invert(compose(a, b));
        const RigidTransform rhs = compose(invert(b), invert(a));
        CHECK((lhs.translation - rhs.translation).norm() < 1e-9);
        CHECK(geodesic_angle(lhs.rotation, rhs.rotation) < 1e-9);
    }
}

TEST_CASE("insertion_frame maps palm onto axis directions") {
    const Rotation rx = insertion_frame({1, 0, 0});
    CHECK((rx.col_x() - Vec3{1, 0, 0}).norm() < 1e-12);
    CHECK((rx.col_z() - Vec3{0, 0, 1}).norm() < 1e-12);

    const Rotation ry = insertion_frame({0, 1, 0});
    CHECK((ry.col_x() - Vec3{0, 1, 0}).norm() < 1e-12);
    CHECK((ry.col_z() - Vec3{0, 0, 1}).norm() < 1e-12);
}

TEST_CASE("insertion_frame matches a Gram-Schmidt oracle") {
    const Vec3 d = Vec3{1, 1, -1}.normalized();
    const Rotation frame = insertion_frame(d);
    // Independent construction: palm = d, camera-up = normalized projection
    // of world +Z orthogonal to d.
    const Vec3 palm = d;
    const Vec3 up = (Vec3{0, 0, 1} - palm * palm.z).normalized();
    CHECK((frame.col_x() - palm).norm() < 1e-9);
    CHECK((frame.col_z() - up).norm() < 1e-9);
    CHECK(frame.col_x().dot(frame.col_z()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("insertion_frame output is orthonormal with det +1") {
    for (int i = 0; i < 500; ++i) {
        const Rotation frame = insertion_frame(random_direction());
        const Vec3 x = frame.col_x(), y = frame.col_y(), z = frame.col_z();
        CHECK(std::abs(x.norm() - 1.0) < 1e-9);
        CHECK(std::abs(y.norm() - 1.0) < 1e-9);
        CHECK(std::abs(z.norm() - 1.0) < 1e-9);
        CHECK(std::abs(x.dot(y)) < 1e-9);
        CHECK(std::abs(x.dot(z)) < 1e-9);
        CHECK(std::abs(y.dot(z)) < 1e-9);
        CHECK(x.cross(y).dot(z) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("insertion_frame tie-break for vertical directions") {
    for (const double sign : {-1.0, 1.0}) {
        const Rotation frame = insertion_frame({0, 0, sign});
        CHECK((frame.col_x() - Vec3{0, 0, sign}).norm() < 1e-12);
        // Camera-up falls back to world +X.
        CHECK((frame.col_z() - Vec3{1, 0, 0}).norm() < 1e-9);
    }
}

TEST_CASE("place_rotation identities") {
    const Rotation identity = Rotation::identity();
    CHECK(geodesic_angle(place_rotation(identity, identity), identity) < 1e-12);
    for (int i = 0; i < 50; ++i) {
        const Rotation r = random_rotation();
        CHECK(geodesic_angle(place_rotation(r, r), identity) < 1e-9);
    }
}

TEST_CASE("place_rotation satisfies R_pick * R_object = R_insert") {
    for (int i = 0; i < 500; ++i) {
        const Rotation pick = random_rotation();
        const Rotation insert = random_rotation();
        const Rotation object = place_rotation(pick, insert);
        CHECK(geodesic_angle(pick * object, insert) < 1e-9);
    }
}

TEST_CASE("pick_rotation identities and reduction") {
    const Rotation identity = Rotation::identity();
    for (int i = 0; i < 50; ++i) {
        const Rotation insert = random_rotation();
        CHECK(geodesic_angle(pick_rotation(identity, insert), insert) < 1e-9);
        const Rotation object = random_rotation();
        CHECK(geodesic_angle(pick_rotation(object, identity), object.inverse()) < 1e-9);
    }
}

TEST_CASE("place/pick rotation round trip on 10^4 random pairs") {
    for (int i = 0; i < 10000; ++i) {
        const Rotation object = random_rotation();
        const Rotation insert = random_rotation();
        const Rotation round = place_rotation(pick_rotation(object, insert), insert);
        CHECK(geodesic_angle(round, object) < 1e-9);
    }
}

TEST_CASE("quaternion norm preserved through long composition chains") {
    Rotation acc = Rotation::identity();
    for (int i = 0; i < 1000; ++i) {
        acc = acc * random_rotation();
        CHECK(std::abs(acc.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("sample_view_directions basic contracts") {
    const auto d16 = sample_view_directions(16, -80 * M_PI / 180, -20 * M_PI / 180);
    CHECK(d16.size() == 16);
    for (const Vec3& d : d16) {
        CHECK(std::abs(d.norm() - 1.0) < 1e-9);
        CHECK(d.z < 0.0);
    }
    // Pairwise distinct.
    for (size_t i = 0; i < d16.size(); ++i) {
        for (size_t j = i + 1; j < d16.size(); ++j) {
            CHECK((d16[i] - d16[j]).norm() > 1e-6);
        }
    }
    CHECK(sample_view_directions(24, -80 * M_PI / 180, -20 * M_PI / 180).size() == 24);
}

TEST_CASE("sample_view_directions degenerate band gives top-down") {
    const auto dirs = sample_view_directions(1, -M_PI / 2, -M_PI / 2);
    REQUIRE(dirs.size() == 1);
    CHECK((dirs[0] - Vec3{0, 0, -1}).norm() < 1e-9);
}

TEST_CASE("sample_view_directions is deterministic and rejects empty bands") {
    const auto a = sample_view_directions(16, -1.2, -0.4);
    const auto b = sample_view_directions(16, -1.2, -0.4);
    for (size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() == 0.0);
    CHECK_THROWS_AS(sample_view_directions(4, -0.2, -0.4), InvalidBand);
}

TEST_CASE("sample_object_rotations spacing and identities") {
    const auto r72 = sample_object_rotations(72, {0, 0, 1});
    CHECK(r72.size() == 72);
    // Uniform spacing 2*pi/72 = 5 degrees between consecutive rotations.
    for (size_t i = 1; i < r72.size(); ++i) {
        CHECK(geodesic_angle(r72[i - 1], r72[i]) ==
              doctest::Approx(2 * M_PI / 72).epsilon(1e-9));
    }
    const auto r1 = sample_object_rotations(1, {0, 1, 0});
    REQUIRE(r1.size() == 1);
    CHECK(geodesic_angle(r1[0], Rotation::identity()) < 1e-12);

    const auto r4 = sample_object_rotations(4, {0, 0, 1});
    const Vec3 x{1, 0, 0};
    const Vec3 expected[4] = {{1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}};
    for (int i = 0; i < 4; ++i) {
        CHECK((r4[static_cast<size_t>(i)].rotate(x) - expected[i]).norm() < 1e-9);
    }
}

TEST_CASE("Rotation::between maps from onto to") {
    for (int i = 0; i < 200; ++i) {
        const Vec3 a = random_direction();
        const Vec3 b = random_direction();
        CHECK((Rotation::between(a, b).rotate(a) - b).norm() < 1e-9);
    }
    // Anti-parallel tie-break still works.
    const Vec3 d{0, 0, 1};
    CHECK((Rotation::between(d, -d).rotate(d) + d).norm() < 1e-9);
}

}  // TEST_SUITE
