#pragma once
//
// Pinhole camera and depth image types shared by the renderer, the shell
// completion, and the affordance pipeline.
//
// Camera convention: +Z forward, +X right, +Y down in image coordinates
// (so world-up projects toward smaller v). No distortion. Depth values are
// metric distances along the ray, not z-depth; misses carry an infinity
// sentinel so they can never be confused with contact at the camera.

#include <limits>
#include <vector>

#include "pickplace/geometry.hpp"

namespace pickplace {

inline constexpr float kDepthMiss = std::numeric_limits<float>::infinity();

struct Intrinsics {
    double fx = 64.0;
    double fy = 64.0;
    double cx = 32.0;
    double cy = 32.0;
    int width = 64;
    int height = 64;
};

struct Camera {
    Intrinsics intr;
    RigidTransform pose;  // camera-to-world

    Vec3 position() const { return pose.translation; }

    /// Unit ray direction in world coordinates through pixel (u, v).
    Vec3 ray_direction(double u, double v) const {
        const Vec3 dir_cam{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0};
        return pose.rotation.rotate(dir_cam.normalized());
    }
};

struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<float> depth;  // row-major, kDepthMiss where no surface was hit

    DepthImage() = default;
    DepthImage(int w, int h) : width(w), height(h), depth(static_cast<size_t>(w) * h, kDepthMiss) {}

    float at(int u, int v) const { return depth[static_cast<size_t>(v) * width + u]; }
    float& at(int u, int v) { return depth[static_cast<size_t>(v) * width + u]; }

    bool valid(int u, int v) const { return std::isfinite(at(u, v)); }

    int valid_count() const {
        int n = 0;
        for (float d : depth) n += std::isfinite(d) ? 1 : 0;
        return n;
    }
};

/// Camera placed at target - distance * d, optical axis along d, image
/// up-vector derived from the gripper camera-up convention so views and
/// insertion frames agree.
Camera camera_looking_along(const Vec3& d, const Vec3& target, double distance,
                            const Intrinsics& intr);

/// Back-projects pixel (u, v) at ray depth `depth` to a world point.
/// Throws InvalidDepth when depth is not finite and positive.
Vec3 pixel_to_world(double u, double v, double depth, const Camera& cam);

/// Forward projection. Returns false when the point is behind the camera;
/// otherwise fills pixel coordinates and the ray depth that pixel_to_world
/// inverts exactly.
bool project_to_pixel(const Vec3& p, const Camera& cam, double& u, double& v, double& depth);

}  // namespace pickplace
