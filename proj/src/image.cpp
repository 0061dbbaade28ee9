#include "pickplace/image.hpp"

#include "pickplace/errors.hpp"

namespace pickplace {

Camera camera_looking_along(const Vec3& d, const Vec3& target, double distance,
                            const Intrinsics& intr) {
    const Vec3 dir = d.normalized();
    const Rotation grip = insertion_frame(dir);
    // Camera +Z = gripper palm (= d), image -Y (up) = gripper camera-up.
    const Vec3 cam_z = grip.col_x();
    const Vec3 cam_y = -grip.col_z();
    const Vec3 cam_x = cam_y.cross(cam_z);
    Camera cam;
    cam.intr = intr;
    cam.pose.rotation = Rotation::from_columns(cam_x, cam_y, cam_z);
    cam.pose.translation = target - dir * distance;
    return cam;
}

Vec3 pixel_to_world(double u, double v, double depth, const Camera& cam) {
    if (!std::isfinite(depth) || depth <= 0.0) {
        throw InvalidDepth("pixel_to_world: depth must be finite and positive");
    }
    return cam.position() + cam.ray_direction(u, v) * depth;
}

bool project_to_pixel(const Vec3& p, const Camera& cam, double& u, double& v, double& depth) {
    const Vec3 local = invert(cam.pose).apply(p);
    if (local.z <= 0.0) return false;
    u = cam.intr.fx * local.x / local.z + cam.intr.cx;
    v = cam.intr.fy * local.y / local.z + cam.intr.cy;
    depth = local.norm();
    return true;
}

}  // namespace pickplace
