#include "pickplace/render.hpp"

#include <cassert>

#include "pickplace/parallel.hpp"

namespace pickplace {

DepthImage render_depth(const VoxelGrid& scene, const Camera& cam, const RenderParams& params) {
    assert(params.max_range > 0.0);
    DepthImage img(cam.intr.width, cam.intr.height);
    const Vec3 origin = cam.position();
    parallel_for(cam.intr.height, [&](int64_t row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < cam.intr.width; ++u) {
            const Vec3 dir = cam.ray_direction(u, v);
            double t = 0.0;
            for (int it = 0; it < params.max_iterations && t <= params.max_range; ++it) {
                const double d = sdf_query(scene, origin + dir * t);
                if (d < params.surface_eps) {
                    // Newton polish onto the zero level; the clamped field
                    // never overshoots, so a few fixed steps suffice.
                    for (int k = 0; k < 3; ++k) {
                        t += sdf_query(scene, origin + dir * t);
                    }
                    img.at(u, v) = static_cast<float>(std::max(t, 0.0));
                    break;
                }
                t += std::max(d, params.min_step);
            }
        }
    });
    return img;
}

}  // namespace pickplace
