#pragma once
//
// Perspective depth rendering of TSDF scenes by sphere tracing: each ray
// advances by the queried signed distance (never overshooting the clamped
// field), so reported hits always lie within surface_eps of the zero set.

#include "pickplace/image.hpp"
#include "pickplace/voxel.hpp"

namespace pickplace {

struct RenderParams {
    double max_range = 2.5;
    double surface_eps = 1e-3;
    double min_step = 1e-3;
    int max_iterations = 256;
};

/// Depth along each pixel ray, kDepthMiss where no surface is reached.
/// Pure and deterministic; rows are traced in parallel.
DepthImage render_depth(const VoxelGrid& scene, const Camera& cam,
                        const RenderParams& params = {});

}  // namespace pickplace
