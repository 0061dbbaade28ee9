#include "pickplace/voxel.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "pickplace/errors.hpp"

namespace pickplace {

Primitive make_box(const Vec3& half, const RigidTransform& pose) {
    Primitive p;
    p.kind = PrimitiveKind::box;
    p.half = half;
    p.pose = pose;
    return p;
}

Primitive make_sphere(double radius, const Vec3& center) {
    Primitive p;
    p.kind = PrimitiveKind::sphere;
    p.radius = radius;
    p.pose.translation = center;
    return p;
}

Primitive make_cylinder(double radius, double half_height, const RigidTransform& pose) {
    Primitive p;
    p.kind = PrimitiveKind::cylinder;
    p.radius = radius;
    p.half_height = half_height;
    p.pose = pose;
    return p;
}

Primitive make_lshape(double leg_x, double leg_y, double thickness, double height,
                      const RigidTransform& pose) {
    Primitive p;
    p.kind = PrimitiveKind::lshape;
    p.leg_x = leg_x;
    p.leg_y = leg_y;
    p.thickness = thickness;
    p.height = height;
    p.pose = pose;
    return p;
}

namespace {

double box_sdf(const Vec3& p, const Vec3& half) {
    const Vec3 q{std::abs(p.x) - half.x, std::abs(p.y) - half.y, std::abs(p.z) - half.z};
    const Vec3 outside{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    const double inside = std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
    return outside.norm() + inside;
}

double cylinder_sdf(const Vec3& p, double radius, double half_height) {
    const double dr = std::sqrt(p.x * p.x + p.y * p.y) - radius;
    const double dz = std::abs(p.z) - half_height;
    const double outside =
        std::sqrt(std::max(dr, 0.0) * std::max(dr, 0.0) + std::max(dz, 0.0) * std::max(dz, 0.0));
    return outside + std::min(std::max(dr, dz), 0.0);
}

// The L-shape in its corner frame is the union of two axis-aligned boxes.
void lshape_boxes(const Primitive& prim, Vec3& ca, Vec3& ha, Vec3& cb, Vec3& hb) {
    const Vec3 c0{prim.leg_x * 0.5, prim.leg_y * 0.5, prim.height * 0.5};
    ha = {prim.thickness * 0.5, prim.leg_y * 0.5, prim.height * 0.5};
    ca = Vec3{prim.thickness * 0.5, prim.leg_y * 0.5, prim.height * 0.5} - c0;
    hb = {prim.leg_x * 0.5, prim.thickness * 0.5, prim.height * 0.5};
    cb = Vec3{prim.leg_x * 0.5, prim.thickness * 0.5, prim.height * 0.5} - c0;
}

}  // namespace

double primitive_sdf(const Primitive& prim, const Vec3& p) {
    const Vec3 q = invert(prim.pose).apply(p);
    switch (prim.kind) {
        case PrimitiveKind::box:
            return box_sdf(q, prim.half);
        case PrimitiveKind::sphere:
            return q.norm() - prim.radius;
        case PrimitiveKind::cylinder:
            return cylinder_sdf(q, prim.radius, prim.half_height);
        case PrimitiveKind::lshape: {
            Vec3 ca, ha, cb, hb;
            lshape_boxes(prim, ca, ha, cb, hb);
            return std::min(box_sdf(q - ca, ha), box_sdf(q - cb, hb));
        }
    }
    return 0.0;
}

Aabb primitive_aabb(const Primitive& prim) {
    Vec3 half;
    switch (prim.kind) {
        case PrimitiveKind::box:
            half = prim.half;
            break;
        case PrimitiveKind::sphere:
            half = {prim.radius, prim.radius, prim.radius};
            break;
        case PrimitiveKind::cylinder:
            half = {prim.radius, prim.radius, prim.half_height};
            break;
        case PrimitiveKind::lshape:
            half = {prim.leg_x * 0.5, prim.leg_y * 0.5, prim.height * 0.5};
            break;
    }
    Aabb box{{1e30, 1e30, 1e30}, {-1e30, -1e30, -1e30}};
    for (int i = 0; i < 8; ++i) {
        const Vec3 corner{(i & 1) ? half.x : -half.x, (i & 2) ? half.y : -half.y,
                          (i & 4) ? half.z : -half.z};
        const Vec3 w = prim.pose.apply(corner);
        box.lo = {std::min(box.lo.x, w.x), std::min(box.lo.y, w.y), std::min(box.lo.z, w.z)};
        box.hi = {std::max(box.hi.x, w.x), std::max(box.hi.y, w.y), std::max(box.hi.z, w.z)};
    }
    return box;
}

VoxelGrid grid_from_primitives(const std::vector<Primitive>& shapes, const GridDims& dims,
                               double voxel_size, const Vec3& origin) {
    assert(!shapes.empty());
    VoxelGrid g;
    g.dims = dims;
    g.voxel_size = voxel_size;
    g.origin = origin;
    // Values are stored as floats; keep trunc exactly representable so the
    // clamp band is closed under both precisions.
    g.trunc = static_cast<float>(kTruncVoxels * voxel_size);
    g.values.assign(dims.count(), static_cast<float>(g.trunc));

    for (const Primitive& prim : shapes) {
        // Restrict the update to the shape's bounding box plus truncation;
        // outside it the shape cannot beat the +trunc initialization.
        Aabb box = primitive_aabb(prim);
        box.lo = box.lo - Vec3{g.trunc, g.trunc, g.trunc};
        box.hi = box.hi + Vec3{g.trunc, g.trunc, g.trunc};
        const int x0 = std::max(0, static_cast<int>(std::floor((box.lo.x - origin.x) / voxel_size)));
        const int y0 = std::max(0, static_cast<int>(std::floor((box.lo.y - origin.y) / voxel_size)));
        const int z0 = std::max(0, static_cast<int>(std::floor((box.lo.z - origin.z) / voxel_size)));
        const int x1 = std::min(dims.nx - 1, static_cast<int>(std::ceil((box.hi.x - origin.x) / voxel_size)));
        const int y1 = std::min(dims.ny - 1, static_cast<int>(std::ceil((box.hi.y - origin.y) / voxel_size)));
        const int z1 = std::min(dims.nz - 1, static_cast<int>(std::ceil((box.hi.z - origin.z) / voxel_size)));
        for (int z = z0; z <= z1; ++z) {
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const double d = primitive_sdf(prim, g.voxel_center(x, y, z));
                    const double clamped = std::clamp(d, -g.trunc, g.trunc);
                    float& cell = g.at(x, y, z);
                    cell = std::min(cell, static_cast<float>(clamped));
                }
            }
        }
    }
    return g;
}

namespace {
// Snap to the lattice so exact-center queries return stored values bitwise.
inline double snap_coord(double x) {
    const double r = std::round(x);
    return std::abs(x - r) < 1e-9 ? r : x;
}
}  // namespace

double sdf_query(const VoxelGrid& g, const Vec3& p) {
    const double gx = snap_coord((p.x - g.origin.x) / g.voxel_size);
    const double gy = snap_coord((p.y - g.origin.y) / g.voxel_size);
    const double gz = snap_coord((p.z - g.origin.z) / g.voxel_size);
    if (gx < 0.0 || gy < 0.0 || gz < 0.0 || gx > g.dims.nx - 1 || gy > g.dims.ny - 1 ||
        gz > g.dims.nz - 1) {
        return g.trunc;
    }
    const int x0 = std::min(static_cast<int>(gx), std::max(0, g.dims.nx - 2));
    const int y0 = std::min(static_cast<int>(gy), std::max(0, g.dims.ny - 2));
    const int z0 = std::min(static_cast<int>(gz), std::max(0, g.dims.nz - 2));
    const double fx = gx - x0;
    const double fy = gy - y0;
    const double fz = gz - z0;
    const int x1 = std::min(x0 + 1, g.dims.nx - 1);
    const int y1 = std::min(y0 + 1, g.dims.ny - 1);
    const int z1 = std::min(z0 + 1, g.dims.nz - 1);

    const double c000 = g.at(x0, y0, z0), c100 = g.at(x1, y0, z0);
    const double c010 = g.at(x0, y1, z0), c110 = g.at(x1, y1, z0);
    const double c001 = g.at(x0, y0, z1), c101 = g.at(x1, y0, z1);
    const double c011 = g.at(x0, y1, z1), c111 = g.at(x1, y1, z1);

    const double c00 = c000 + (c100 - c000) * fx;
    const double c01 = c001 + (c101 - c001) * fx;
    const double c10 = c010 + (c110 - c010) * fx;
    const double c11 = c011 + (c111 - c011) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    return c0 + (c1 - c0) * fz;
}

Vec3 sdf_gradient(const VoxelGrid& g, const Vec3& p) {
    const double h = 0.5 * g.voxel_size;
    return Vec3{sdf_query(g, p + Vec3{h, 0, 0}) - sdf_query(g, p - Vec3{h, 0, 0}),
                sdf_query(g, p + Vec3{0, h, 0}) - sdf_query(g, p - Vec3{0, h, 0}),
                sdf_query(g, p + Vec3{0, 0, h}) - sdf_query(g, p - Vec3{0, 0, h})} /
           (2.0 * h);
}

VoxelGrid rotate_grid(const VoxelGrid& g, const Rotation& r) {
    return rotate_resample_grid(g, r, g.dims, g.voxel_size);
}

VoxelGrid rotate_resample_grid(const VoxelGrid& g, const Rotation& r, const GridDims& dims,
                               double voxel_size) {
    VoxelGrid out;
    out.dims = dims;
    out.voxel_size = voxel_size;
    out.trunc = static_cast<float>(kTruncVoxels * voxel_size);
    const Vec3 c = g.grid_center();
    out.origin = c - Vec3{(dims.nx - 1) * 0.5 * voxel_size, (dims.ny - 1) * 0.5 * voxel_size,
                          (dims.nz - 1) * 0.5 * voxel_size};
    out.values.resize(dims.count());
    const Rotation r_inv = r.inverse();
    size_t i = 0;
    for (int z = 0; z < dims.nz; ++z) {
        for (int y = 0; y < dims.ny; ++y) {
            for (int x = 0; x < dims.nx; ++x, ++i) {
                const Vec3 p = out.voxel_center(x, y, z);
                const double v = sdf_query(g, r_inv.rotate(p - c) + c);
                out.values[i] = static_cast<float>(std::clamp(v, -out.trunc, out.trunc));
            }
        }
    }
    return out;
}

SurfaceSamples extract_surface_samples(const VoxelGrid& g, int max_points) {
    bool has_neg = false, has_pos = false;
    for (float v : g.values) {
        has_neg |= v < 0.0f;
        has_pos |= v >= 0.0f;
    }
    if (!has_neg || !has_pos) {
        throw NoSurface("extract_surface_samples: grid has uniform sign");
    }

    const Vec3 c = g.grid_center();
    std::vector<Vec3> candidates;
    for (int z = 0; z < g.dims.nz; ++z) {
        for (int y = 0; y < g.dims.ny; ++y) {
            for (int x = 0; x < g.dims.nx; ++x) {
                const double v = g.at(x, y, z);
                if (std::abs(v) >= g.voxel_size) continue;
                const Vec3 p = g.voxel_center(x, y, z);
                Vec3 grad = sdf_gradient(g, p);
                const double gn = grad.norm();
                if (gn < 1e-9) continue;
                const Vec3 projected = p - grad * (v / gn / gn * 1.0);
                if (std::abs(sdf_query(g, projected)) > g.voxel_size) continue;
                candidates.push_back(projected - c);
            }
        }
    }
    if (candidates.empty()) {
        throw NoSurface("extract_surface_samples: no zero crossing found");
    }

    SurfaceSamples out;
    if (static_cast<int>(candidates.size()) <= max_points) {
        out.points = std::move(candidates);
        return out;
    }
    // Deterministic uniform subsample in scan order.
    const double stride = static_cast<double>(candidates.size()) / max_points;
    out.points.reserve(static_cast<size_t>(max_points));
    for (int i = 0; i < max_points; ++i) {
        out.points.push_back(candidates[static_cast<size_t>(i * stride)]);
    }
    return out;
}

VoxelGrid shell_complete(const DepthImage& entry, const Camera& camera, double thickness,
                         const GridDims& dims, double voxel_size) {
    assert(thickness > 0.0);
    const Vec3 cam_pos = camera.position();
    Aabb box{{1e30, 1e30, 1e30}, {-1e30, -1e30, -1e30}};
    int valid = 0;
    for (int v = 0; v < entry.height; ++v) {
        for (int u = 0; u < entry.width; ++u) {
            const float d = entry.at(u, v);
            if (!std::isfinite(d)) continue;
            ++valid;
            const Vec3 dir = camera.ray_direction(u, v);
            for (const double t : {static_cast<double>(d), d + thickness}) {
                const Vec3 p = cam_pos + dir * t;
                box.lo = {std::min(box.lo.x, p.x), std::min(box.lo.y, p.y), std::min(box.lo.z, p.z)};
                box.hi = {std::max(box.hi.x, p.x), std::max(box.hi.y, p.y), std::max(box.hi.z, p.z)};
            }
        }
    }
    if (valid == 0) {
        throw EmptyDepthImage("shell_complete: depth image has no valid pixel");
    }

    VoxelGrid g;
    g.dims = dims;
    g.voxel_size = voxel_size;
    g.trunc = static_cast<float>(kTruncVoxels * voxel_size);
    g.origin = box.lo - Vec3{g.trunc, g.trunc, g.trunc};
    g.values.assign(dims.count(), static_cast<float>(g.trunc));

    for (int z = 0; z < dims.nz; ++z) {
        for (int y = 0; y < dims.ny; ++y) {
            for (int x = 0; x < dims.nx; ++x) {
                const Vec3 p = g.voxel_center(x, y, z);
                double u, v, r;
                if (!project_to_pixel(p, camera, u, v, r)) continue;
                const int ui = static_cast<int>(std::lround(u));
                const int vi = static_cast<int>(std::lround(v));
                if (ui < 0 || vi < 0 || ui >= entry.width || vi >= entry.height) continue;
                const float d = entry.at(ui, vi);
                if (!std::isfinite(d)) continue;
                // Signed distance along the ray to the nearer slab face.
                const double sdf = std::max(static_cast<double>(d) - r, r - (d + thickness));
                g.at(x, y, z) = static_cast<float>(std::clamp(sdf, -g.trunc, g.trunc));
            }
        }
    }
    return g;
}

double default_shell_thickness(const DepthImage& entry, const Camera& camera) {
    const RigidTransform world_to_cam = invert(camera.pose);
    double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
    int valid = 0;
    for (int v = 0; v < entry.height; ++v) {
        for (int u = 0; u < entry.width; ++u) {
            const float d = entry.at(u, v);
            if (!std::isfinite(d)) continue;
            ++valid;
            const Vec3 p = world_to_cam.apply(camera.position() + camera.ray_direction(u, v) * d);
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
    }
    if (valid == 0) {
        throw EmptyDepthImage("default_shell_thickness: depth image has no valid pixel");
    }
    const double extent = std::min(max_x - min_x, max_y - min_y);
    return std::clamp(extent, 0.01, 0.08);
}

Vec3 interior_centroid(const VoxelGrid& g) {
    Vec3 sum{0, 0, 0};
    size_t n = 0;
    for (int z = 0; z < g.dims.nz; ++z) {
        for (int y = 0; y < g.dims.ny; ++y) {
            for (int x = 0; x < g.dims.nx; ++x) {
                if (g.at(x, y, z) < 0.0f) {
                    sum += g.voxel_center(x, y, z);
                    ++n;
                }
            }
        }
    }
    if (n == 0) throw NoInterior("interior_centroid: grid has no interior voxel");
    return sum / static_cast<double>(n) - g.grid_center();
}

double interior_volume(const VoxelGrid& g) {
    size_t n = 0;
    for (float v : g.values) n += v < 0.0f ? 1 : 0;
    return static_cast<double>(n) * g.voxel_size * g.voxel_size * g.voxel_size;
}

void save_grid(const VoxelGrid& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_grid: cannot open " + path);
    out.precision(17);
    out << "TSDF1 " << g.dims.nx << " " << g.dims.ny << " " << g.dims.nz << " " << g.voxel_size
        << " " << g.origin.x << " " << g.origin.y << " " << g.origin.z << " " << g.trunc << "\n";
    static_assert(sizeof(float) == 4);
    out.write(reinterpret_cast<const char*>(g.values.data()),
              static_cast<std::streamsize>(g.values.size() * sizeof(float)));
    if (!out) throw IoError("save_grid: write failed for " + path);
}

VoxelGrid load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_grid: cannot open " + path);
    std::string magic;
    VoxelGrid g;
    in >> magic >> g.dims.nx >> g.dims.ny >> g.dims.nz >> g.voxel_size >> g.origin.x >>
        g.origin.y >> g.origin.z >> g.trunc;
    if (!in || magic != "TSDF1") throw IoError("load_grid: bad header in " + path);
    in.get();  // consume the newline terminating the header
    g.values.resize(g.dims.count());
    in.read(reinterpret_cast<char*>(g.values.data()),
            static_cast<std::streamsize>(g.values.size() * sizeof(float)));
    if (!in) throw IoError("load_grid: truncated payload in " + path);
    return g;
}

ObjectModel make_object_model(VoxelGrid grid, int max_surface_points) {
    ObjectModel obj;
    obj.samples = extract_surface_samples(grid, max_surface_points);
    obj.com = interior_centroid(grid);
    obj.grid = std::move(grid);
    return obj;
}

}  // namespace pickplace
