#pragma once
//
// Truncated signed distance volumes over procedural primitive scenes.
//
// Grids store clamped signed distance (meters, negative inside) at voxel
// centers, x-fastest. `origin` is the world position of the center of voxel
// (0, 0, 0) and the truncation distance is 5 voxels. Queries outside the
// sampled lattice return +trunc: unknown space is treated as free, task
// constraints reject out-of-workspace placements separately.
//
// Grids are immutable after construction; every query here is read-only and
// safe to call concurrently.

#include <string>
#include <vector>

#include "pickplace/geometry.hpp"
#include "pickplace/image.hpp"

namespace pickplace {

inline constexpr double kTruncVoxels = 5.0;

struct Aabb {
    Vec3 lo;
    Vec3 hi;

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
    Vec3 center() const { return (lo + hi) * 0.5; }
    Vec3 extents() const { return hi - lo; }
};

enum class PrimitiveKind { box, sphere, cylinder, lshape };

/// A posed analytic solid. The L-shape is the union of two boxes: a leg of
/// length `leg_y` along local +Y and a foot of length `leg_x` along local
/// +X, both `thickness` wide and `height` tall, centered on the union's
/// bounding box.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::box;
    RigidTransform pose;       // local-to-world
    Vec3 half;                 // box half extents
    double radius = 0.0;       // sphere, cylinder
    double half_height = 0.0;  // cylinder (local +Z axis)
    double leg_x = 0.0, leg_y = 0.0, thickness = 0.0, height = 0.0;  // lshape
};

Primitive make_box(const Vec3& half, const RigidTransform& pose);
Primitive make_sphere(double radius, const Vec3& center);
Primitive make_cylinder(double radius, double half_height, const RigidTransform& pose);
Primitive make_lshape(double leg_x, double leg_y, double thickness, double height,
                      const RigidTransform& pose);

/// Exact signed distance to the primitive at a world point.
double primitive_sdf(const Primitive& prim, const Vec3& p);

/// Conservative world-space bounding box.
Aabb primitive_aabb(const Primitive& prim);

struct GridDims {
    int nx = 0;
    int ny = 0;
    int nz = 0;
    size_t count() const {
        return static_cast<size_t>(nx) * static_cast<size_t>(ny) * static_cast<size_t>(nz);
    }
};

struct VoxelGrid {
    GridDims dims;
    double voxel_size = 0.0;
    Vec3 origin;          // world position of voxel (0,0,0) center
    double trunc = 0.0;   // truncation distance, kTruncVoxels * voxel_size
    std::vector<float> values;

    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(x) +
               static_cast<size_t>(dims.nx) * (static_cast<size_t>(y) +
                                               static_cast<size_t>(dims.ny) * static_cast<size_t>(z));
    }
    float at(int x, int y, int z) const { return values[index(x, y, z)]; }
    float& at(int x, int y, int z) { return values[index(x, y, z)]; }

    Vec3 voxel_center(int x, int y, int z) const {
        return origin + Vec3{x * voxel_size, y * voxel_size, z * voxel_size};
    }
    /// Center of the voxel lattice; rotations and object anchors use it.
    Vec3 grid_center() const {
        return origin + Vec3{(dims.nx - 1) * 0.5 * voxel_size, (dims.ny - 1) * 0.5 * voxel_size,
                             (dims.nz - 1) * 0.5 * voxel_size};
    }
};

/// Builds a grid whose value at each voxel center is the clamped minimum
/// signed distance over all shapes.
VoxelGrid grid_from_primitives(const std::vector<Primitive>& shapes, const GridDims& dims,
                               double voxel_size, const Vec3& origin);

/// Trilinear interpolation inside the lattice, +trunc outside.
double sdf_query(const VoxelGrid& g, const Vec3& p);

/// Central-difference gradient of sdf_query (not normalized).
Vec3 sdf_gradient(const VoxelGrid& g, const Vec3& p);

/// Resamples g rotated by r about its lattice center: output value at p is
/// g sampled at r^-1 (p - c) + c. Same dims, voxel size and origin.
VoxelGrid rotate_grid(const VoxelGrid& g, const Rotation& r);

/// Rotates and resamples onto a new lattice (centered on the source center)
/// in one pass; used to build network inputs at their own resolution.
VoxelGrid rotate_resample_grid(const VoxelGrid& g, const Rotation& r, const GridDims& dims,
                               double voxel_size);

/// Surface points in grid-local coordinates (relative to grid_center()),
/// each projected to within one voxel of a zero crossing.
struct SurfaceSamples {
    std::vector<Vec3> points;
};

/// Collects voxels near the zero crossing, projects them along the SDF
/// gradient, and subsamples deterministically to at most max_points.
/// Throws NoSurface when the grid has uniform sign.
SurfaceSamples extract_surface_samples(const VoxelGrid& g, int max_points);

/// Single-view completion: every observed ray is assumed to exit the object
/// `thickness` meters behind its entry point. The grid origin is fitted to
/// the observed points' bounding box minus one truncation margin.
/// Throws EmptyDepthImage when no pixel is valid.
VoxelGrid shell_complete(const DepthImage& entry, const Camera& camera, double thickness,
                         const GridDims& dims, double voxel_size);

/// Default completion thickness: the smaller lateral extent of the observed
/// silhouette, capped at 8 cm.
double default_shell_thickness(const DepthImage& entry, const Camera& camera);

/// Centroid of interior (negative) voxel centers relative to grid_center().
/// Throws NoInterior when the grid is non-negative everywhere.
Vec3 interior_centroid(const VoxelGrid& g);

/// Total volume of interior voxels, in cubic meters.
double interior_volume(const VoxelGrid& g);

/// Grid file I/O: ASCII header `TSDF1 nx ny nz voxel_size ox oy oz trunc`
/// followed by little-endian 32-bit floats in x-fastest order.
void save_grid(const VoxelGrid& g, const std::string& path);
VoxelGrid load_grid(const std::string& path);

/// An object ready for placement reasoning: its TSDF, surface samples and
/// center of mass (uniform density), both in grid-local coordinates.
struct ObjectModel {
    VoxelGrid grid;
    SurfaceSamples samples;
    Vec3 com;
};

ObjectModel make_object_model(VoxelGrid grid, int max_surface_points = 256);

}  // namespace pickplace
