#pragma once
//
// File formats: JSON schemas for transforms, grasps, scenes, plans and
// metrics; 16-bit PGM depth dumps (millimeters, 65535 = miss); 8-bit PGM
// affordance maps; PNG overlays (uncompressed deflate, no external codec).

#include <string>
#include <vector>

#include <json.hpp>

#include "pickplace/grasp.hpp"
#include "pickplace/image.hpp"
#include "pickplace/oracle.hpp"
#include "pickplace/tasks.hpp"

namespace pickplace {

using json = nlohmann::json;

// Transforms serialize as {"q":[w,x,y,z],"t":[x,y,z]}.
json to_json(const Rotation& r);
json to_json(const RigidTransform& t);
json to_json(const Vec3& v);
Rotation rotation_from_json(const json& j);
RigidTransform transform_from_json(const json& j);
Vec3 vec3_from_json(const json& j);

json to_json(const Primitive& prim);
Primitive primitive_from_json(const json& j);

json to_json(const Scene& scene);
Scene scene_from_json(const json& j);
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

json to_json(const Grasp& g);
Grasp grasp_from_json(const json& j);
json grasps_to_json(const std::vector<Grasp>& grasps);

json to_json(const PlanResult& plan);

json to_json(const Metrics& metrics);
std::string metrics_csv(const Metrics& metrics);

void save_pgm16(const DepthImage& img, const std::string& path);
DepthImage load_pgm16(const std::string& path);
void save_pgm8(const AffordanceMap& map, const std::string& path);

/// Depth rendered as grayscale with the affordance map alpha-blended in red.
void save_overlay_png(const DepthImage& depth, const AffordanceMap& map, const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace pickplace
