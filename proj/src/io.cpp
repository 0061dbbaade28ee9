#include "pickplace/io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "pickplace/errors.hpp"

namespace pickplace {

json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

json to_json(const Rotation& r) { return json::array({r.w, r.x, r.y, r.z}); }

Rotation rotation_from_json(const json& j) {
    return Rotation{j.at(0), j.at(1), j.at(2), j.at(3)}.canonicalized();
}

json to_json(const RigidTransform& t) {
    return json{{"q", to_json(t.rotation)}, {"t", to_json(t.translation)}};
}

RigidTransform transform_from_json(const json& j) {
    return {rotation_from_json(j.at("q")), vec3_from_json(j.at("t"))};
}

json to_json(const Primitive& prim) {
    json j{{"pose", to_json(prim.pose)}};
    switch (prim.kind) {
        case PrimitiveKind::box:
            j["kind"] = "box";
            j["half"] = to_json(prim.half);
            break;
        case PrimitiveKind::sphere:
            j["kind"] = "sphere";
            j["radius"] = prim.radius;
            break;
        case PrimitiveKind::cylinder:
            j["kind"] = "cylinder";
            j["radius"] = prim.radius;
            j["half_height"] = prim.half_height;
            break;
        case PrimitiveKind::lshape:
            j["kind"] = "lshape";
            j["leg_x"] = prim.leg_x;
            j["leg_y"] = prim.leg_y;
            j["thickness"] = prim.thickness;
            j["height"] = prim.height;
            break;
    }
    return j;
}

Primitive primitive_from_json(const json& j) {
    const std::string kind = j.at("kind");
    const RigidTransform pose = transform_from_json(j.at("pose"));
    if (kind == "box") return make_box(vec3_from_json(j.at("half")), pose);
    if (kind == "sphere") {
        Primitive p = make_sphere(j.at("radius"), pose.translation);
        p.pose = pose;
        return p;
    }
    if (kind == "cylinder") return make_cylinder(j.at("radius"), j.at("half_height"), pose);
    if (kind == "lshape") {
        return make_lshape(j.at("leg_x"), j.at("leg_y"), j.at("thickness"), j.at("height"), pose);
    }
    throw IoError("primitive_from_json: unknown kind " + kind);
}

namespace {

json region_to_json(const TargetRegion& region) {
    switch (region.kind) {
        case TargetRegion::Kind::anywhere:
            return json{{"kind", "anywhere"}};
        case TargetRegion::Kind::box:
            return json{{"kind", "box"},
                        {"lo", to_json(region.box.lo)},
                        {"hi", to_json(region.box.hi)}};
        case TargetRegion::Kind::pose:
            return json{{"kind", "pose"},
                        {"q", to_json(region.nominal_rotation)},
                        {"anchor", to_json(region.nominal_anchor)},
                        {"pos_tol", region.pos_tol},
                        {"ang_tol", region.ang_tol}};
    }
    return {};
}

TargetRegion region_from_json(const json& j) {
    const std::string kind = j.at("kind");
    if (kind == "anywhere") return TargetRegion::anywhere();
    if (kind == "box") {
        return TargetRegion::inside_box({vec3_from_json(j.at("lo")), vec3_from_json(j.at("hi"))});
    }
    if (kind == "pose") {
        return TargetRegion::at_pose(rotation_from_json(j.at("q")),
                                     vec3_from_json(j.at("anchor")), j.at("pos_tol"),
                                     j.at("ang_tol"));
    }
    throw IoError("region_from_json: unknown kind " + kind);
}

}  // namespace

json to_json(const Scene& scene) {
    json statics = json::array();
    for (const Primitive& p : scene.statics) statics.push_back(to_json(p));
    json clutter = json::array();
    for (const Primitive& p : scene.clutter) clutter.push_back(to_json(p));
    return json{{"kind", scene.kind},
                {"seed", scene.seed},
                {"statics", statics},
                {"clutter", clutter},
                {"object", to_json(scene.place_object)},
                {"bounds", {{"lo", to_json(scene.bounds.lo)}, {"hi", to_json(scene.bounds.hi)}}},
                {"target_region", region_to_json(scene.target)},
                {"view_target", to_json(scene.view_target)},
                {"grid",
                 {{"dims", {scene.grid_dims.nx, scene.grid_dims.ny, scene.grid_dims.nz}},
                  {"voxel", scene.grid_voxel},
                  {"origin", to_json(scene.grid_origin)}}}};
}

Scene scene_from_json(const json& j) {
    Scene scene;
    scene.kind = j.at("kind");
    scene.seed = j.at("seed");
    for (const json& p : j.at("statics")) scene.statics.push_back(primitive_from_json(p));
    for (const json& p : j.at("clutter")) scene.clutter.push_back(primitive_from_json(p));
    scene.place_object = primitive_from_json(j.at("object"));
    scene.bounds = {vec3_from_json(j.at("bounds").at("lo")),
                    vec3_from_json(j.at("bounds").at("hi"))};
    scene.target = region_from_json(j.at("target_region"));
    scene.view_target = vec3_from_json(j.at("view_target"));
    const json& grid = j.at("grid");
    scene.grid_dims = {grid.at("dims").at(0), grid.at("dims").at(1), grid.at("dims").at(2)};
    scene.grid_voxel = grid.at("voxel");
    scene.grid_origin = vec3_from_json(grid.at("origin"));
    return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
    write_text_file(path, to_json(scene).dump(2) + "\n");
}

Scene load_scene(const std::string& path) {
    return scene_from_json(json::parse(read_text_file(path)));
}

json to_json(const Grasp& g) {
    return json{{"pose", to_json(g.pose)}, {"width", g.width}, {"quality", g.quality}};
}

Grasp grasp_from_json(const json& j) {
    return Grasp{transform_from_json(j.at("pose")), j.at("width"), j.at("quality")};
}

json grasps_to_json(const std::vector<Grasp>& grasps) {
    json arr = json::array();
    for (const Grasp& g : grasps) arr.push_back(to_json(g));
    return arr;
}

json to_json(const PlanResult& plan) {
    return json{{"pick", to_json(plan.pick)},
                {"object_transform", to_json(plan.object_transform)},
                {"insert_dir", to_json(plan.insert_dir)},
                {"score", plan.score},
                {"view_index", plan.view_index},
                {"pixel", {plan.u, plan.v}}};
}

json to_json(const Metrics& metrics) {
    json hist = json::object();
    for (const auto& [cause, count] : metrics.failure_histogram) hist[cause] = count;
    return json{{"episodes", metrics.episodes},
                {"successes", metrics.successes},
                {"success_rate", metrics.success_rate()},
                {"failure_histogram", hist},
                {"mean_plan_ms", metrics.mean_plan_ms}};
}

std::string metrics_csv(const Metrics& metrics) {
    std::ostringstream out;
    out << "episode,seed,reward,failure_cause,plan_ms\n";
    for (const EpisodeRow& row : metrics.rows) {
        out << row.episode << "," << row.seed << "," << row.reward << "," << to_string(row.cause)
            << "," << static_cast<int64_t>(row.plan_ms) << "\n";
    }
    return out.str();
}

void save_pgm16(const DepthImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_pgm16: cannot open " + path);
    out << "P5\n" << img.width << " " << img.height << "\n65535\n";
    for (float d : img.depth) {
        uint16_t mm = 65535;
        if (std::isfinite(d)) {
            mm = static_cast<uint16_t>(std::min(65534.0, std::max(0.0, d * 1000.0)));
        }
        const uint8_t hi = static_cast<uint8_t>(mm >> 8);
        const uint8_t lo = static_cast<uint8_t>(mm & 0xff);
        out.put(static_cast<char>(hi)).put(static_cast<char>(lo));
    }
    if (!out) throw IoError("save_pgm16: write failed for " + path);
}

DepthImage load_pgm16(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_pgm16: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 65535) throw IoError("load_pgm16: bad header in " + path);
    in.get();
    DepthImage img(w, h);
    for (size_t i = 0; i < img.depth.size(); ++i) {
        const int hi = in.get();
        const int lo = in.get();
        const uint16_t mm = static_cast<uint16_t>((hi << 8) | lo);
        img.depth[i] = mm == 65535 ? kDepthMiss : mm / 1000.0f;
    }
    if (!in) throw IoError("load_pgm16: truncated payload in " + path);
    return img;
}

void save_pgm8(const AffordanceMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_pgm8: cannot open " + path);
    out << "P5\n" << map.width << " " << map.height << "\n255\n";
    for (float s : map.scores) {
        out.put(static_cast<char>(std::lround(std::clamp(s, 0.0f, 1.0f) * 255.0f)));
    }
    if (!out) throw IoError("save_pgm8: write failed for " + path);
}

namespace {

// Minimal PNG writer with uncompressed deflate blocks; deterministic and
// codec-free.
uint32_t crc32_table_entry(uint32_t n) {
    for (int k = 0; k < 8; ++k) n = (n & 1) ? 0xedb88320u ^ (n >> 1) : n >> 1;
    return n;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0xffffffffu) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) table[i] = crc32_table_entry(i);
        init = true;
    }
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
    return crc;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void png_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_u32(out, crc32(body.data(), body.size()) ^ 0xffffffffu);
}

std::vector<uint8_t> deflate_stored(const std::vector<uint8_t>& raw) {
    std::vector<uint8_t> out{0x78, 0x01};
    size_t pos = 0;
    do {
        const size_t n = std::min<size_t>(65535, raw.size() - pos);
        const bool final_block = pos + n == raw.size();
        out.push_back(final_block ? 1 : 0);
        out.push_back(static_cast<uint8_t>(n & 0xff));
        out.push_back(static_cast<uint8_t>(n >> 8));
        out.push_back(static_cast<uint8_t>(~n & 0xff));
        out.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
        out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
        pos += n;
    } while (pos < raw.size());
    uint32_t a = 1, b = 0;
    for (uint8_t byte : raw) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    put_u32(out, (b << 16) | a);
    return out;
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb) {
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = &rgb[static_cast<size_t>(y) * width * 3];
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }
    std::vector<uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(width));
    put_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // color type RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", deflate_stored(raw));
    png_chunk(out, "IEND", {});
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_png_rgb: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write_png_rgb: write failed for " + path);
}

}  // namespace

void save_overlay_png(const DepthImage& depth, const AffordanceMap& map, const std::string& path) {
    float lo = 1e30f, hi = -1e30f;
    for (float d : depth.depth) {
        if (!std::isfinite(d)) continue;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    const float span = hi > lo ? hi - lo : 1.0f;
    std::vector<uint8_t> rgb(static_cast<size_t>(depth.width) * depth.height * 3, 0);
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const size_t i = (static_cast<size_t>(v) * depth.width + u) * 3;
            const float d = depth.at(u, v);
            uint8_t gray = 0;
            if (std::isfinite(d)) {
                gray = static_cast<uint8_t>(40 + 200 * (1.0f - (d - lo) / span));
            }
            const float a = 0.55f * std::clamp(map.score(u, v), 0.0f, 1.0f);
            rgb[i] = static_cast<uint8_t>(gray * (1.0f - a) + 255.0f * a);
            rgb[i + 1] = static_cast<uint8_t>(gray * (1.0f - a));
            rgb[i + 2] = static_cast<uint8_t>(gray * (1.0f - a));
        }
    }
    write_png_rgb(path, depth.width, depth.height, rgb);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_text_file: cannot open " + path);
    out << content;
    if (!out) throw IoError("write_text_file: write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_text_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace pickplace
