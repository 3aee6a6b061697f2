#include "clodgs/ply_io.hpp"

#include "clodgs/error.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace clodgs {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

struct Property {
    std::string name;
    std::size_t offset = 0;
    bool is_double = false;
};

struct Header {
    std::size_t vertex_count = 0;
    std::vector<Property> properties;
    std::size_t record_size = 0;
    bool has_other_elements = false;
    Vec3 background = Vec3::Zero();
};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw IoError(path.string() + ": " + what);
}

Header parse_header(std::istream& in, const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line) || line != "ply") fail(path, "missing 'ply' magic");
    Header h;
    bool in_vertex = false, seen_vertex = false, format_ok = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "end_header") {
            if (!format_ok) fail(path, "malformed header: expected 'format binary_little_endian 1.0'");
            if (!seen_vertex) fail(path, "malformed header: no 'vertex' element");
            return h;
        }
        if (key == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt != "binary_little_endian") fail(path, "unsupported format '" + fmt + "'");
            format_ok = true;
        } else if (key == "comment") {
            std::string tag, field;
            ls >> tag >> field;
            if (tag == "clodgs" && field == "background") {
                for (int c = 0; c < 3; ++c) {
                    std::string v;
                    ls >> v;
                    h.background[c] = std::strtod(v.c_str(), nullptr);
                }
            }
        } else if (key == "element") {
            std::string name;
            long long count = -1;
            ls >> name >> count;
            if (name == "vertex") {
                if (seen_vertex || count < 0) fail(path, "malformed header: bad vertex element");
                h.vertex_count = static_cast<std::size_t>(count);
                in_vertex = seen_vertex = true;
            } else {
                in_vertex = false;
                h.has_other_elements = true;
            }
        } else if (key == "property") {
            if (!in_vertex) continue;
            std::string type, name;
            ls >> type >> name;
            Property p;
            p.name = name;
            p.offset = h.record_size;
            if (type == "float" || type == "float32") {
                h.record_size += 4;
            } else if (type == "double" || type == "float64") {
                p.is_double = true;
                h.record_size += 8;
            } else {
                fail(path, "property '" + name + "' has unsupported type '" + type + "'");
            }
            h.properties.push_back(p);
        } else if (key == "obj_info" || key.empty()) {
            continue;
        } else {
            fail(path, "malformed header line '" + line + "'");
        }
    }
    fail(path, "malformed header: missing end_header");
}

void put(std::vector<char>& buf, float v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.insert(buf.end(), b, b + 4);
}

void write_scene(const GaussianScene& scene, const std::filesystem::path& path, bool with_sigma) {
    scene.validate();
    const int coeffs = scene.coeff_count();
    std::ostringstream hdr;
    hdr << "ply\nformat binary_little_endian 1.0\n";
    char bg[160];
    std::snprintf(bg, sizeof bg, "comment clodgs background %.17g %.17g %.17g\n", scene.background[0],
                  scene.background[1], scene.background[2]);
    hdr << bg;
    hdr << "element vertex " << scene.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        hdr << "property float " << n << "\n";
    }
    for (int i = 0; i < 3 * (coeffs - 1); ++i) hdr << "property float f_rest_" << i << "\n";
    hdr << "property float opacity\n";
    for (int i = 0; i < 3; ++i) hdr << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) hdr << "property float rot_" << i << "\n";
    if (with_sigma) hdr << "property float sigma_d\n";
    hdr << "end_header\n";

    std::vector<char> body;
    body.reserve(scene.size() * ply_record_size(scene.sh_degree, with_sigma));
    for (const auto& p : scene.primitives) {
        for (int c = 0; c < 3; ++c) put(body, static_cast<float>(p.position[c]));
        for (int c = 0; c < 3; ++c) put(body, 0.0f);
        for (int c = 0; c < 3; ++c) put(body, static_cast<float>(p.sh[0][c]));
        // f_rest is channel-major: all coefficients of R, then G, then B.
        for (int c = 0; c < 3; ++c) {
            for (int k = 1; k < coeffs; ++k) put(body, static_cast<float>(p.sh[k][c]));
        }
        put(body, static_cast<float>(p.opacity_logit));
        for (int c = 0; c < 3; ++c) put(body, static_cast<float>(p.log_scale[c]));
        for (int c = 0; c < 4; ++c) put(body, static_cast<float>(p.rotation[c]));
        if (with_sigma) put(body, static_cast<float>(p.sigma_d));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string h = hdr.str();
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

GaussianScene load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const Header h = parse_header(in, path);
    if (h.vertex_count == 0) fail(path, "vertex element is empty");

    std::map<std::string, const Property*> by_name;
    for (const auto& p : h.properties) by_name[p.name] = &p;
    auto require = [&](const std::string& name) {
        auto it = by_name.find(name);
        if (it == by_name.end()) fail(path, "missing required property '" + name + "'");
        return it->second;
    };

    int rest = 0;
    while (by_name.count("f_rest_" + std::to_string(rest))) ++rest;
    int degree = -1;
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (rest == 3 * (sh_coeff_count(d) - 1)) degree = d;
    }
    if (degree < 0) fail(path, "property 'f_rest_*' count " + std::to_string(rest) + " matches no SH degree");

    std::vector<const Property*> pos, dc, scale, rot, rest_props;
    for (const char* n : {"x", "y", "z"}) pos.push_back(require(n));
    for (int c = 0; c < 3; ++c) dc.push_back(require("f_dc_" + std::to_string(c)));
    for (int c = 0; c < 3; ++c) scale.push_back(require("scale_" + std::to_string(c)));
    for (int c = 0; c < 4; ++c) rot.push_back(require("rot_" + std::to_string(c)));
    for (int i = 0; i < rest; ++i) rest_props.push_back(require("f_rest_" + std::to_string(i)));
    const Property* opacity = require("opacity");
    const Property* sigma = by_name.count("sigma_d") ? by_name["sigma_d"] : nullptr;

    std::vector<char> data(h.vertex_count * h.record_size);
    in.read(data.data(), static_cast<std::streamsize>(data.size()));
    if (static_cast<std::size_t>(in.gcount()) != data.size()) {
        fail(path, "element count mismatch: header declares " + std::to_string(h.vertex_count) +
                       " vertices but the data ends after " + std::to_string(in.gcount() / h.record_size));
    }
    if (!h.has_other_elements && in.peek() != std::char_traits<char>::eof()) {
        fail(path, "element count mismatch: trailing bytes after " + std::to_string(h.vertex_count) + " vertices");
    }

    GaussianScene scene;
    scene.sh_degree = degree;
    scene.background = h.background;
    scene.primitives.resize(h.vertex_count);
    const int coeffs = sh_coeff_count(degree);
    for (std::size_t row = 0; row < h.vertex_count; ++row) {
        const char* rec = data.data() + row * h.record_size;
        auto get = [&](const Property* p) {
            double v;
            if (p->is_double) {
                std::memcpy(&v, rec + p->offset, 8);
            } else {
                float f;
                std::memcpy(&f, rec + p->offset, 4);
                v = f;
            }
            if (!std::isfinite(v)) fail(path, "row " + std::to_string(row) + " property '" + p->name + "' is not finite");
            return v;
        };
        auto& g = scene.primitives[row];
        for (int c = 0; c < 3; ++c) g.position[c] = get(pos[c]);
        for (int c = 0; c < 3; ++c) g.sh[0][c] = get(dc[c]);
        for (int c = 0; c < 3; ++c) {
            for (int k = 1; k < coeffs; ++k) g.sh[k][c] = get(rest_props[c * (coeffs - 1) + (k - 1)]);
        }
        g.opacity_logit = get(opacity);
        for (int c = 0; c < 3; ++c) g.log_scale[c] = get(scale[c]);
        for (int c = 0; c < 4; ++c) g.rotation[c] = get(rot[c]);
        const double qn = g.rotation.norm();
        if (qn == 0.0) fail(path, "row " + std::to_string(row) + " property 'rot_*' is a zero quaternion");
        // Leave already-unit quaternions untouched so the round trip stays bit-exact.
        if (std::abs(qn - 1.0) > 1e-6) g.rotation /= qn;
        g.sigma_d = sigma ? get(sigma) : kDefaultSigmaD;
    }
    return scene;
}

void save_ply(const GaussianScene& scene, const std::filesystem::path& path) { write_scene(scene, path, true); }

void save_ply_without_sigma(const GaussianScene& scene, const std::filesystem::path& path) {
    write_scene(scene, path, false);
}

}  // namespace clodgs
