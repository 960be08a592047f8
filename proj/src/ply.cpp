#include "pcd/ply.hpp"

#include <fstream>
#include <sstream>

namespace pcd {

void write_ply(const std::filesystem::path& path, const MultiClassPointCloud& cloud) {
    if (cloud.labels.size() != cloud.points.size()) {
        throw ConfigError("write_ply: labels/points length mismatch");
    }
    std::ofstream out(path);
    if (!out) throw IoError("write_ply: cannot open " + path.string());
    out << "ply\n"
        << "format ascii 1.0\n"
        << "comment units mm\n"
        << "element vertex " << cloud.points.size() << "\n"
        << "property float x\n"
        << "property float y\n"
        << "property float z\n"
        << "property uchar class\n"
        << "end_header\n";
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        const Vec3& p = cloud.points[i];
        out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z)
            << ' ' << int(cloud.labels[i]) << '\n';
    }
    if (!out) throw IoError("write_ply: write failed for " + path.string());
}

MultiClassPointCloud read_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_ply: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line) || line != "ply") {
        throw IoError("read_ply: " + path.string() + " is not a PLY file");
    }

    size_t vertex_count = 0;
    bool ascii = false;
    std::vector<std::string> properties;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (tok == "element") {
            std::string name;
            ls >> name >> vertex_count;
            if (name != "vertex") {
                throw IoError("read_ply: unsupported element '" + name + "' in " + path.string());
            }
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            properties.push_back(name);
        }
    }
    if (!ascii) throw IoError("read_ply: only ascii PLY is supported: " + path.string());
    if (properties != std::vector<std::string>{"x", "y", "z", "class"}) {
        throw IoError("read_ply: expected properties x y z class in " + path.string());
    }

    MultiClassPointCloud cloud;
    cloud.points.reserve(vertex_count);
    cloud.labels.reserve(vertex_count);
    for (size_t i = 0; i < vertex_count; ++i) {
        if (!std::getline(in, line)) {
            throw IoError("read_ply: truncated vertex data in " + path.string());
        }
        std::istringstream ls(line);
        Vec3 p;
        int cls = -1;
        if (!(ls >> p.x >> p.y >> p.z >> cls)) {
            throw IoError("read_ply: malformed vertex line " + std::to_string(i + 1) + " in " +
                          path.string());
        }
        if (cls < 0 || cls >= kNumClasses) {
            throw IoError("read_ply: unknown class value " + std::to_string(cls) + " in " +
                          path.string());
        }
        cloud.push_back(p, static_cast<uint8_t>(cls));
    }
    return cloud;
}

}  // namespace pcd
