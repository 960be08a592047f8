#include "pcd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint blob I/O assumes a little-endian host");
static_assert(sizeof(double) == 8);

namespace pcd {

namespace {

std::string widths_str(const std::vector<int>& w) {
    std::string s;
    for (size_t i = 0; i < w.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(w[i]);
    }
    return s;
}

std::vector<int> parse_widths(const std::string& s, const std::string& context) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        out.push_back(static_cast<int>(parse_int(part, context)));
    }
    return out;
}

std::string build_manifest(const ModelParameters& params) {
    const ArchitectureConfig& a = params.arch;
    std::ostringstream m;
    m << "[architecture]\n";
    m << "input_points = " << a.input_points << "\n";
    m << "coarse_points = " << a.coarse_points << "\n";
    m << "grid_side = " << a.grid_side << "\n";
    m << "latent_dim = " << a.latent_dim << "\n";
    m << "pointnet1_widths = " << widths_str(a.pointnet1_widths) << "\n";
    m << "pointnet2_widths = " << widths_str(a.pointnet2_widths) << "\n";
    m << "latent_mlp_widths = " << widths_str(a.latent_mlp_widths) << "\n";
    m << "coarse_mlp_widths = " << widths_str(a.coarse_mlp_widths) << "\n";
    m << "folding_mlp_widths = " << widths_str(a.folding_mlp_widths) << "\n";
    m << "grid_extent = " << format_double(a.grid_extent) << "\n";
    m << "[normalization]\n";
    m << "translation = " << format_double(params.norm.translation.x) << ","
      << format_double(params.norm.translation.y) << ","
      << format_double(params.norm.translation.z) << "\n";
    m << "scale = " << format_double(params.norm.scale) << "\n";
    m << "[tensors]\n";
    for (const auto& e : params.table.entries) {
        m << e.name << " = " << e.shape.rows() << "x" << e.shape.cols() << " @ "
          << e.offset * sizeof(double) << "\n";
    }
    return m.str();
}

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
    std::string manifest = build_manifest(params);
    out.write("PCDN", 4);
    write_u32(out, kCheckpointVersion);
    write_u64(out, manifest.size());
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    out.write(reinterpret_cast<const char*>(params.table.values.data()),
              static_cast<std::streamsize>(params.table.values.size() * sizeof(double)));
    if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

void save_checkpoint_atomic(const std::filesystem::path& path, const ModelParameters& params) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    save_checkpoint(tmp, params);
    std::filesystem::rename(tmp, path);
}

ModelParameters load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path.string());

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PCDN", 4) != 0) {
        throw IoError("load_checkpoint: " + path.string() + " is not a PCDN checkpoint");
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kCheckpointVersion) {
        throw IoError("load_checkpoint: unsupported format version " + std::to_string(version));
    }
    uint64_t manifest_len = 0;
    in.read(reinterpret_cast<char*>(&manifest_len), sizeof(manifest_len));
    std::string manifest(manifest_len, '\0');
    in.read(manifest.data(), static_cast<std::streamsize>(manifest_len));
    if (!in) throw IoError("load_checkpoint: truncated manifest in " + path.string());

    ArchitectureConfig arch;
    NormalizationTransform norm;
    struct TensorRecord {
        std::string name;
        int rows = 0, cols = 0;
        size_t byte_offset = 0;
    };
    std::vector<TensorRecord> tensors;

    std::string section;
    std::istringstream ms(manifest);
    std::string line;
    while (std::getline(ms, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            section = line;
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw IoError("load_checkpoint: malformed manifest line '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        const std::string ctx = "checkpoint manifest " + key;
        if (section == "[architecture]") {
            if (key == "input_points") arch.input_points = static_cast<int>(parse_int(value, ctx));
            else if (key == "coarse_points") arch.coarse_points = static_cast<int>(parse_int(value, ctx));
            else if (key == "grid_side") arch.grid_side = static_cast<int>(parse_int(value, ctx));
            else if (key == "latent_dim") arch.latent_dim = static_cast<int>(parse_int(value, ctx));
            else if (key == "pointnet1_widths") arch.pointnet1_widths = parse_widths(value, ctx);
            else if (key == "pointnet2_widths") arch.pointnet2_widths = parse_widths(value, ctx);
            else if (key == "latent_mlp_widths") arch.latent_mlp_widths = parse_widths(value, ctx);
            else if (key == "coarse_mlp_widths") arch.coarse_mlp_widths = parse_widths(value, ctx);
            else if (key == "folding_mlp_widths") arch.folding_mlp_widths = parse_widths(value, ctx);
            else if (key == "grid_extent") arch.grid_extent = parse_double(value, ctx);
            else throw IoError("load_checkpoint: unknown architecture key '" + key + "'");
        } else if (section == "[normalization]") {
            if (key == "translation") {
                auto parts = split(value, ',');
                if (parts.size() != 3) throw IoError("load_checkpoint: bad translation '" + value + "'");
                norm.translation = {parse_double(parts[0], ctx), parse_double(parts[1], ctx),
                                    parse_double(parts[2], ctx)};
            } else if (key == "scale") {
                norm.scale = parse_double(value, ctx);
            } else {
                throw IoError("load_checkpoint: unknown normalization key '" + key + "'");
            }
        } else if (section == "[tensors]") {
            TensorRecord rec;
            rec.name = key;
            size_t at = value.find('@');
            if (at == std::string::npos) throw IoError("load_checkpoint: bad tensor line '" + line + "'");
            std::string shape_part = trim(value.substr(0, at));
            rec.byte_offset = static_cast<size_t>(parse_int(value.substr(at + 1), ctx));
            auto dims = split(shape_part, 'x');
            if (dims.size() != 2) throw IoError("load_checkpoint: bad tensor shape '" + shape_part + "'");
            rec.rows = static_cast<int>(parse_int(dims[0], ctx));
            rec.cols = static_cast<int>(parse_int(dims[1], ctx));
            tensors.push_back(std::move(rec));
        } else {
            throw IoError("load_checkpoint: line outside any section: '" + line + "'");
        }
    }

    ModelParameters params = ModelParameters::zeros(arch, norm);

    // Every manifest tensor must match the table the config implies.
    if (tensors.size() != params.table.entries.size()) {
        throw IoError("load_checkpoint: manifest lists " + std::to_string(tensors.size()) +
                      " tensors but the architecture defines " +
                      std::to_string(params.table.entries.size()));
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& rec = tensors[i];
        const auto& e = params.table.entries[i];
        if (rec.name != e.name || rec.rows != e.shape.rows() || rec.cols != e.shape.cols() ||
            rec.byte_offset != e.offset * sizeof(double)) {
            throw IoError("load_checkpoint: tensor '" + rec.name + "' (" +
                          std::to_string(rec.rows) + "x" + std::to_string(rec.cols) +
                          ") does not match the architecture's '" + e.name + "' " +
                          e.shape.str());
        }
    }

    in.read(reinterpret_cast<char*>(params.table.values.data()),
            static_cast<std::streamsize>(params.table.values.size() * sizeof(double)));
    if (!in || in.gcount() !=
                   static_cast<std::streamsize>(params.table.values.size() * sizeof(double))) {
        throw IoError("load_checkpoint: truncated parameter blob in " + path.string());
    }
    return params;
}

}  // namespace pcd
