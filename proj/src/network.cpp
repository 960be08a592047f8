#include "pcd/network.hpp"

#include <cmath>

namespace pcd {

const char* direction_name(Direction d) {
    return d == Direction::kEd2Es ? "ed2es" : "es2ed";
}

Direction parse_direction(const std::string& s) {
    if (s == "ed2es") return Direction::kEd2Es;
    if (s == "es2ed") return Direction::kEs2Ed;
    throw ConfigError("unknown direction '" + s + "' (expected ed2es or es2ed)");
}

void ArchitectureConfig::validate() const {
    if (input_points < 3 || input_points % kNumClasses != 0) {
        throw ConfigError("architecture: input_points must be a positive multiple of 3");
    }
    if (coarse_points < 1) throw ConfigError("architecture: coarse_points must be positive");
    if (grid_side < 1) throw ConfigError("architecture: grid_side must be positive");
    if (latent_dim < 2) throw ConfigError("architecture: latent_dim must be at least 2");
    auto check_widths = [](const std::vector<int>& w, const char* what) {
        for (int v : w) {
            if (v < 1) {
                throw ConfigError(std::string("architecture: ") + what + " widths must be positive");
            }
        }
    };
    check_widths(pointnet1_widths, "pointnet1");
    check_widths(pointnet2_widths, "pointnet2");
    check_widths(latent_mlp_widths, "latent mlp");
    check_widths(coarse_mlp_widths, "coarse mlp");
    check_widths(folding_mlp_widths, "folding mlp");
    if (pointnet1_widths.empty() || pointnet2_widths.empty()) {
        throw ConfigError("architecture: pointnet stacks need at least one layer");
    }
    if (!(grid_extent > 0)) throw ConfigError("architecture: grid_extent must be positive");
}

size_t ParamTable::add(const std::string& name, ad::Shape shape) {
    Entry e;
    e.name = name;
    e.count = static_cast<size_t>(shape.numel());
    e.shape = std::move(shape);
    e.offset = values.size();
    values.resize(values.size() + e.count, 0.0);
    entries.push_back(std::move(e));
    return entries.size() - 1;
}

const ParamTable::Entry& ParamTable::find(const std::string& name) const {
    for (const Entry& e : entries) {
        if (e.name == name) return e;
    }
    throw ConfigError("parameters: no tensor named '" + name + "'");
}

ad::Var ParamVars::find(const std::string& name) const {
    if (!table) throw ConfigError("ParamVars: not registered from a table");
    for (size_t i = 0; i < table->entries.size(); ++i) {
        if (table->entries[i].name == name) return vars[i];
    }
    throw ConfigError("parameters: no tensor named '" + name + "'");
}

namespace {

// Registers weight+bias pairs for an MLP: hidden layers then the output layer.
void add_mlp(ParamTable& table, const std::string& prefix, int in_width,
             const std::vector<int>& hidden, int out_width) {
    int w = in_width;
    int layer = 0;
    for (int h : hidden) {
        table.add(prefix + "." + std::to_string(layer) + ".weight", ad::Shape{w, h});
        table.add(prefix + "." + std::to_string(layer) + ".bias", ad::Shape{1, h});
        w = h;
        ++layer;
    }
    table.add(prefix + "." + std::to_string(layer) + ".weight", ad::Shape{w, out_width});
    table.add(prefix + "." + std::to_string(layer) + ".bias", ad::Shape{1, out_width});
}

ParamTable build_table(const ArchitectureConfig& arch) {
    ParamTable table;
    const int in_features = 3 + kNumClasses;  // xyz + one-hot class

    int w = in_features;
    for (size_t i = 0; i < arch.pointnet1_widths.size(); ++i) {
        table.add("encoder.pointnet1." + std::to_string(i) + ".weight",
                  ad::Shape{w, arch.pointnet1_widths[i]});
        table.add("encoder.pointnet1." + std::to_string(i) + ".bias",
                  ad::Shape{1, arch.pointnet1_widths[i]});
        w = arch.pointnet1_widths[i];
    }
    w = 2 * arch.pointnet1_widths.back();  // per-point feature | pooled global feature
    for (size_t i = 0; i < arch.pointnet2_widths.size(); ++i) {
        table.add("encoder.pointnet2." + std::to_string(i) + ".weight",
                  ad::Shape{w, arch.pointnet2_widths[i]});
        table.add("encoder.pointnet2." + std::to_string(i) + ".bias",
                  ad::Shape{1, arch.pointnet2_widths[i]});
        w = arch.pointnet2_widths[i];
    }
    add_mlp(table, "encoder.mlp", arch.pointnet2_widths.back(), arch.latent_mlp_widths,
            arch.latent_dim);
    add_mlp(table, "decoder.coarse", arch.latent_dim, arch.coarse_mlp_widths,
            arch.coarse_points * kNumClasses * 3);
    add_mlp(table, "decoder.folding", 2 + 3 + arch.latent_dim, arch.folding_mlp_widths, 3);
    return table;
}

// x -> relu(x W + b) chain; the output layer is linear when relu_last is false.
ad::Var mlp_forward(ad::Tape& tape, const ParamVars& pv, const std::string& prefix, ad::Var x,
                    int layer_count, bool relu_last) {
    for (int i = 0; i < layer_count; ++i) {
        ad::Var w = pv.find(prefix + "." + std::to_string(i) + ".weight");
        ad::Var b = pv.find(prefix + "." + std::to_string(i) + ".bias");
        x = tape.add_row(tape.matmul(x, w), b);
        if (i + 1 < layer_count || relu_last) x = tape.relu(x);
    }
    return x;
}

}  // namespace

ModelParameters ModelParameters::zeros(const ArchitectureConfig& arch,
                                       const NormalizationTransform& norm) {
    arch.validate();
    norm.validate();
    ModelParameters p;
    p.arch = arch;
    p.norm = norm;
    p.table = build_table(arch);
    return p;
}

ModelParameters ModelParameters::init(const ArchitectureConfig& arch,
                                      const NormalizationTransform& norm, uint64_t seed) {
    ModelParameters p = zeros(arch, norm);
    Rng rng(seed);
    for (const auto& e : p.table.entries) {
        if (e.name.ends_with(".bias")) continue;  // biases stay zero
        int fan_in = e.shape.rows();
        double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        auto w = p.table.view(e);
        for (double& v : w) v = rng.uniform(-limit, limit);
    }
    return p;
}

ParamVars register_params(ad::Tape& tape, const ModelParameters& params, bool requires_grad) {
    ParamVars pv;
    pv.table = &params.table;
    pv.vars.reserve(params.table.entries.size());
    for (const auto& e : params.table.entries) {
        pv.vars.push_back(tape.leaf(e.shape, params.table.view(e), requires_grad));
    }
    return pv;
}

ad::Var encode(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
               const MultiClassPointCloud& cloud) {
    cloud.validate();
    const int n = static_cast<int>(cloud.size());
    const int in_features = 3 + kNumClasses;

    std::vector<double> input(static_cast<size_t>(n) * in_features, 0.0);
    for (int i = 0; i < n; ++i) {
        double* row = input.data() + static_cast<size_t>(i) * in_features;
        row[0] = cloud.points[i].x;
        row[1] = cloud.points[i].y;
        row[2] = cloud.points[i].z;
        row[3 + cloud.labels[i]] = 1.0;
    }
    ad::Var x = tape.constant(ad::Shape{n, in_features}, input);

    x = mlp_forward(tape, pv, "encoder.pointnet1", x,
                    static_cast<int>(arch.pointnet1_widths.size()), /*relu_last=*/true);
    ad::Var global1 = tape.max_rows(x);
    x = tape.concat_cols(x, tape.tile_rows(global1, n));
    x = mlp_forward(tape, pv, "encoder.pointnet2", x,
                    static_cast<int>(arch.pointnet2_widths.size()), /*relu_last=*/true);
    ad::Var global2 = tape.max_rows(x);
    return mlp_forward(tape, pv, "encoder.mlp", global2,
                       static_cast<int>(arch.latent_mlp_widths.size()) + 1, /*relu_last=*/false);
}

ad::Var decode_coarse(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
                      ad::Var latent) {
    const auto& ls = tape.shape(latent);
    if (ls.rank() != 2 || ls.rows() != 1 || ls.cols() != arch.latent_dim) {
        throw ShapeError("decode_coarse: latent must be [1," + std::to_string(arch.latent_dim) +
                         "], got " + ls.str());
    }
    ad::Var flat = mlp_forward(tape, pv, "decoder.coarse", latent,
                               static_cast<int>(arch.coarse_mlp_widths.size()) + 1,
                               /*relu_last=*/false);
    // m points x 3 classes x 3 coords, row (j,c) = j*3+c.
    return tape.reshape(flat, ad::Shape{arch.coarse_points * kNumClasses, 3});
}

std::vector<int32_t> class_rows(int points_per_class, int cls) {
    std::vector<int32_t> rows(points_per_class);
    for (int j = 0; j < points_per_class; ++j) rows[j] = j * kNumClasses + cls;
    return rows;
}

std::vector<std::array<double, 2>> fold_grid(const ArchitectureConfig& arch) {
    const int side = arch.grid_side;
    std::vector<std::array<double, 2>> grid;
    grid.reserve(static_cast<size_t>(side) * side);
    for (int gu = 0; gu < side; ++gu) {
        for (int gv = 0; gv < side; ++gv) {
            double u = side == 1 ? 0.0
                                 : -arch.grid_extent + 2.0 * arch.grid_extent * gu / (side - 1);
            double v = side == 1 ? 0.0
                                 : -arch.grid_extent + 2.0 * arch.grid_extent * gv / (side - 1);
            grid.push_back({u, v});
        }
    }
    return grid;
}

ad::Var fold_dense(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
                   ad::Var latent, ad::Var coarse) {
    const auto& cs = tape.shape(coarse);
    const int m = arch.coarse_points;
    if (cs.rank() != 2 || cs.rows() != m * kNumClasses || cs.cols() != 3) {
        throw ShapeError("fold_dense: coarse must be [" + std::to_string(m * kNumClasses) +
                         ",3], got " + cs.str());
    }
    const auto& ls = tape.shape(latent);
    if (ls.rank() != 2 || ls.rows() != 1 || ls.cols() != arch.latent_dim) {
        throw ShapeError("fold_dense: latent must be [1," + std::to_string(arch.latent_dim) +
                         "], got " + ls.str());
    }

    const int cells = arch.grid_side * arch.grid_side;
    const int p = arch.dense_points();
    const int rows = p * kNumClasses;
    const auto grid = fold_grid(arch);

    // Dense row r = (j*cells + g)*3 + c descends from coarse row j*3+c.
    std::vector<int32_t> parent_rows(rows);
    std::vector<double> grid_values(static_cast<size_t>(rows) * 2);
    for (int r = 0; r < rows; ++r) {
        int c = r % kNumClasses;
        int i = r / kNumClasses;  // dense point index within the class
        int j = i / cells;
        int g = i % cells;
        parent_rows[r] = j * kNumClasses + c;
        grid_values[2 * r] = grid[g][0];
        grid_values[2 * r + 1] = grid[g][1];
    }

    ad::Var parents = tape.gather_rows(coarse, parent_rows);
    ad::Var grid_var = tape.constant(ad::Shape{rows, 2}, grid_values);
    ad::Var fold_in = tape.concat_cols(tape.concat_cols(grid_var, parents),
                                       tape.tile_rows(latent, rows));
    ad::Var offsets = mlp_forward(tape, pv, "decoder.folding", fold_in,
                                  static_cast<int>(arch.folding_mlp_widths.size()) + 1,
                                  /*relu_last=*/false);
    return tape.add(parents, offsets);
}

namespace {

std::array<PointList, kNumClasses> split_output(const std::vector<double>& values,
                                                int points_per_class) {
    std::array<PointList, kNumClasses> out;
    for (int c = 0; c < kNumClasses; ++c) out[c].resize(points_per_class);
    for (int j = 0; j < points_per_class; ++j) {
        for (int c = 0; c < kNumClasses; ++c) {
            size_t base = (static_cast<size_t>(j) * kNumClasses + c) * 3;
            out[c][j] = {values[base], values[base + 1], values[base + 2]};
        }
    }
    return out;
}

MultiClassPointCloud merge_classes(const std::array<PointList, kNumClasses>& classes) {
    MultiClassPointCloud cloud;
    for (int c = 0; c < kNumClasses; ++c) {
        for (const Vec3& p : classes[c]) cloud.push_back(p, static_cast<uint8_t>(c));
    }
    return cloud;
}

}  // namespace

MultiClassPointCloud DeformationPrediction::coarse_cloud() const { return merge_classes(coarse); }
MultiClassPointCloud DeformationPrediction::dense_cloud() const { return merge_classes(dense); }

DeformationPrediction predict_normalized(const ModelParameters& params,
                                         const MultiClassPointCloud& cloud) {
    ad::Tape tape;
    ParamVars pv = register_params(tape, params, /*requires_grad=*/false);
    ad::Var latent = encode(tape, pv, params.arch, cloud);
    ad::Var coarse = decode_coarse(tape, pv, params.arch, latent);
    ad::Var dense = fold_dense(tape, pv, params.arch, latent, coarse);

    DeformationPrediction pred;
    pred.coarse = split_output(tape.values(coarse), params.arch.coarse_points);
    pred.dense = split_output(tape.values(dense), params.arch.dense_points());
    return pred;
}

DeformationPrediction predict(const ModelParameters& params, const MultiClassPointCloud& cloud_mm) {
    return predict_normalized(params, normalize(cloud_mm, params.norm));
}

std::vector<double> encode_latent(const ModelParameters& params,
                                  const MultiClassPointCloud& cloud_mm) {
    ad::Tape tape;
    ParamVars pv = register_params(tape, params, /*requires_grad=*/false);
    ad::Var latent = encode(tape, pv, params.arch, normalize(cloud_mm, params.norm));
    return tape.values(latent);
}

}  // namespace pcd
