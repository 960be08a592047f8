#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcd/geometry.hpp"
#include "pcd/tensor.hpp"

namespace pcd {

// One model instance per prediction direction: contraction (ED to ES) or
// relaxation (ES to ED).
enum class Direction { kEd2Es, kEs2Ed };
const char* direction_name(Direction d);  // "ed2es" / "es2ed"
Direction parse_direction(const std::string& s);

// Shape-defining hyperparameters. The dense output has p = m * grid_side^2
// points per class, folded from 2-D patches anchored at the coarse points.
struct ArchitectureConfig {
    int input_points = 3072;   // n, total over the 3 classes
    int coarse_points = 64;    // m, per class
    int grid_side = 4;
    int latent_dim = 64;       // z
    std::vector<int> pointnet1_widths{64, 128};
    std::vector<int> pointnet2_widths{256, 512};
    std::vector<int> latent_mlp_widths{256};    // hidden; final layer emits z
    std::vector<int> coarse_mlp_widths{256, 512};  // hidden; final layer emits m*9
    std::vector<int> folding_mlp_widths{256, 128};  // hidden; final layer emits 3
    double grid_extent = 0.05;  // half-width of the 2-D patch in normalized units

    int dense_points() const { return coarse_points * grid_side * grid_side; }  // p, per class
    void validate() const;
    bool operator==(const ArchitectureConfig&) const = default;
};

// All learnable weights live in one flat vector; the entries table names each
// tensor and records its shape and offset. Entry order is the registration
// order of the architecture, which keeps checkpoints and gradient layouts
// reproducible.
struct ParamTable {
    struct Entry {
        std::string name;
        ad::Shape shape;
        size_t offset = 0;
        size_t count = 0;
    };

    std::vector<Entry> entries;
    std::vector<double> values;

    size_t add(const std::string& name, ad::Shape shape);
    std::span<double> view(const Entry& e) { return {values.data() + e.offset, e.count}; }
    std::span<const double> view(const Entry& e) const { return {values.data() + e.offset, e.count}; }
    const Entry& find(const std::string& name) const;
    std::span<double> view(const std::string& name) { return view(find(name)); }
    size_t size() const { return values.size(); }
};

struct ModelParameters {
    ArchitectureConfig arch;
    NormalizationTransform norm;
    ParamTable table;

    // He-style uniform fan-in initialization for weights, zero biases.
    static ModelParameters init(const ArchitectureConfig& arch, const NormalizationTransform& norm,
                                uint64_t seed);
    // Shape-only construction (all zeros); used by checkpoint loading.
    static ModelParameters zeros(const ArchitectureConfig& arch, const NormalizationTransform& norm);
};

// Parameter leaves registered on a tape, parallel to table.entries. Holds a
// pointer to the table it was registered from for name lookups; the table
// must outlive the tape pass.
struct ParamVars {
    std::vector<ad::Var> vars;
    const ParamTable* table = nullptr;

    ad::Var find(const std::string& name) const;
};

ParamVars register_params(ad::Tape& tape, const ModelParameters& params, bool requires_grad);

// Prediction in normalized units: m and p points per class.
struct DeformationPrediction {
    std::array<PointList, kNumClasses> coarse;
    std::array<PointList, kNumClasses> dense;

    MultiClassPointCloud coarse_cloud() const;
    MultiClassPointCloud dense_cloud() const;
};

// Encoder: two stacked PointNets and an MLP. The first PointNet's pooled
// global feature is concatenated onto each per-point feature before the
// second PointNet; the second pooled feature passes through the final MLP.
// Returns the [1,z] latent. Input cloud must be in normalized coordinates.
ad::Var encode(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
               const MultiClassPointCloud& cloud);

// Decoder, coarse stage: MLP from the latent to an [m*3, 3] tensor
// (m points x 3 classes x 3 coordinates, class-major within each point slot).
ad::Var decode_coarse(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
                      ad::Var latent);

// Decoder, folding stage: each coarse point is replicated grid_side^2 times;
// every replica's input is (2-D grid coordinate, coarse point, latent) and the
// shared folding MLP emits a 3-D offset added to the parent coarse point.
// Returns [p*3, 3] laid out like the coarse tensor.
ad::Var fold_dense(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
                   ad::Var latent, ad::Var coarse);

// Row indices of one class's points within the [k*3, 3] output layout.
std::vector<int32_t> class_rows(int points_per_class, int cls);

// The 2-D patch lattice spanning [-grid_extent, +grid_extent]^2.
std::vector<std::array<double, 2>> fold_grid(const ArchitectureConfig& arch);

// encode -> decode_coarse -> fold_dense on a cloud given in mm; applies the
// checkpoint normalization, returns normalized-unit outputs.
DeformationPrediction predict(const ModelParameters& params, const MultiClassPointCloud& cloud_mm);

// As above but for a cloud already in normalized coordinates.
DeformationPrediction predict_normalized(const ModelParameters& params,
                                         const MultiClassPointCloud& cloud);

// Encoder only, cloud in mm; returns the z latent values.
std::vector<double> encode_latent(const ModelParameters& params,
                                  const MultiClassPointCloud& cloud_mm);

}  // namespace pcd
