#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include "pcd/adam.hpp"
#include "pcd/network.hpp"

namespace pcd {

// Per-class coarse and dense Chamfer terms of the composite training loss:
// total = sum over classes of (coarse_c + alpha * dense_c).
struct LossBreakdown {
    std::array<double, kNumClasses> coarse{};
    std::array<double, kNumClasses> dense{};
    double alpha = 0;
    double total = 0;
};

struct TrainConfig {
    int batch_size = 8;
    ad::AdamConfig adam;
    // Piecewise-constant, monotone non-decreasing from 0.01 to 5.0.
    std::map<int64_t, double> alpha_breakpoints{
        {0, 0.01}, {5000, 0.1}, {15000, 0.5}, {30000, 1.0}, {50000, 5.0}};
    int64_t patience = 10000;            // steps without validation improvement
    int64_t validation_interval = 250;   // steps between validation passes
    int64_t max_steps = 0;               // 0 = run until early stopping
    double train_fraction = 0.70;
    double val_fraction = 0.05;
    double test_fraction = 0.25;
    uint64_t seed = 24601;
    int threads = 1;  // batch elements processed in parallel; reduction order is fixed

    void validate() const;
};

double alpha_schedule(int64_t step, const std::map<int64_t, double>& breakpoints);
double alpha_schedule(int64_t step, const TrainConfig& config);

// Both outputs are scored against the same dense ground truth, per class.
LossBreakdown total_loss(const DeformationPrediction& pred, const MultiClassPointCloud& target,
                         double alpha);

// Per-class fixed targets shared across training steps.
struct ChamferTargets {
    std::array<std::shared_ptr<const ad::ChamferTarget>, kNumClasses> per_class;

    static ChamferTargets build(const MultiClassPointCloud& target);
};

// Differentiable loss graph; `breakdown` carries the forward values.
struct LossGraph {
    ad::Var total;
    LossBreakdown breakdown;
};

LossGraph total_loss_graph(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
                           const MultiClassPointCloud& input, const ChamferTargets& target,
                           double alpha);

// Disjoint partition covering all records; sizes by largest-remainder
// rounding of the fractions; deterministic under seed.
struct SplitIndices {
    std::vector<size_t> train, validation, test;
};

SplitIndices split_dataset(size_t count, double train_fraction, double val_fraction,
                           double test_fraction, uint64_t seed);

// One training example, clouds in normalized coordinates.
struct TrainPair {
    MultiClassPointCloud input;
    MultiClassPointCloud target;
};

struct TrainLogRow {
    int64_t step = 0;
    double alpha = 0;
    LossBreakdown loss;                       // batch mean
    std::optional<double> val_dense_chamfer;  // set on validation steps
};

void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const TrainLogRow& row);

struct TrainResult {
    ModelParameters params;  // best-on-validation, not last
    double best_val_metric = 0;
    int64_t best_step = 0;
    int64_t total_steps = 0;
};

// Adam + early stopping: runs until the validation metric (mean dense
// Chamfer over the validation pairs, normalized units) has not improved for
// `patience` steps, or max_steps if set. Returns the best-on-validation
// parameters. Aborts with a diagnostic naming the step on non-finite loss.
TrainResult train(const std::vector<TrainPair>& train_pairs,
                  const std::vector<TrainPair>& val_pairs, const ArchitectureConfig& arch,
                  const NormalizationTransform& norm, const TrainConfig& config,
                  std::ostream* log = nullptr,
                  const std::optional<std::filesystem::path>& checkpoint_path = std::nullopt);

// Mean over pairs of the mean per-class dense Chamfer (normalized units).
double validation_dense_chamfer(const ModelParameters& params,
                                const std::vector<TrainPair>& pairs);

}  // namespace pcd
