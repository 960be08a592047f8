#pragma once

#include <span>

#include "pcd/network.hpp"
#include "pcd/synthheart.hpp"

namespace pcd {

// Row-major feature matrix with joined labels/outcomes.
struct LatentDataset {
    size_t cases = 0;
    size_t dim = 0;
    std::vector<double> features;  // cases x dim
    std::vector<std::string> ids;

    std::span<const double> row(size_t i) const { return {features.data() + i * dim, dim}; }
};

// One z-vector per record by passing the direction's input-phase cloud
// through the encoder. Deterministic and invariant to point order.
LatentDataset extract_latents(const std::vector<const SubjectRecord*>& records,
                              const ModelParameters& params, Direction direction);

// Per-feature mean/SD estimated on training rows only.
struct StandardScaler {
    std::vector<double> mean;
    std::vector<double> sd;

    static StandardScaler fit(const std::vector<std::span<const double>>& rows);
    std::vector<double> transform(std::span<const double> row) const;
};

struct KsResult {
    double d = 0;
    double p_value = 1;
    size_t n_a = 0, n_b = 0;
};

// Two-sample Kolmogorov-Smirnov: D over the merged sample points; p-value
// from the asymptotic Kolmogorov distribution at effective size
// n_a*n_b/(n_a+n_b).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0;
    bool converged = false;
    int iterations = 0;

    double predict_probability(std::span<const double> x) const;
};

// L2-penalized logistic regression by damped Newton iterations with
// backtracking; converged when the gradient norm drops below 1e-8. The
// intercept is not penalized.
LogisticModel logistic_fit(const std::vector<std::span<const double>>& rows,
                           const std::vector<int>& labels, double l2_strength);

struct ClassificationMetrics {
    double accuracy = 0;
    double auroc = 0;
    double f1 = 0;
    double precision = 0;
    double recall = 0;
};

// Threshold metrics at 0.5 plus rank-statistic AUROC (ties count 1/2).
ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             const std::vector<int>& labels,
                                             double threshold = 0.5);

// Stratified k-fold cross-validation of the logistic model; standardization
// constants are fit on each training fold only; fold metrics are averaged.
ClassificationMetrics kfold_cv_classify(const LatentDataset& data, const std::vector<int>& labels,
                                        int k, double l2_strength, uint64_t seed);

struct SurvivalFit {
    std::vector<double> coefficients;
    bool converged = false;
    int iterations = 0;
    double concordance = 0;  // Harrell's C on the fitted data

    double risk_score(std::span<const double> x) const;  // linear predictor
};

// Cox proportional hazards partial likelihood (Breslow ties), Newton with
// backtracking and a small L2 ridge for stability.
SurvivalFit cox_fit(const std::vector<std::span<const double>>& rows,
                    const std::vector<int>& events, const std::vector<double>& times,
                    double ridge = 1e-6);

// Concordant / comparable pairs; a pair is comparable iff the smaller time
// carries an event; risk ties count 1/2.
double harrell_c(std::span<const double> risks, const std::vector<int>& events,
                 const std::vector<double>& times);

// Event-stratified k-fold CV for the Cox model: fit on training folds
// (standardized), score Harrell's C on each test fold, average.
double kfold_cv_cox(const LatentDataset& data, const std::vector<int>& events,
                    const std::vector<double>& times, int k, uint64_t seed, double ridge = 1e-6);

// Deterministic stratified fold assignment: per stratum, shuffled round-robin.
std::vector<int> stratified_folds(const std::vector<int>& strata, int k, uint64_t seed);

}  // namespace pcd
