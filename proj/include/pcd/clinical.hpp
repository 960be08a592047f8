#pragma once

#include <optional>
#include <ostream>

#include "pcd/network.hpp"

namespace pcd {

constexpr double kMyocardialDensityGPerMl = 1.05;
constexpr int kDefaultSlabs = 20;

// Disc-summation chamber volume: project onto the principal long axis,
// partition into equal slabs, per-slab cross-section area times thickness.
// The cross-section is the polygon through per-sector mean radii around the
// slab centroid (the input is a surface sample, so the sector mean tracks
// the mid-plane contour; a convex hull would track the widest one).
// Input mm, output ml.
double chamber_volume_ml(const PointList& points, int n_slabs = kDefaultSlabs);

// 1.05 g/ml times the epi-endo volume difference.
double lv_mass_g(const PointList& endo, const PointList& epi, int n_slabs = kDefaultSlabs);

// (edv - esv) / edv * 100
double ejection_fraction_pct(double edv_ml, double esv_ml);

// |predicted - gold| / |gold| * 100  (gold-denominator convention)
double per_case_difference_pct(double predicted, double gold);

struct AnatomyMetrics {
    double lv_volume_ml = 0;
    double rv_volume_ml = 0;
    double lv_mass_g = 0;
};

AnatomyMetrics anatomy_metrics(const MultiClassPointCloud& cloud, int n_slabs = kDefaultSlabs);

struct FunctionMetrics {
    double lv_ef_pct = 0;
    double rv_ef_pct = 0;
};

// Principal axis of a point set (unit vector, sign arbitrary); exposed for
// the synthetic-geometry tests.
Vec3 principal_axis(const PointList& points);

// One evaluated case: the gold anatomy at both phases plus the predicted
// output-phase anatomy, all in mm.
struct ClinicalCase {
    std::string id;
    const MultiClassPointCloud* gold_input = nullptr;
    const MultiClassPointCloud* gold_output = nullptr;
    const MultiClassPointCloud* predicted_output = nullptr;
};

struct MetricStats {
    double gold_mean = 0, gold_sd = 0;
    double pred_mean = 0, pred_sd = 0;
    double diff_mean = 0, diff_sd = 0;  // per-case percentage differences
};

struct CaseMetricsRow {
    std::string id;
    // order: lv_vol_ml, rv_vol_ml, lv_mass_g, lv_ef_pct, rv_ef_pct
    std::array<double, 5> gold{};
    std::array<double, 5> predicted{};
    std::array<double, 5> diff_pct{};
};

struct EvaluationReport {
    Direction direction = Direction::kEd2Es;
    std::vector<CaseMetricsRow> cases;
    std::array<MetricStats, 5> stats;
    std::string method_note;

    static const std::array<const char*, 5> kMetricNames;

    void write_csv(std::ostream& out) const;
    void write_summary(std::ostream& out) const;
};

// Per-case metrics and population mean/SD. EF pairs the gold input-phase
// volume with the predicted output-phase volume (gold EF uses gold volumes at
// both phases). SD is the population form (divides by n), so a single case
// reports 0.
EvaluationReport evaluate_population(const std::vector<ClinicalCase>& cases, Direction direction,
                                     int n_slabs = kDefaultSlabs);

}  // namespace pcd
