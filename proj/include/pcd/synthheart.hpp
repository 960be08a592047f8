#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcd/geometry.hpp"

namespace pcd {

// Idealized biventricular phantom: LV = truncated prolate ellipsoid pair
// (endo/epi), RV = crescent formed by the part of a displaced ellipsoid lying
// outside the LV epicardium. Canonical frame: long axis along z, apex at -c,
// base plane at +base_height.
struct HeartParams {
    Vec3 lv_semi_axes{25, 25, 45};  // mm, (a, b, c); c is the long axis
    double wall_thickness = 10;     // mm, added to each LV semi-axis for the epicardium
    double rv_offset = 32;          // mm, RV ellipsoid center displacement along +x
    double rv_scale = 1.05;         // RV semi-axes = rv_scale * LV epi semi-axes
    double base_height = 14;        // mm, truncation plane above center
    Vec3 orientation{0, 0, 0};      // Euler angles (z-y-x), radians
    double global_scale = 1.0;

    void validate() const;
};

struct DeformationParams {
    double radial_fraction = 0.25;        // contraction toward the LV long axis, [0,1)
    double longitudinal_fraction = 0.18;  // shortening toward the base, [0,1)
    double wall_thickening = 0.35;        // epicardial radial fraction reduction, [0,1)
    double akinesia_center = 0;           // sector azimuth, radians
    double akinesia_width = 0;            // sector angular width, [0, 2*pi)
    double akinesia_attenuation = 0;      // contraction loss inside the sector, [0,1)
    double noise_mm = 0;                  // isotropic Gaussian jitter on the ES cloud

    void validate() const;
};

enum class Group { kNormal, kPrevalentMi, kIncidentMi };
const char* group_name(Group g);
Group parse_group(const std::string& s);

struct SubjectRecord {
    std::string id;
    MultiClassPointCloud ed;
    MultiClassPointCloud es;
    Group group = Group::kNormal;
    bool event = false;    // incident-MI implies event=true
    double months = 0;     // time to event, or censoring time

    void validate() const;
};

// Truncated-ellipsoid LV endo/epi and crescent RV surfaces, uniformly sampled
// by area, labeled, in mm.
MultiClassPointCloud generate_ed(const HeartParams& params, int points_per_class, uint64_t seed);

// Analytic contraction map: radial scaling toward the LV long axis,
// longitudinal shortening toward the base, reduced radial contraction for the
// epicardial class (wall thickening), sector-masked attenuation, then
// isotropic Gaussian jitter. The frame is inferred from `params`, which must
// be the ones the ED cloud was generated with.
MultiClassPointCloud deform_to_es(const MultiClassPointCloud& ed, const HeartParams& params,
                                  const DeformationParams& dp, uint64_t seed);

// Deformation map evaluated on a canonical-frame point (no noise); exposed so
// the fold-over (positive Jacobian) property can be checked directly.
Vec3 contraction_map(const Vec3& p, int cls, const DeformationParams& dp, double base_height);

// Distribution parameters for cohort generation. Severity in [0,1] drives the
// MI phenotype (dilation, wall thinning, reduced contraction, akinesia) and
// the incident-MI event hazard, so downstream analyses have a recoverable
// signal.
struct CohortPriors {
    int points_per_class = 256;
    double noise_mm = 0.35;
    double study_window_months = 120;
    double hazard_base = 0.006;   // events per month at severity 0
    double hazard_slope = 2.2;    // log-hazard increase per unit severity

    void validate() const;
};

struct CohortCase {
    SubjectRecord record;
    HeartParams heart;
    DeformationParams deformation;
    double severity = 0;  // 0 for normal cases
};

struct Cohort {
    std::vector<CohortCase> cases;
};

Cohort generate_cohort(int n_normal, int n_prevalent_mi, int n_incident_mi, uint64_t seed,
                       const CohortPriors& priors = {});

// Manifest CSV line format: subject_id,ed_path,es_path,group,event,months
std::string manifest_header();

}  // namespace pcd
