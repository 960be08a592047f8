#include "pcd/synthheart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace pcd {

namespace {

constexpr double kPi = 3.14159265358979323846;

// z-y-x Euler rotation.
Vec3 rotate(const Vec3& p, const Vec3& angles) {
    double cz = std::cos(angles.z), sz = std::sin(angles.z);
    double cy = std::cos(angles.y), sy = std::sin(angles.y);
    double cx = std::cos(angles.x), sx = std::sin(angles.x);
    Vec3 a{cz * p.x - sz * p.y, sz * p.x + cz * p.y, p.z};
    Vec3 b{cy * a.x + sy * a.z, a.y, -sy * a.x + cy * a.z};
    return {b.x, cx * b.y - sx * b.z, sx * b.y + cx * b.z};
}

Vec3 unrotate(const Vec3& p, const Vec3& angles) {
    double cz = std::cos(angles.z), sz = std::sin(angles.z);
    double cy = std::cos(angles.y), sy = std::sin(angles.y);
    double cx = std::cos(angles.x), sx = std::sin(angles.x);
    Vec3 a{p.x, cx * p.y + sx * p.z, -sx * p.y + cx * p.z};
    Vec3 b{cy * a.x - sy * a.z, a.y, sy * a.x + cy * a.z};
    return {cz * b.x + sz * b.y, -sz * b.x + cz * b.y, b.z};
}

Vec3 sphere_direction(Rng& rng) {
    while (true) {
        Vec3 d{rng.normal(), rng.normal(), rng.normal()};
        double n = d.norm();
        if (n > 1e-12) return d / n;
    }
}

// Uniform-by-area sampling on the ellipsoid (a,b,c): map a uniform sphere
// direction and accept proportionally to the local area distortion.
Vec3 sample_ellipsoid(Rng& rng, const Vec3& semi) {
    const double gmax = std::max({semi.y * semi.z, semi.x * semi.z, semi.x * semi.y});
    while (true) {
        Vec3 d = sphere_direction(rng);
        double g = std::sqrt(std::pow(semi.y * semi.z * d.x, 2) +
                             std::pow(semi.x * semi.z * d.y, 2) +
                             std::pow(semi.x * semi.y * d.z, 2));
        if (rng.uniform() * gmax <= g) {
            return {semi.x * d.x, semi.y * d.y, semi.z * d.z};
        }
    }
}

bool inside_ellipsoid(const Vec3& p, const Vec3& center, const Vec3& semi) {
    double u = (p.x - center.x) / semi.x;
    double v = (p.y - center.y) / semi.y;
    double w = (p.z - center.z) / semi.z;
    return u * u + v * v + w * w < 1.0;
}

// Smooth sector weight in [0,1]: 1 at the sector center, 0 outside.
double sector_weight(double theta, double center, double width) {
    if (width <= 0) return 0;
    double d = std::remainder(theta - center, 2 * kPi);
    double t = std::abs(d) / (0.5 * width);
    if (t >= 1.0) return 0;
    return 0.5 * (1.0 + std::cos(kPi * t));
}

constexpr int kMaxRejectionFactor = 20000;

}  // namespace

void HeartParams::validate() const {
    if (!(lv_semi_axes.x > 0 && lv_semi_axes.y > 0 && lv_semi_axes.z > 0)) {
        throw ConfigError("heart: LV semi-axes must be positive");
    }
    if (!(wall_thickness > 0)) throw ConfigError("heart: wall thickness must be positive");
    if (!(rv_scale > 0)) throw ConfigError("heart: rv_scale must be positive");
    if (!(global_scale > 0)) throw ConfigError("heart: global_scale must be positive");
    if (!(base_height > -lv_semi_axes.z && base_height < lv_semi_axes.z)) {
        throw ConfigError("heart: base plane must cut the LV ellipsoid");
    }
}

void DeformationParams::validate() const {
    auto in_unit = [](double v) { return v >= 0 && v < 1; };
    if (!in_unit(radial_fraction) || !in_unit(longitudinal_fraction) || !in_unit(wall_thickening) ||
        !in_unit(akinesia_attenuation)) {
        throw ConfigError("deformation: fractions must lie in [0,1)");
    }
    if (akinesia_width < 0 || akinesia_width >= 2 * kPi) {
        throw ConfigError("deformation: akinesia width must lie in [0, 2*pi)");
    }
    if (noise_mm < 0) throw ConfigError("deformation: noise amplitude must be non-negative");
}

const char* group_name(Group g) {
    switch (g) {
        case Group::kNormal: return "normal";
        case Group::kPrevalentMi: return "prevalent_mi";
        case Group::kIncidentMi: return "incident_mi";
    }
    return "unknown";
}

Group parse_group(const std::string& s) {
    if (s == "normal") return Group::kNormal;
    if (s == "prevalent_mi") return Group::kPrevalentMi;
    if (s == "incident_mi") return Group::kIncidentMi;
    throw ConfigError("unknown group '" + s + "'");
}

void SubjectRecord::validate() const {
    ed.validate();
    es.validate();
    if (group == Group::kIncidentMi && !event) {
        throw ConfigError("subject " + id + ": incident-MI cases must carry an event");
    }
    if (!(months > 0)) throw ConfigError("subject " + id + ": months must be positive");
}

void CohortPriors::validate() const {
    if (points_per_class < 64) throw ConfigError("cohort: points_per_class must be at least 64");
    if (noise_mm < 0) throw ConfigError("cohort: noise must be non-negative");
    if (!(study_window_months > 1)) throw ConfigError("cohort: study window too short");
    if (!(hazard_base > 0)) throw ConfigError("cohort: hazard_base must be positive");
}

MultiClassPointCloud generate_ed(const HeartParams& params, int points_per_class, uint64_t seed) {
    params.validate();
    if (points_per_class < 64) {
        throw ConfigError("generate_ed: points_per_class must be at least 64");
    }

    const Vec3 endo = params.lv_semi_axes;
    const Vec3 epi = {endo.x + params.wall_thickness, endo.y + params.wall_thickness,
                      endo.z + params.wall_thickness};
    const Vec3 rv_semi = epi * params.rv_scale;
    const Vec3 rv_center{params.rv_offset, 0, 0};

    Rng rng(seed);
    MultiClassPointCloud cloud;
    cloud.points.reserve(static_cast<size_t>(points_per_class) * kNumClasses);

    auto sample_class = [&](int cls) {
        int accepted = 0;
        int attempts = 0;
        const int max_attempts = points_per_class * kMaxRejectionFactor;
        while (accepted < points_per_class) {
            if (++attempts > max_attempts) {
                throw ConfigError(std::string("generate_ed: cannot sample class ") +
                                  class_name(cls) + "; geometry parameters leave no surface");
            }
            Vec3 p;
            switch (cls) {
                case kLvEndo: p = sample_ellipsoid(rng, endo); break;
                case kLvEpi: p = sample_ellipsoid(rng, epi); break;
                default:
                    p = sample_ellipsoid(rng, rv_semi) + rv_center;
                    // Crescent: keep the part of the RV surface outside the
                    // LV epicardial ellipsoid.
                    if (inside_ellipsoid(p, {0, 0, 0}, epi)) continue;
                    break;
            }
            if (p.z > params.base_height) continue;  // truncate above the base plane
            cloud.push_back(p, static_cast<uint8_t>(cls));
            ++accepted;
        }
    };
    for (int cls = 0; cls < kNumClasses; ++cls) sample_class(cls);

    for (Vec3& p : cloud.points) p = rotate(p, params.orientation) * params.global_scale;
    return cloud;
}

Vec3 contraction_map(const Vec3& p, int cls, const DeformationParams& dp, double base_height) {
    double theta = std::atan2(p.y, p.x);
    double atten = 1.0 - dp.akinesia_attenuation *
                             sector_weight(theta, dp.akinesia_center, dp.akinesia_width);
    double radial = dp.radial_fraction * atten;
    if (cls == kLvEpi) radial *= (1.0 - dp.wall_thickening);
    double rscale = 1.0 - radial;
    double zs = base_height + (p.z - base_height) * (1.0 - dp.longitudinal_fraction);
    return {p.x * rscale, p.y * rscale, zs};
}

MultiClassPointCloud deform_to_es(const MultiClassPointCloud& ed, const HeartParams& params,
                                  const DeformationParams& dp, uint64_t seed) {
    ed.validate();
    params.validate();
    dp.validate();

    Rng rng(seed);
    MultiClassPointCloud es;
    es.labels = ed.labels;
    es.points.reserve(ed.points.size());
    for (size_t i = 0; i < ed.points.size(); ++i) {
        // Back to the canonical frame, contract, then restore the pose.
        Vec3 canon = unrotate(ed.points[i] / params.global_scale, params.orientation);
        Vec3 moved = contraction_map(canon, ed.labels[i], dp, params.base_height);
        if (dp.noise_mm > 0) {
            moved += Vec3{rng.normal(0, dp.noise_mm), rng.normal(0, dp.noise_mm),
                          rng.normal(0, dp.noise_mm)};
        }
        es.points.push_back(rotate(moved, params.orientation) * params.global_scale);
    }
    return es;
}

namespace {

struct MiDraw {
    HeartParams heart;
    DeformationParams deformation;
    double severity = 0;
};

HeartParams draw_normal_heart(Rng& rng) {
    HeartParams hp;
    double a = rng.uniform(20, 27);
    hp.lv_semi_axes = {a, a * rng.uniform(0.90, 1.05), rng.uniform(42, 52)};
    hp.wall_thickness = rng.uniform(8, 12);
    hp.rv_offset = rng.uniform(30, 40);
    hp.rv_scale = rng.uniform(0.95, 1.15);
    hp.base_height = rng.uniform(0.22, 0.38) * hp.lv_semi_axes.z;
    hp.orientation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    hp.global_scale = rng.uniform(0.95, 1.05);
    return hp;
}

DeformationParams draw_normal_deformation(Rng& rng, double noise_mm) {
    DeformationParams dp;
    dp.radial_fraction = rng.uniform(0.22, 0.34);
    dp.longitudinal_fraction = rng.uniform(0.14, 0.26);
    dp.wall_thickening = rng.uniform(0.25, 0.45);
    dp.noise_mm = noise_mm;
    return dp;
}

// The MI phenotype, driven by one severity scalar plus small noise: spherical
// remodeling (short-axis dilation with a near-constant long axis), wall
// thinning, mildly reduced global contraction, and a severity-scaled akinetic
// sector. Contraction overlaps the normal prior so single-valued EF separates
// the groups only weakly while the 3D shape carries the stronger signal.
MiDraw draw_mi(Rng& rng, double noise_mm) {
    MiDraw d;
    double s = rng.uniform();
    d.severity = s;

    HeartParams& hp = d.heart;
    double a = 24.0 + 7.5 * s + rng.uniform(-1.0, 1.0);
    hp.lv_semi_axes = {a, a * rng.uniform(0.92, 1.06), 46.0 - 6.0 * s + rng.uniform(-1.5, 1.5)};
    hp.wall_thickness = std::max(4.0, 9.5 - 3.5 * s + rng.uniform(-0.5, 0.5));
    hp.rv_offset = rng.uniform(30, 40) + 4.0 * s;
    hp.rv_scale = rng.uniform(0.95, 1.15);
    hp.base_height = rng.uniform(0.22, 0.38) * hp.lv_semi_axes.z;
    hp.orientation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    hp.global_scale = rng.uniform(0.95, 1.05);

    DeformationParams& dp = d.deformation;
    dp.radial_fraction = std::max(0.05, 0.27 - 0.04 * s + rng.uniform(-0.015, 0.015));
    dp.longitudinal_fraction = std::max(0.04, 0.195 - 0.025 * s + rng.uniform(-0.01, 0.01));
    dp.wall_thickening = rng.uniform(0.10, 0.30);
    dp.akinesia_center = rng.uniform(0, 2 * kPi);
    dp.akinesia_width = kPi / 2 + s * (kPi - kPi / 2) + rng.uniform(-0.1, 0.1);
    dp.akinesia_width = std::clamp(dp.akinesia_width, 0.0, 2 * kPi - 1e-9);
    dp.akinesia_attenuation = std::clamp(0.32 + 0.38 * s + rng.uniform(-0.04, 0.04), 0.0, 0.95);
    dp.noise_mm = noise_mm;
    return d;
}

}  // namespace

Cohort generate_cohort(int n_normal, int n_prevalent_mi, int n_incident_mi, uint64_t seed,
                       const CohortPriors& priors) {
    if (n_normal < 0 || n_prevalent_mi < 0 || n_incident_mi < 0) {
        throw ConfigError("generate_cohort: counts must be non-negative");
    }
    priors.validate();

    Cohort cohort;
    cohort.cases.reserve(static_cast<size_t>(n_normal + n_prevalent_mi + n_incident_mi));
    Rng root(seed);

    auto add_case = [&](int index, Group group) {
        Rng rng = root.fork(Rng::mix(static_cast<uint64_t>(index), 0xCA5E));
        CohortCase cc;
        cc.record.group = group;

        if (group == Group::kNormal) {
            cc.heart = draw_normal_heart(rng);
            cc.deformation = draw_normal_deformation(rng, priors.noise_mm);
            cc.severity = 0;
        } else {
            MiDraw d = draw_mi(rng, priors.noise_mm);
            cc.heart = d.heart;
            cc.deformation = d.deformation;
            cc.severity = d.severity;
        }

        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "S%05d", index);
        cc.record.id = idbuf;
        cc.record.ed = generate_ed(cc.heart, priors.points_per_class, rng.next_u64());
        cc.record.es = deform_to_es(cc.record.ed, cc.heart, cc.deformation, rng.next_u64());

        if (group == Group::kIncidentMi) {
            // Proportional-hazards event model: higher severity, earlier event.
            double lambda = priors.hazard_base * std::exp(priors.hazard_slope * cc.severity);
            double t = -std::log(std::max(rng.uniform(), 1e-12)) / lambda;
            cc.record.months = std::clamp(t, 1.0, priors.study_window_months - 1.0);
            cc.record.event = true;
        } else {
            cc.record.months =
                rng.uniform(priors.study_window_months / 5.0, priors.study_window_months);
            cc.record.event = false;
        }
        cohort.cases.push_back(std::move(cc));
    };

    int index = 0;
    for (int i = 0; i < n_normal; ++i) add_case(index++, Group::kNormal);
    for (int i = 0; i < n_prevalent_mi; ++i) add_case(index++, Group::kPrevalentMi);
    for (int i = 0; i < n_incident_mi; ++i) add_case(index++, Group::kIncidentMi);
    return cohort;
}

std::string manifest_header() { return "subject_id,ed_path,es_path,group,event,months"; }

}  // namespace pcd
