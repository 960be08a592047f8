#include "pcd/clinical.hpp"

#include <algorithm>
#include <cmath>

namespace pcd {

namespace {

// Jacobi eigensolver on the 3x3 covariance; returns the eigenvector of the
// largest eigenvalue.
Vec3 dominant_eigenvector(double c[3][3]) {
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = std::abs(c[0][1]) + std::abs(c[0][2]) + std::abs(c[1][2]);
        if (off < 1e-14) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(c[p][q]) < 1e-300) continue;
                double theta = (c[q][q] - c[p][p]) / (2.0 * c[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double cos_r = 1.0 / std::sqrt(t * t + 1.0);
                double sin_r = t * cos_r;
                for (int k = 0; k < 3; ++k) {
                    double ckp = c[k][p], ckq = c[k][q];
                    c[k][p] = cos_r * ckp - sin_r * ckq;
                    c[k][q] = sin_r * ckp + cos_r * ckq;
                }
                for (int k = 0; k < 3; ++k) {
                    double cpk = c[p][k], cqk = c[q][k];
                    c[p][k] = cos_r * cpk - sin_r * cqk;
                    c[q][k] = sin_r * cpk + cos_r * cqk;
                }
                for (int k = 0; k < 3; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = cos_r * vkp - sin_r * vkq;
                    v[k][q] = sin_r * vkp + cos_r * vkq;
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i < 3; ++i) {
        if (c[i][i] > c[best][best]) best = i;
    }
    Vec3 axis{v[0][best], v[1][best], v[2][best]};
    return axis / axis.norm();
}

constexpr double kPi = 3.14159265358979323846;

// Cross-section area of one slab of a surface cloud: polygon through the
// per-sector mean radii around the slab centroid, scaled so a circle is
// reproduced exactly. Points sit on the surface, so the sector mean tracks
// the contour at the slab's mid-plane (midpoint rule in the slab width)
// instead of its widest extent.
double polar_section_area(const std::vector<std::array<double, 2>>& pts) {
    if (pts.size() < 3) return 0;
    const int sectors = std::clamp(static_cast<int>(pts.size()) / 3, 6, 24);

    double cu = 0, cv = 0;
    for (const auto& p : pts) {
        cu += p[0];
        cv += p[1];
    }
    cu /= static_cast<double>(pts.size());
    cv /= static_cast<double>(pts.size());

    std::vector<double> radius_sum(sectors, 0.0);
    std::vector<int> count(sectors, 0);
    for (const auto& p : pts) {
        double du = p[0] - cu, dv = p[1] - cv;
        double theta = std::atan2(dv, du);  // [-pi, pi]
        int s = std::clamp(static_cast<int>((theta + kPi) / (2 * kPi) * sectors), 0, sectors - 1);
        radius_sum[s] += std::sqrt(du * du + dv * dv);
        count[s]++;
    }

    // Fill empty sectors by cyclic linear interpolation between neighbors.
    std::vector<double> radius(sectors, 0.0);
    int occupied = 0;
    for (int s = 0; s < sectors; ++s) {
        if (count[s] > 0) {
            radius[s] = radius_sum[s] / count[s];
            ++occupied;
        }
    }
    if (occupied == 0) return 0;
    if (occupied < sectors) {
        for (int s = 0; s < sectors; ++s) {
            if (count[s] > 0) continue;
            int prev = s, next = s, dp = 0, dn = 0;
            do {
                prev = (prev + sectors - 1) % sectors;
                ++dp;
            } while (count[prev] == 0);
            do {
                next = (next + 1) % sectors;
                ++dn;
            } while (count[next] == 0);
            radius[s] = (radius[prev] * dn + radius[next] * dp) / (dp + dn);
        }
    }

    const double step = 2 * kPi / sectors;
    double area = 0;
    for (int s = 0; s < sectors; ++s) {
        area += 0.5 * radius[s] * radius[(s + 1) % sectors] * std::sin(step);
    }
    return area * (step / std::sin(step));  // exact for circular contours
}

double disc_sum_mm3(const std::vector<double>& t, const std::vector<std::array<double, 2>>& uv,
                    double tmin, double tmax, int n_slabs) {
    const double thickness = (tmax - tmin) / n_slabs;
    if (!(thickness > 0)) return 0;
    std::vector<std::vector<std::array<double, 2>>> slabs(n_slabs);
    for (size_t i = 0; i < t.size(); ++i) {
        int s = static_cast<int>((t[i] - tmin) / thickness);
        s = std::clamp(s, 0, n_slabs - 1);
        slabs[s].push_back(uv[i]);
    }
    double volume = 0;
    for (const auto& slab : slabs) volume += polar_section_area(slab) * thickness;
    return volume;
}

}  // namespace

Vec3 principal_axis(const PointList& points) {
    if (points.size() < 3) throw ConfigError("principal_axis: need at least 3 points");
    Vec3 mean = centroid(points);
    double c[3][3] = {};
    for (const Vec3& p : points) {
        Vec3 d = p - mean;
        double dv[3] = {d.x, d.y, d.z};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) c[i][j] += dv[i] * dv[j];
        }
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) c[i][j] /= static_cast<double>(points.size());
    }
    return dominant_eigenvector(c);
}

double chamber_volume_ml(const PointList& points, int n_slabs) {
    if (points.size() < 50) {
        throw ConfigError("chamber_volume: need at least 50 points, got " +
                          std::to_string(points.size()));
    }
    if (n_slabs < 5) throw ConfigError("chamber_volume: need at least 5 slabs");

    Vec3 axis = principal_axis(points);
    // Orthonormal in-plane basis.
    Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 e1{axis.y * helper.z - axis.z * helper.y, axis.z * helper.x - axis.x * helper.z,
            axis.x * helper.y - axis.y * helper.x};
    e1 = e1 / e1.norm();
    Vec3 e2{axis.y * e1.z - axis.z * e1.y, axis.z * e1.x - axis.x * e1.z,
            axis.x * e1.y - axis.y * e1.x};

    Vec3 mean = centroid(points);
    std::vector<double> t(points.size());
    std::vector<std::array<double, 2>> uv(points.size());
    double tmin = 0, tmax = 0;
    for (size_t i = 0; i < points.size(); ++i) {
        Vec3 d = points[i] - mean;
        t[i] = d.dot(axis);
        uv[i] = {d.dot(e1), d.dot(e2)};
        if (i == 0) {
            tmin = tmax = t[i];
        } else {
            tmin = std::min(tmin, t[i]);
            tmax = std::max(tmax, t[i]);
        }
    }

    return disc_sum_mm3(t, uv, tmin, tmax, n_slabs) / 1000.0;
}

double lv_mass_g(const PointList& endo, const PointList& epi, int n_slabs) {
    double v_endo = chamber_volume_ml(endo, n_slabs);
    double v_epi = chamber_volume_ml(epi, n_slabs);
    if (v_epi <= v_endo) {
        throw ConfigError("lv_mass: epicardial volume (" + format_double(v_epi) +
                          " ml) must exceed endocardial volume (" + format_double(v_endo) +
                          " ml)");
    }
    return kMyocardialDensityGPerMl * (v_epi - v_endo);
}

double ejection_fraction_pct(double edv_ml, double esv_ml) {
    if (!(edv_ml > 0)) throw ConfigError("ejection_fraction: EDV must be positive");
    return (edv_ml - esv_ml) / edv_ml * 100.0;
}

double per_case_difference_pct(double predicted, double gold) {
    if (gold == 0) throw ConfigError("per_case_difference: gold value is zero");
    return std::abs(predicted - gold) / std::abs(gold) * 100.0;
}

AnatomyMetrics anatomy_metrics(const MultiClassPointCloud& cloud, int n_slabs) {
    cloud.validate();
    PointList endo = cloud.class_points(kLvEndo);
    PointList epi = cloud.class_points(kLvEpi);
    PointList rv = cloud.class_points(kRvEndo);
    AnatomyMetrics m;
    m.lv_volume_ml = chamber_volume_ml(endo, n_slabs);
    m.rv_volume_ml = chamber_volume_ml(rv, n_slabs);
    m.lv_mass_g = lv_mass_g(endo, epi, n_slabs);
    return m;
}

const std::array<const char*, 5> EvaluationReport::kMetricNames = {
    "lv_vol_ml", "rv_vol_ml", "lv_mass_g", "lv_ef_pct", "rv_ef_pct"};

namespace {

MetricStats column_stats(const std::vector<CaseMetricsRow>& rows, int metric) {
    MetricStats s;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        s.gold_mean += r.gold[metric];
        s.pred_mean += r.predicted[metric];
        s.diff_mean += r.diff_pct[metric];
    }
    s.gold_mean /= n;
    s.pred_mean /= n;
    s.diff_mean /= n;
    for (const auto& r : rows) {
        s.gold_sd += (r.gold[metric] - s.gold_mean) * (r.gold[metric] - s.gold_mean);
        s.pred_sd += (r.predicted[metric] - s.pred_mean) * (r.predicted[metric] - s.pred_mean);
        s.diff_sd += (r.diff_pct[metric] - s.diff_mean) * (r.diff_pct[metric] - s.diff_mean);
    }
    s.gold_sd = std::sqrt(s.gold_sd / n);
    s.pred_sd = std::sqrt(s.pred_sd / n);
    s.diff_sd = std::sqrt(s.diff_sd / n);
    return s;
}

}  // namespace

EvaluationReport evaluate_population(const std::vector<ClinicalCase>& cases, Direction direction,
                                     int n_slabs) {
    if (cases.empty()) throw ConfigError("evaluate_population: no cases");
    EvaluationReport report;
    report.direction = direction;
    report.method_note =
        "volumes: disc summation over principal-axis slabs (" + std::to_string(n_slabs) +
        " slabs) with polar-sector mean-radius cross-sections; crescent-shaped RV slices are "
        "approximated by a star-shaped contour and carry a known bias; per-case differences "
        "normalized by the gold value; EF pairs the gold input-phase volume with the predicted "
        "output-phase volume";

    for (const ClinicalCase& c : cases) {
        if (!c.gold_input || !c.gold_output || !c.predicted_output) {
            throw ConfigError("evaluate_population: case " + c.id + " is missing a cloud");
        }
        AnatomyMetrics gold_out = anatomy_metrics(*c.gold_output, n_slabs);
        AnatomyMetrics pred_out = anatomy_metrics(*c.predicted_output, n_slabs);
        AnatomyMetrics gold_in = anatomy_metrics(*c.gold_input, n_slabs);

        // EDV/ESV assignment depends on which phase is the input.
        double gold_lv_ef, gold_rv_ef, pred_lv_ef, pred_rv_ef;
        if (direction == Direction::kEd2Es) {
            gold_lv_ef = ejection_fraction_pct(gold_in.lv_volume_ml, gold_out.lv_volume_ml);
            gold_rv_ef = ejection_fraction_pct(gold_in.rv_volume_ml, gold_out.rv_volume_ml);
            pred_lv_ef = ejection_fraction_pct(gold_in.lv_volume_ml, pred_out.lv_volume_ml);
            pred_rv_ef = ejection_fraction_pct(gold_in.rv_volume_ml, pred_out.rv_volume_ml);
        } else {
            gold_lv_ef = ejection_fraction_pct(gold_out.lv_volume_ml, gold_in.lv_volume_ml);
            gold_rv_ef = ejection_fraction_pct(gold_out.rv_volume_ml, gold_in.rv_volume_ml);
            pred_lv_ef = ejection_fraction_pct(pred_out.lv_volume_ml, gold_in.lv_volume_ml);
            pred_rv_ef = ejection_fraction_pct(pred_out.rv_volume_ml, gold_in.rv_volume_ml);
        }

        CaseMetricsRow row;
        row.id = c.id;
        row.gold = {gold_out.lv_volume_ml, gold_out.rv_volume_ml, gold_out.lv_mass_g, gold_lv_ef,
                    gold_rv_ef};
        row.predicted = {pred_out.lv_volume_ml, pred_out.rv_volume_ml, pred_out.lv_mass_g,
                         pred_lv_ef, pred_rv_ef};
        for (int m = 0; m < 5; ++m) {
            row.diff_pct[m] = per_case_difference_pct(row.predicted[m], row.gold[m]);
        }
        report.cases.push_back(std::move(row));
    }

    for (int m = 0; m < 5; ++m) report.stats[m] = column_stats(report.cases, m);
    return report;
}

void EvaluationReport::write_csv(std::ostream& out) const {
    out << "subject_id";
    for (const char* name : kMetricNames) {
        out << ",gold_" << name << ",pred_" << name << ",diff_" << name << "_pct";
    }
    out << '\n';
    for (const auto& row : cases) {
        out << row.id;
        for (int m = 0; m < 5; ++m) {
            out << ',' << format_double(row.gold[m]) << ',' << format_double(row.predicted[m])
                << ',' << format_double(row.diff_pct[m]);
        }
        out << '\n';
    }
}

void EvaluationReport::write_summary(std::ostream& out) const {
    out << "[clinical summary]\n";
    out << "direction = " << direction_name(direction) << "\n";
    out << "cases = " << cases.size() << "\n";
    for (int m = 0; m < 5; ++m) {
        out << kMetricNames[m] << " = gold " << format_double(stats[m].gold_mean) << " (sd "
            << format_double(stats[m].gold_sd) << "), predicted "
            << format_double(stats[m].pred_mean) << " (sd " << format_double(stats[m].pred_sd)
            << "), per-case diff % " << format_double(stats[m].diff_mean) << " (sd "
            << format_double(stats[m].diff_sd) << ")\n";
    }
    out << "method = " << method_note << "\n";
}

}  // namespace pcd
