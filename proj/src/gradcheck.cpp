#include "pcd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pcd/common.hpp"

namespace pcd::ad {

std::string GradCheckReport::str() const {
    std::string s = pass ? "PASS" : "FAIL";
    s += ": worst relative error " + format_double(worst_relative_error);
    s += " (tolerance " + format_double(tolerance) + ")";
    s += " at index " + std::to_string(worst_index);
    if (!worst_name.empty()) s += " [" + worst_name + "]";
    s += ", analytic " + format_double(worst_analytic);
    s += ", central-difference " + format_double(worst_numeric);
    s += ", " + std::to_string(checked) + " parameters checked";
    return s;
}

GradCheckReport finite_difference_check(const GradCheckProblem& problem, double step,
                                        double tolerance) {
    GradCheckReport report;
    report.tolerance = tolerance;
    report.checked = problem.size;

    std::vector<double> analytic = problem.gradient();
    if (analytic.size() != problem.size) {
        throw NumericError("finite_difference_check: gradient size " +
                           std::to_string(analytic.size()) + " does not match parameter count " +
                           std::to_string(problem.size));
    }

    double worst = 0;
    for (size_t i = 0; i < problem.size; ++i) {
        double& p = problem.param(i);
        const double saved = p;
        p = saved + step;
        double up = problem.value();
        p = saved - step;
        double down = problem.value();
        p = saved;

        double numeric = (up - down) / (2.0 * step);
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel >= worst) {
            worst = rel;
            report.worst_index = i;
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
            if (problem.name) report.worst_name = problem.name(i);
        }
    }
    report.worst_relative_error = worst;
    report.pass = worst < tolerance;
    return report;
}

}  // namespace pcd::ad
