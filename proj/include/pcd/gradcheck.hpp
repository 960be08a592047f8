#pragma once

#include <functional>
#include <string>
#include <vector>

namespace pcd::ad {

// Verification harness: compares backward() gradients against central finite
// differences. The function under test is re-evaluated through the provided
// closures so the check stays independent of any particular tape.
struct GradCheckProblem {
    // Scalar objective at the current parameter values (forward only).
    std::function<double()> value;
    // Analytic gradient at the current parameter values, flat, fixed order.
    std::function<std::vector<double>()> gradient;
    // Mutable access to the i-th scalar parameter.
    std::function<double&(size_t)> param;
    size_t size = 0;
    // Optional name per parameter index (for reporting).
    std::function<std::string(size_t)> name;
};

struct GradCheckReport {
    bool pass = false;
    double worst_relative_error = 0;
    size_t worst_index = 0;
    std::string worst_name;
    double worst_analytic = 0;
    double worst_numeric = 0;
    size_t checked = 0;
    double tolerance = 0;

    std::string str() const;
};

GradCheckReport finite_difference_check(const GradCheckProblem& problem, double step,
                                        double tolerance);

}  // namespace pcd::ad
