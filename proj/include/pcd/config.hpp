#pragma once

#include <filesystem>
#include <iosfwd>

#include "pcd/network.hpp"
#include "pcd/synthheart.hpp"
#include "pcd/training.hpp"

namespace pcd {

// Structured run configuration with sections [model], [train], [data],
// [paths]. Every field has a default; unknown sections or keys are rejected;
// the effective config is echoed into every output directory.
struct RunConfig {
    ArchitectureConfig model;
    TrainConfig train;

    struct Data {
        int n_normal = 500;
        int n_prevalent = 60;
        int n_incident = 60;
        double noise_mm = 0.35;
        double study_window_months = 120;
        double hazard_base = 0.006;
        double hazard_slope = 2.2;
        uint64_t seed = 7;
    } data;

    struct Paths {
        std::string workspace = "runs";
    } paths;

    CohortPriors cohort_priors() const;  // derived: points_per_class = model n / 3
    void validate() const;

    std::string serialize() const;
    static RunConfig parse(std::istream& in, const std::string& origin);
    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

}  // namespace pcd
