#include "pcd/config.hpp"

#include <fstream>
#include <sstream>

namespace pcd {

namespace {

std::string widths_str(const std::vector<int>& w) {
    std::string s;
    for (size_t i = 0; i < w.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(w[i]);
    }
    return s;
}

std::vector<int> parse_widths(const std::string& s, const std::string& ctx) {
    std::vector<int> out;
    for (const std::string& part : split(s, ',')) {
        out.push_back(static_cast<int>(parse_int(part, ctx)));
    }
    return out;
}

std::string breakpoints_str(const std::map<int64_t, double>& bp) {
    std::string s;
    for (const auto& [step, alpha] : bp) {
        if (!s.empty()) s += ",";
        s += std::to_string(step) + ":" + format_double(alpha);
    }
    return s;
}

std::map<int64_t, double> parse_breakpoints(const std::string& s, const std::string& ctx) {
    std::map<int64_t, double> out;
    for (const std::string& part : split(s, ',')) {
        auto kv = split(part, ':');
        if (kv.size() != 2) {
            throw ConfigError(ctx + ": breakpoint '" + part + "' is not step:alpha");
        }
        out[parse_int(kv[0], ctx)] = parse_double(kv[1], ctx);
    }
    return out;
}

}  // namespace

CohortPriors RunConfig::cohort_priors() const {
    CohortPriors p;
    p.points_per_class = model.input_points / kNumClasses;
    p.noise_mm = data.noise_mm;
    p.study_window_months = data.study_window_months;
    p.hazard_base = data.hazard_base;
    p.hazard_slope = data.hazard_slope;
    return p;
}

void RunConfig::validate() const {
    model.validate();
    train.validate();
    if (data.n_normal < 0 || data.n_prevalent < 0 || data.n_incident < 0) {
        throw ConfigError("config: cohort counts must be non-negative");
    }
    cohort_priors().validate();
    if (paths.workspace.empty()) throw ConfigError("config: workspace path must not be empty");
}

std::string RunConfig::serialize() const {
    std::ostringstream out;
    out << "[model]\n";
    out << "n = " << model.input_points << "\n";
    out << "m = " << model.coarse_points << "\n";
    out << "grid_side = " << model.grid_side << "\n";
    out << "z = " << model.latent_dim << "\n";
    out << "pointnet1_widths = " << widths_str(model.pointnet1_widths) << "\n";
    out << "pointnet2_widths = " << widths_str(model.pointnet2_widths) << "\n";
    out << "latent_mlp_widths = " << widths_str(model.latent_mlp_widths) << "\n";
    out << "coarse_mlp_widths = " << widths_str(model.coarse_mlp_widths) << "\n";
    out << "folding_mlp_widths = " << widths_str(model.folding_mlp_widths) << "\n";
    out << "grid_extent = " << format_double(model.grid_extent) << "\n";
    out << "\n[train]\n";
    out << "learning_rate = " << format_double(train.adam.learning_rate) << "\n";
    out << "beta1 = " << format_double(train.adam.beta1) << "\n";
    out << "beta2 = " << format_double(train.adam.beta2) << "\n";
    out << "epsilon = " << format_double(train.adam.epsilon) << "\n";
    out << "batch_size = " << train.batch_size << "\n";
    out << "alpha_breakpoints = " << breakpoints_str(train.alpha_breakpoints) << "\n";
    out << "patience = " << train.patience << "\n";
    out << "validation_interval = " << train.validation_interval << "\n";
    out << "max_steps = " << train.max_steps << "\n";
    out << "train_fraction = " << format_double(train.train_fraction) << "\n";
    out << "val_fraction = " << format_double(train.val_fraction) << "\n";
    out << "test_fraction = " << format_double(train.test_fraction) << "\n";
    out << "seed = " << train.seed << "\n";
    out << "threads = " << train.threads << "\n";
    out << "\n[data]\n";
    out << "n_normal = " << data.n_normal << "\n";
    out << "n_prevalent = " << data.n_prevalent << "\n";
    out << "n_incident = " << data.n_incident << "\n";
    out << "noise_mm = " << format_double(data.noise_mm) << "\n";
    out << "study_window_months = " << format_double(data.study_window_months) << "\n";
    out << "hazard_base = " << format_double(data.hazard_base) << "\n";
    out << "hazard_slope = " << format_double(data.hazard_slope) << "\n";
    out << "seed = " << data.seed << "\n";
    out << "\n[paths]\n";
    out << "workspace = " << paths.workspace << "\n";
    return out.str();
}

RunConfig RunConfig::parse(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section");
            }
            section = t.substr(1, t.size() - 2);
            if (section != "model" && section != "train" && section != "data" &&
                section != "paths") {
                throw ConfigError(origin + ": unknown section [" + section + "]");
            }
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        const std::string ctx = origin + " [" + section + "] " + key;

        if (section == "model") {
            if (key == "n") cfg.model.input_points = static_cast<int>(parse_int(value, ctx));
            else if (key == "m") cfg.model.coarse_points = static_cast<int>(parse_int(value, ctx));
            else if (key == "grid_side") cfg.model.grid_side = static_cast<int>(parse_int(value, ctx));
            else if (key == "z") cfg.model.latent_dim = static_cast<int>(parse_int(value, ctx));
            else if (key == "pointnet1_widths") cfg.model.pointnet1_widths = parse_widths(value, ctx);
            else if (key == "pointnet2_widths") cfg.model.pointnet2_widths = parse_widths(value, ctx);
            else if (key == "latent_mlp_widths") cfg.model.latent_mlp_widths = parse_widths(value, ctx);
            else if (key == "coarse_mlp_widths") cfg.model.coarse_mlp_widths = parse_widths(value, ctx);
            else if (key == "folding_mlp_widths") cfg.model.folding_mlp_widths = parse_widths(value, ctx);
            else if (key == "grid_extent") cfg.model.grid_extent = parse_double(value, ctx);
            else throw ConfigError(ctx + ": unknown key");
        } else if (section == "train") {
            if (key == "learning_rate") cfg.train.adam.learning_rate = parse_double(value, ctx);
            else if (key == "beta1") cfg.train.adam.beta1 = parse_double(value, ctx);
            else if (key == "beta2") cfg.train.adam.beta2 = parse_double(value, ctx);
            else if (key == "epsilon") cfg.train.adam.epsilon = parse_double(value, ctx);
            else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(value, ctx));
            else if (key == "alpha_breakpoints") cfg.train.alpha_breakpoints = parse_breakpoints(value, ctx);
            else if (key == "patience") cfg.train.patience = parse_int(value, ctx);
            else if (key == "validation_interval") cfg.train.validation_interval = parse_int(value, ctx);
            else if (key == "max_steps") cfg.train.max_steps = parse_int(value, ctx);
            else if (key == "train_fraction") cfg.train.train_fraction = parse_double(value, ctx);
            else if (key == "val_fraction") cfg.train.val_fraction = parse_double(value, ctx);
            else if (key == "test_fraction") cfg.train.test_fraction = parse_double(value, ctx);
            else if (key == "seed") cfg.train.seed = static_cast<uint64_t>(parse_int(value, ctx));
            else if (key == "threads") cfg.train.threads = static_cast<int>(parse_int(value, ctx));
            else throw ConfigError(ctx + ": unknown key");
        } else if (section == "data") {
            if (key == "n_normal") cfg.data.n_normal = static_cast<int>(parse_int(value, ctx));
            else if (key == "n_prevalent") cfg.data.n_prevalent = static_cast<int>(parse_int(value, ctx));
            else if (key == "n_incident") cfg.data.n_incident = static_cast<int>(parse_int(value, ctx));
            else if (key == "noise_mm") cfg.data.noise_mm = parse_double(value, ctx);
            else if (key == "study_window_months") cfg.data.study_window_months = parse_double(value, ctx);
            else if (key == "hazard_base") cfg.data.hazard_base = parse_double(value, ctx);
            else if (key == "hazard_slope") cfg.data.hazard_slope = parse_double(value, ctx);
            else if (key == "seed") cfg.data.seed = static_cast<uint64_t>(parse_int(value, ctx));
            else throw ConfigError(ctx + ": unknown key");
        } else if (section == "paths") {
            if (key == "workspace") cfg.paths.workspace = value;
            else throw ConfigError(ctx + ": unknown key");
        } else {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": key outside any section");
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path.string());
    return parse(in, path.string());
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("config: cannot write " + path.string());
    out << serialize();
    if (!out) throw IoError("config: write failed for " + path.string());
}

}  // namespace pcd
