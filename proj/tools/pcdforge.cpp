// pcdforge: cardiac point-cloud deformation modeling pipeline.
//
// Commands compose the full chain: synthetic cohort generation, training of
// the two directional deformation models, prediction, geometric and clinical
// evaluation, latent extraction, classification, survival analysis, and
// two-sample distribution comparison.

#include <CLI11.hpp>
#include <iostream>

#include "pcd/pipeline.hpp"

namespace {

// Exit codes: 0 success, 2 validation/config, 3 numerical, 4 I/O.
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
    std::string config_path;
    std::string out = "run_out";
    int64_t seed = -1;  // -1: keep the config value
};

pcd::RunConfig load_config(const CommonOpts& opts) {
    pcd::RunConfig cfg;
    if (!opts.config_path.empty()) cfg = pcd::RunConfig::load(opts.config_path);
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Run configuration file (INI sections)");
    cmd->add_option("--out", opts.out, "Output directory");
    cmd->add_option("--seed", opts.seed, "Override the command-relevant seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcdforge - point cloud deformation modeling pipeline"};
    app.require_subcommand(1);

    // generate
    CommonOpts gen_opts;
    int n_normal = -1, n_prevalent = -1, n_incident = -1;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic paired ED/ES cohort");
    add_common(gen, gen_opts);
    gen->add_option("--n-normal", n_normal, "Normal case count");
    gen->add_option("--n-prevalent", n_prevalent, "Prevalent-MI case count");
    gen->add_option("--n-incident", n_incident, "Incident-MI case count");

    // train
    CommonOpts train_opts;
    std::string train_direction = "ed2es", train_cohort, train_filter = "all";
    auto* train = app.add_subcommand("train", "Train one directional deformation model");
    add_common(train, train_opts);
    train->add_option("--direction", train_direction, "ed2es or es2ed");
    train->add_option("--cohort", train_cohort, "Cohort directory")->required();
    train->add_option("--filter", train_filter, "all or normal-only");

    // predict
    CommonOpts pred_opts;
    std::string pred_checkpoint, pred_cohort;
    auto* pred = app.add_subcommand("predict", "Write predicted dense clouds for the test split");
    add_common(pred, pred_opts);
    pred->add_option("--checkpoint", pred_checkpoint, "Model checkpoint")->required();
    pred->add_option("--cohort", pred_cohort, "Cohort directory")->required();

    // eval-geometry
    CommonOpts geo_opts;
    std::string geo_checkpoint, geo_cohort, geo_direction = "ed2es";
    auto* geo = app.add_subcommand("eval-geometry", "Per-class Chamfer distances on the test split");
    add_common(geo, geo_opts);
    geo->add_option("--checkpoint", geo_checkpoint, "Model checkpoint")->required();
    geo->add_option("--cohort", geo_cohort, "Cohort directory")->required();
    geo->add_option("--direction", geo_direction, "ed2es or es2ed");

    // eval-clinical
    CommonOpts clin_opts;
    std::string clin_checkpoint, clin_cohort, clin_direction = "ed2es";
    auto* clin = app.add_subcommand("eval-clinical", "Volumes, mass, EF and per-case differences");
    add_common(clin, clin_opts);
    clin->add_option("--checkpoint", clin_checkpoint, "Model checkpoint")->required();
    clin->add_option("--cohort", clin_cohort, "Cohort directory")->required();
    clin->add_option("--direction", clin_direction, "ed2es or es2ed");

    // extract-latents
    CommonOpts lat_opts;
    std::string lat_checkpoint, lat_cohort, lat_direction = "ed2es";
    auto* lat = app.add_subcommand("extract-latents", "Encoder latents for every cohort case");
    add_common(lat, lat_opts);
    lat->add_option("--checkpoint", lat_checkpoint, "Model checkpoint")->required();
    lat->add_option("--cohort", lat_cohort, "Cohort directory")->required();
    lat->add_option("--direction", lat_direction, "ed2es or es2ed");

    // classify
    CommonOpts cls_opts;
    std::string cls_cohort, cls_task = "prevalent_mi", cls_scope = "heldout";
    std::vector<std::string> cls_inputs{"lv-ef"};
    std::vector<std::string> cls_checkpoints;
    auto* cls = app.add_subcommand("classify", "10-fold CV logistic regression per input arm");
    add_common(cls, cls_opts);
    cls->add_option("--cohort", cls_cohort, "Cohort directory")->required();
    cls->add_option("--task", cls_task, "prevalent_mi or incident_mi");
    cls->add_option("--input", cls_inputs,
                    "Input arms: lv-ef rv-ef lv-rv-ef latent-ed2es latent-es2ed");
    cls->add_option("--checkpoint", cls_checkpoints,
                    "Checkpoints for latent arms (ed2es first when both)");
    cls->add_option("--scope", cls_scope, "heldout or all");

    // survival
    CommonOpts surv_opts;
    std::string surv_cohort, surv_scope = "heldout";
    std::vector<std::string> surv_inputs{"lv-ef"};
    std::vector<std::string> surv_checkpoints;
    auto* surv = app.add_subcommand("survival", "Cox models with Harrell's C per input arm");
    add_common(surv, surv_opts);
    surv->add_option("--cohort", surv_cohort, "Cohort directory")->required();
    surv->add_option("--input", surv_inputs,
                     "Input arms: lv-ef rv-ef lv-rv-ef latent-ed2es latent-es2ed");
    surv->add_option("--checkpoint", surv_checkpoints,
                     "Checkpoints for latent arms (ed2es first when both)");
    surv->add_option("--scope", surv_scope, "heldout or all");

    // ks-compare
    CommonOpts ks_opts;
    std::string ks_checkpoint, ks_cohort, ks_direction = "ed2es";
    std::string ks_group_a = "normal", ks_group_b = "prevalent_mi", ks_scope = "heldout";
    auto* ks = app.add_subcommand("ks-compare",
                                  "KS test on prediction-error distributions of two groups");
    add_common(ks, ks_opts);
    ks->add_option("--checkpoint", ks_checkpoint, "Model checkpoint")->required();
    ks->add_option("--cohort", ks_cohort, "Cohort directory")->required();
    ks->add_option("--direction", ks_direction, "ed2es or es2ed");
    ks->add_option("--group-a", ks_group_a, "normal, prevalent_mi or incident_mi");
    ks->add_option("--group-b", ks_group_b, "normal, prevalent_mi or incident_mi");
    ks->add_option("--scope", ks_scope, "heldout or all");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            pcd::RunConfig cfg = load_config(gen_opts);
            if (gen_opts.seed >= 0) cfg.data.seed = static_cast<uint64_t>(gen_opts.seed);
            if (n_normal >= 0) cfg.data.n_normal = n_normal;
            if (n_prevalent >= 0) cfg.data.n_prevalent = n_prevalent;
            if (n_incident >= 0) cfg.data.n_incident = n_incident;
            pcd::cmd_generate(cfg, gen_opts.out);
        } else if (train->parsed()) {
            pcd::RunConfig cfg = load_config(train_opts);
            if (train_opts.seed >= 0) cfg.train.seed = static_cast<uint64_t>(train_opts.seed);
            pcd::cmd_train(cfg, pcd::parse_direction(train_direction), train_cohort,
                           pcd::parse_filter(train_filter), train_opts.out);
        } else if (pred->parsed()) {
            pcd::RunConfig cfg = load_config(pred_opts);
            pcd::cmd_predict(cfg, pred_checkpoint, pred_cohort, pred_opts.out);
        } else if (geo->parsed()) {
            pcd::RunConfig cfg = load_config(geo_opts);
            pcd::cmd_eval_geometry(cfg, geo_checkpoint, pcd::parse_direction(geo_direction),
                                   geo_cohort, geo_opts.out);
        } else if (clin->parsed()) {
            pcd::RunConfig cfg = load_config(clin_opts);
            pcd::cmd_eval_clinical(cfg, clin_checkpoint, pcd::parse_direction(clin_direction),
                                   clin_cohort, clin_opts.out);
        } else if (lat->parsed()) {
            pcd::RunConfig cfg = load_config(lat_opts);
            pcd::cmd_extract_latents(cfg, lat_checkpoint, pcd::parse_direction(lat_direction),
                                     lat_cohort, lat_opts.out);
        } else if (cls->parsed()) {
            pcd::RunConfig cfg = load_config(cls_opts);
            if (cls_opts.seed >= 0) cfg.train.seed = static_cast<uint64_t>(cls_opts.seed);
            std::vector<pcd::InputArm> arms;
            for (const auto& s : cls_inputs) arms.push_back(pcd::parse_input_arm(s));
            std::vector<std::filesystem::path> cps(cls_checkpoints.begin(),
                                                   cls_checkpoints.end());
            pcd::cmd_classify(cfg, cls_cohort, pcd::parse_group(cls_task), arms, cps,
                              pcd::parse_scope(cls_scope), cls_opts.out);
        } else if (surv->parsed()) {
            pcd::RunConfig cfg = load_config(surv_opts);
            if (surv_opts.seed >= 0) cfg.train.seed = static_cast<uint64_t>(surv_opts.seed);
            std::vector<pcd::InputArm> arms;
            for (const auto& s : surv_inputs) arms.push_back(pcd::parse_input_arm(s));
            std::vector<std::filesystem::path> cps(surv_checkpoints.begin(),
                                                   surv_checkpoints.end());
            pcd::cmd_survival(cfg, surv_cohort, arms, cps, pcd::parse_scope(surv_scope),
                              surv_opts.out);
        } else if (ks->parsed()) {
            pcd::RunConfig cfg = load_config(ks_opts);
            pcd::cmd_ks_compare(cfg, ks_checkpoint, pcd::parse_direction(ks_direction), ks_cohort,
                                pcd::parse_group(ks_group_a), pcd::parse_group(ks_group_b),
                                pcd::parse_scope(ks_scope), ks_opts.out);
        }
    } catch (const pcd::ConfigError& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kExitConfig;
    } catch (const pcd::ShapeError& e) {
        std::cerr << "error (shape): " << e.what() << "\n";
        return kExitConfig;
    } catch (const pcd::NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return kExitNumeric;
    } catch (const pcd::IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
