#include "pcd/pipeline.hpp"

#include <unistd.h>

#include <chrono>
#include <fstream>
#include <sstream>

#include "pcd/checkpoint.hpp"
#include "pcd/ply.hpp"

namespace pcd {

namespace fs = std::filesystem;

WorkspaceLock::WorkspaceLock(const fs::path& dir) {
    fs::create_directories(dir);
    path_ = dir / "lock";
    std::error_code ec;
    if (fs::exists(path_, ec)) {
        throw IoError("workspace " + dir.string() + " is locked by another run (remove '" +
                      path_.string() + "' if stale)");
    }
    std::ofstream out(path_);
    if (!out) throw IoError("cannot create lock file " + path_.string());
    out << "pid " << ::getpid() << "\n";
}

WorkspaceLock::~WorkspaceLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

TrainFilter parse_filter(const std::string& s) {
    if (s == "all") return TrainFilter::kAll;
    if (s == "normal-only") return TrainFilter::kNormalOnly;
    throw ConfigError("unknown filter '" + s + "' (expected all or normal-only)");
}

EvalScope parse_scope(const std::string& s) {
    if (s == "heldout") return EvalScope::kHeldout;
    if (s == "all") return EvalScope::kAll;
    throw ConfigError("unknown scope '" + s + "' (expected heldout or all)");
}

InputArm parse_input_arm(const std::string& s) {
    if (s == "lv-ef") return InputArm::kLvEf;
    if (s == "rv-ef") return InputArm::kRvEf;
    if (s == "lv-rv-ef") return InputArm::kLvRvEf;
    if (s == "latent-ed2es") return InputArm::kLatentEd2Es;
    if (s == "latent-es2ed") return InputArm::kLatentEs2Ed;
    throw ConfigError("unknown input arm '" + s + "'");
}

const char* input_arm_name(InputArm a) {
    switch (a) {
        case InputArm::kLvEf: return "lv-ef";
        case InputArm::kRvEf: return "rv-ef";
        case InputArm::kLvRvEf: return "lv-rv-ef";
        case InputArm::kLatentEd2Es: return "latent-ed2es";
        case InputArm::kLatentEs2Ed: return "latent-es2ed";
    }
    return "unknown";
}

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

// Timestamps live only here so every other artifact is byte-reproducible.
void write_run_meta(const fs::path& out_dir, const std::string& command,
                    const std::vector<fs::path>& checkpoints) {
    std::ostringstream meta;
    auto now = std::chrono::system_clock::now();
    meta << "command = " << command << "\n";
    meta << "timestamp_unix = "
         << std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()
         << "\n";
    for (const fs::path& cp : checkpoints) {
        meta << "checkpoint = " << cp.string() << "\n";
        meta << "checkpoint_fnv1a64 = " << hex64(fnv1a64_file(cp.string())) << "\n";
    }
    write_text_file(out_dir / "run_meta.txt", meta.str());
}

void echo_config(const RunConfig& config, const fs::path& out_dir) {
    config.save(out_dir / "config.ini");
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    return out + "\"";
}

}  // namespace

void write_cohort(const fs::path& dir, const Cohort& cohort) {
    fs::create_directories(dir / "clouds");
    std::ostringstream manifest;
    manifest << manifest_header() << "\n";
    for (const CohortCase& cc : cohort.cases) {
        const SubjectRecord& r = cc.record;
        std::string ed_rel = "clouds/" + r.id + "_ed.ply";
        std::string es_rel = "clouds/" + r.id + "_es.ply";
        write_ply(dir / ed_rel, r.ed);
        write_ply(dir / es_rel, r.es);
        manifest << r.id << ',' << ed_rel << ',' << es_rel << ',' << group_name(r.group) << ','
                 << (r.event ? 1 : 0) << ',' << format_double(r.months) << "\n";
    }
    write_text_file(dir / "manifest.csv", manifest.str());
}

LoadedCohort load_cohort(const fs::path& dir) {
    fs::path manifest_path = dir / "manifest.csv";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cohort: cannot open " + manifest_path.string());

    LoadedCohort cohort;
    std::string line;
    if (!std::getline(in, line) || trim(line) != manifest_header()) {
        throw IoError("cohort: unexpected manifest header in " + manifest_path.string());
    }
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(trim(line), ',');
        if (cols.size() != 6) {
            throw IoError("cohort: malformed manifest line " + std::to_string(lineno));
        }
        SubjectRecord rec;
        rec.id = cols[0];
        fs::path ed_path = dir / cols[1];
        fs::path es_path = dir / cols[2];
        if (!fs::exists(ed_path)) {
            throw IoError("cohort: subject " + rec.id + ": missing cloud file " + ed_path.string());
        }
        if (!fs::exists(es_path)) {
            throw IoError("cohort: subject " + rec.id + ": missing cloud file " + es_path.string());
        }
        rec.ed = read_ply(ed_path);
        rec.es = read_ply(es_path);
        rec.group = parse_group(cols[3]);
        rec.event = parse_int(cols[4], "manifest event") != 0;
        rec.months = parse_double(cols[5], "manifest months");
        rec.validate();
        cohort.records.push_back(std::move(rec));
    }
    if (cohort.records.empty()) throw IoError("cohort: manifest lists no subjects");
    return cohort;
}

SplitIndices cohort_split(const RunConfig& config, size_t record_count) {
    return split_dataset(record_count, config.train.train_fraction, config.train.val_fraction,
                         config.train.test_fraction, config.train.seed);
}

void cmd_generate(const RunConfig& config, const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    Cohort cohort = generate_cohort(config.data.n_normal, config.data.n_prevalent,
                                    config.data.n_incident, config.data.seed,
                                    config.cohort_priors());
    write_cohort(out, cohort);

    // Generation parameters sidecar; severity drives the MI phenotype.
    std::ostringstream params;
    params << "subject_id,group,severity\n";
    for (const CohortCase& cc : cohort.cases) {
        params << cc.record.id << ',' << group_name(cc.record.group) << ','
               << format_double(cc.severity) << "\n";
    }
    write_text_file(out / "generation_params.csv", params.str());

    echo_config(config, out);
    write_run_meta(out, "generate", {});
}

namespace {

std::vector<TrainPair> make_pairs(const std::vector<const SubjectRecord*>& records,
                                  Direction direction, const NormalizationTransform& norm) {
    std::vector<TrainPair> pairs;
    pairs.reserve(records.size());
    for (const SubjectRecord* r : records) {
        TrainPair p;
        const MultiClassPointCloud& in = direction == Direction::kEd2Es ? r->ed : r->es;
        const MultiClassPointCloud& out = direction == Direction::kEd2Es ? r->es : r->ed;
        p.input = normalize(in, norm);
        p.target = normalize(out, norm);
        pairs.push_back(std::move(p));
    }
    return pairs;
}

std::vector<const SubjectRecord*> select_records(const LoadedCohort& cohort,
                                                 const std::vector<size_t>& indices,
                                                 std::optional<Group> only_group = std::nullopt) {
    std::vector<const SubjectRecord*> out;
    for (size_t i : indices) {
        const SubjectRecord& r = cohort.records[i];
        if (only_group && r.group != *only_group) continue;
        out.push_back(&r);
    }
    return out;
}

// heldout scope: normal cases from the test split plus every case of the MI
// groups (a normal-only trained model never saw the MI cases).
std::vector<const SubjectRecord*> scope_records(const LoadedCohort& cohort,
                                                const SplitIndices& split, EvalScope scope,
                                                const std::vector<Group>& groups) {
    std::vector<const SubjectRecord*> out;
    for (Group g : groups) {
        if (scope == EvalScope::kAll || g != Group::kNormal) {
            for (const SubjectRecord& r : cohort.records) {
                if (r.group == g) out.push_back(&r);
            }
        } else {
            for (size_t i : split.test) {
                const SubjectRecord& r = cohort.records[i];
                if (r.group == g) out.push_back(&r);
            }
        }
    }
    return out;
}

}  // namespace

void cmd_train(const RunConfig& config, Direction direction, const fs::path& cohort_dir,
               TrainFilter filter, const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());

    std::optional<Group> only;
    if (filter == TrainFilter::kNormalOnly) only = Group::kNormal;
    auto train_records = select_records(cohort, split.train, only);
    auto val_records = select_records(cohort, split.validation, only);
    if (train_records.empty()) throw ConfigError("train: no records in the training split");
    if (val_records.empty()) throw ConfigError("train: no records in the validation split");

    // Dataset-level normalization from the training clouds (both phases).
    std::vector<const MultiClassPointCloud*> norm_clouds;
    for (const SubjectRecord* r : train_records) {
        norm_clouds.push_back(&r->ed);
        norm_clouds.push_back(&r->es);
    }
    NormalizationTransform norm = fit_normalization(norm_clouds);

    std::vector<TrainPair> train_pairs = make_pairs(train_records, direction, norm);
    std::vector<TrainPair> val_pairs = make_pairs(val_records, direction, norm);

    fs::path checkpoint_path = out / ("model_" + std::string(direction_name(direction)) + ".pcdn");
    std::ofstream log(out / "train_log.csv");
    if (!log) throw IoError("train: cannot write log in " + out.string());

    TrainResult result = train(train_pairs, val_pairs, config.model, norm, config.train, &log,
                               checkpoint_path);
    save_checkpoint_atomic(checkpoint_path, result.params);

    std::ostringstream summary;
    summary << "[train summary]\n";
    summary << "direction = " << direction_name(direction) << "\n";
    summary << "filter = " << (filter == TrainFilter::kNormalOnly ? "normal-only" : "all") << "\n";
    summary << "train_cases = " << train_records.size() << "\n";
    summary << "validation_cases = " << val_records.size() << "\n";
    summary << "total_steps = " << result.total_steps << "\n";
    summary << "best_step = " << result.best_step << "\n";
    summary << "best_val_dense_chamfer = " << format_double(result.best_val_metric) << "\n";
    write_text_file(out / "train_summary.txt", summary.str());

    echo_config(config, out);
    write_run_meta(out, "train", {checkpoint_path});
}

void cmd_predict(const RunConfig& config, const fs::path& checkpoint, const fs::path& cohort_dir,
                 const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    ModelParameters params = load_checkpoint(checkpoint);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());

    fs::create_directories(out / "predicted");
    std::ostringstream manifest;
    manifest << "subject_id,predicted_path\n";
    for (size_t i : split.test) {
        const SubjectRecord& r = cohort.records[i];
        DeformationPrediction pred = predict(params, r.ed);
        MultiClassPointCloud dense_mm = denormalize(pred.dense_cloud(), params.norm);
        std::string rel = "predicted/" + r.id + ".ply";
        write_ply(out / rel, dense_mm);
        manifest << r.id << ',' << rel << "\n";
    }
    write_text_file(out / "predictions.csv", manifest.str());
    echo_config(config, out);
    write_run_meta(out, "predict", {checkpoint});
}

std::vector<double> prediction_errors_mm(const ModelParameters& params, Direction direction,
                                         const std::vector<const SubjectRecord*>& records) {
    std::vector<double> errors;
    errors.reserve(records.size());
    for (const SubjectRecord* r : records) {
        const MultiClassPointCloud& in = direction == Direction::kEd2Es ? r->ed : r->es;
        const MultiClassPointCloud& gold = direction == Direction::kEd2Es ? r->es : r->ed;
        DeformationPrediction pred = predict(params, in);
        MultiClassPointCloud dense_mm = denormalize(pred.dense_cloud(), params.norm);
        auto per_class = per_class_chamfer(dense_mm, gold);
        errors.push_back((per_class[0] + per_class[1] + per_class[2]) / kNumClasses);
    }
    return errors;
}

void cmd_eval_geometry(const RunConfig& config, const fs::path& checkpoint, Direction direction,
                       const fs::path& cohort_dir, const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    ModelParameters params = load_checkpoint(checkpoint);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());
    auto records = select_records(cohort, split.test);
    if (records.empty()) throw ConfigError("eval-geometry: empty test split");

    std::ostringstream csv;
    csv << "subject_id,group,chamfer_lv_endo_mm,chamfer_lv_epi_mm,chamfer_rv_endo_mm,"
           "chamfer_mean_mm\n";
    std::array<double, kNumClasses> mean{};
    std::array<double, kNumClasses> sq{};
    double bbox_sum = 0;
    for (const SubjectRecord* r : records) {
        const MultiClassPointCloud& in = direction == Direction::kEd2Es ? r->ed : r->es;
        const MultiClassPointCloud& gold = direction == Direction::kEd2Es ? r->es : r->ed;
        DeformationPrediction pred = predict(params, in);
        MultiClassPointCloud dense_mm = denormalize(pred.dense_cloud(), params.norm);
        auto d = per_class_chamfer(dense_mm, gold);
        csv << r->id << ',' << group_name(r->group);
        double case_mean = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            csv << ',' << format_double(d[c]);
            mean[c] += d[c];
            sq[c] += d[c] * d[c];
            case_mean += d[c];
        }
        csv << ',' << format_double(case_mean / kNumClasses) << "\n";
        bbox_sum += bounding_box_diagonal(gold);
    }
    const double n = static_cast<double>(records.size());
    std::ostringstream summary;
    summary << "[geometry summary]\n";
    summary << "direction = " << direction_name(direction) << "\n";
    summary << "cases = " << records.size() << "\n";
    summary << "chamfer_convention = symmetric, unsquared L2, mean per direction, "
               "average of both directions (mm)\n";
    for (int c = 0; c < kNumClasses; ++c) {
        double mu = mean[c] / n;
        double sd = std::sqrt(std::max(0.0, sq[c] / n - mu * mu));
        summary << "dense_chamfer_" << class_name(c) << "_mm = " << format_double(mu) << " (sd "
                << format_double(sd) << ")\n";
    }
    summary << "mean_gold_bbox_diagonal_mm = " << format_double(bbox_sum / n) << "\n";
    write_text_file(out / "geometry_per_case.csv", csv.str());
    write_text_file(out / "geometry_summary.txt", summary.str());
    echo_config(config, out);
    write_run_meta(out, "eval-geometry", {checkpoint});
}

void cmd_eval_clinical(const RunConfig& config, const fs::path& checkpoint, Direction direction,
                       const fs::path& cohort_dir, const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    ModelParameters params = load_checkpoint(checkpoint);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());
    auto records = select_records(cohort, split.test);
    if (records.empty()) throw ConfigError("eval-clinical: empty test split");

    // Keep the predicted clouds alive for the report's pointer-based cases.
    std::vector<MultiClassPointCloud> predicted;
    predicted.reserve(records.size());
    std::vector<ClinicalCase> cases;
    for (const SubjectRecord* r : records) {
        const MultiClassPointCloud& in = direction == Direction::kEd2Es ? r->ed : r->es;
        const MultiClassPointCloud& gold = direction == Direction::kEd2Es ? r->es : r->ed;
        DeformationPrediction pred = predict(params, in);
        predicted.push_back(denormalize(pred.dense_cloud(), params.norm));
        ClinicalCase c;
        c.id = r->id;
        c.gold_input = &in;
        c.gold_output = &gold;
        c.predicted_output = &predicted.back();
        cases.push_back(c);
    }
    EvaluationReport report = evaluate_population(cases, direction);

    std::ostringstream csv, summary;
    report.write_csv(csv);
    report.write_summary(summary);
    write_text_file(out / "clinical_per_case.csv", csv.str());
    write_text_file(out / "clinical_summary.txt", summary.str());
    echo_config(config, out);
    write_run_meta(out, "eval-clinical", {checkpoint});
}

void cmd_extract_latents(const RunConfig& config, const fs::path& checkpoint, Direction direction,
                         const fs::path& cohort_dir, const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    ModelParameters params = load_checkpoint(checkpoint);
    LoadedCohort cohort = load_cohort(cohort_dir);

    std::vector<const SubjectRecord*> records;
    for (const SubjectRecord& r : cohort.records) records.push_back(&r);
    LatentDataset latents = extract_latents(records, params, direction);

    std::ostringstream csv;
    csv << "subject_id,group,event,months";
    for (size_t j = 0; j < latents.dim; ++j) csv << ",z" << j;
    csv << "\n";
    for (size_t i = 0; i < latents.cases; ++i) {
        const SubjectRecord& r = *records[i];
        csv << csv_escape(r.id) << ',' << group_name(r.group) << ',' << (r.event ? 1 : 0) << ','
            << format_double(r.months);
        for (double v : latents.row(i)) csv << ',' << format_double(v);
        csv << "\n";
    }
    write_text_file(out / "latents.csv", csv.str());
    echo_config(config, out);
    write_run_meta(out, "extract-latents", {checkpoint});
}

EfFeatures gold_ef_features(const std::vector<const SubjectRecord*>& records) {
    EfFeatures f;
    f.lv_ef.reserve(records.size());
    f.rv_ef.reserve(records.size());
    for (const SubjectRecord* r : records) {
        AnatomyMetrics ed = anatomy_metrics(r->ed);
        AnatomyMetrics es = anatomy_metrics(r->es);
        f.lv_ef.push_back(ejection_fraction_pct(ed.lv_volume_ml, es.lv_volume_ml));
        f.rv_ef.push_back(ejection_fraction_pct(ed.rv_volume_ml, es.rv_volume_ml));
    }
    return f;
}

LatentDataset arm_features(InputArm arm, const std::vector<const SubjectRecord*>& records,
                           const ModelParameters* ed2es, const ModelParameters* es2ed) {
    if (arm == InputArm::kLatentEd2Es) {
        if (!ed2es) throw ConfigError("input arm latent-ed2es needs an ed2es checkpoint");
        return extract_latents(records, *ed2es, Direction::kEd2Es);
    }
    if (arm == InputArm::kLatentEs2Ed) {
        if (!es2ed) throw ConfigError("input arm latent-es2ed needs an es2ed checkpoint");
        return extract_latents(records, *es2ed, Direction::kEs2Ed);
    }
    EfFeatures ef = gold_ef_features(records);
    LatentDataset d;
    d.cases = records.size();
    d.dim = arm == InputArm::kLvRvEf ? 2 : 1;
    d.features.reserve(d.cases * d.dim);
    for (size_t i = 0; i < records.size(); ++i) {
        d.ids.push_back(records[i]->id);
        if (arm == InputArm::kLvEf) {
            d.features.push_back(ef.lv_ef[i]);
        } else if (arm == InputArm::kRvEf) {
            d.features.push_back(ef.rv_ef[i]);
        } else {
            d.features.push_back(ef.lv_ef[i]);
            d.features.push_back(ef.rv_ef[i]);
        }
    }
    return d;
}

namespace {

struct LoadedArms {
    std::optional<ModelParameters> ed2es;
    std::optional<ModelParameters> es2ed;
};

LoadedArms load_arm_checkpoints(const std::vector<InputArm>& arms,
                                const std::vector<fs::path>& checkpoints) {
    bool need_ed2es = false, need_es2ed = false;
    for (InputArm a : arms) {
        need_ed2es |= a == InputArm::kLatentEd2Es;
        need_es2ed |= a == InputArm::kLatentEs2Ed;
    }
    LoadedArms out;
    size_t next = 0;
    if (need_ed2es) {
        if (next >= checkpoints.size()) {
            throw ConfigError("latent-ed2es arm requested but no checkpoint supplied");
        }
        out.ed2es = load_checkpoint(checkpoints[next++]);
    }
    if (need_es2ed) {
        if (next >= checkpoints.size()) {
            throw ConfigError("latent-es2ed arm requested but no checkpoint supplied");
        }
        out.es2ed = load_checkpoint(checkpoints[next++]);
    }
    return out;
}

}  // namespace

void cmd_classify(const RunConfig& config, const fs::path& cohort_dir, Group task,
                  const std::vector<InputArm>& arms, const std::vector<fs::path>& checkpoints,
                  EvalScope scope, const fs::path& out) {
    config.validate();
    if (task == Group::kNormal) throw ConfigError("classify: task must be an MI group");
    WorkspaceLock lock(out);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());
    auto records = scope_records(cohort, split, scope, {Group::kNormal, task});
    if (records.empty()) throw ConfigError("classify: no cases in scope");

    std::vector<int> labels;
    labels.reserve(records.size());
    for (const SubjectRecord* r : records) labels.push_back(r->group == task ? 1 : 0);

    LoadedArms models = load_arm_checkpoints(arms, checkpoints);

    std::ostringstream csv;
    csv << "input,accuracy,auroc,f1,precision,recall\n";
    for (InputArm arm : arms) {
        LatentDataset features = arm_features(arm, records,
                                              models.ed2es ? &*models.ed2es : nullptr,
                                              models.es2ed ? &*models.es2ed : nullptr);
        ClassificationMetrics m =
            kfold_cv_classify(features, labels, 10, /*l2_strength=*/1e-4, config.train.seed);
        csv << input_arm_name(arm) << ',' << format_double(m.accuracy) << ','
            << format_double(m.auroc) << ',' << format_double(m.f1) << ','
            << format_double(m.precision) << ',' << format_double(m.recall) << "\n";
    }
    write_text_file(out / "classification.csv", csv.str());
    echo_config(config, out);
    write_run_meta(out, "classify", checkpoints);
}

void cmd_survival(const RunConfig& config, const fs::path& cohort_dir,
                  const std::vector<InputArm>& arms, const std::vector<fs::path>& checkpoints,
                  EvalScope scope, const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());
    auto records = scope_records(cohort, split, scope, {Group::kNormal, Group::kIncidentMi});
    if (records.empty()) throw ConfigError("survival: no cases in scope");

    std::vector<int> events;
    std::vector<double> times;
    for (const SubjectRecord* r : records) {
        events.push_back(r->event ? 1 : 0);
        times.push_back(r->months);
    }

    LoadedArms models = load_arm_checkpoints(arms, checkpoints);

    std::ostringstream csv;
    csv << "input,c_index\n";
    for (InputArm arm : arms) {
        LatentDataset features = arm_features(arm, records,
                                              models.ed2es ? &*models.ed2es : nullptr,
                                              models.es2ed ? &*models.es2ed : nullptr);
        double c = kfold_cv_cox(features, events, times, 10, config.train.seed);
        csv << input_arm_name(arm) << ',' << format_double(c) << "\n";
    }
    write_text_file(out / "survival.csv", csv.str());
    echo_config(config, out);
    write_run_meta(out, "survival", checkpoints);
}

void cmd_ks_compare(const RunConfig& config, const fs::path& checkpoint, Direction direction,
                    const fs::path& cohort_dir, Group group_a, Group group_b, EvalScope scope,
                    const fs::path& out) {
    config.validate();
    WorkspaceLock lock(out);
    ModelParameters params = load_checkpoint(checkpoint);
    LoadedCohort cohort = load_cohort(cohort_dir);
    SplitIndices split = cohort_split(config, cohort.records.size());

    auto records_a = scope_records(cohort, split, scope, {group_a});
    auto records_b = scope_records(cohort, split, scope, {group_b});
    if (records_a.empty() || records_b.empty()) {
        throw ConfigError("ks-compare: a group has no cases in scope");
    }

    std::vector<double> errors_a = prediction_errors_mm(params, direction, records_a);
    std::vector<double> errors_b = prediction_errors_mm(params, direction, records_b);
    KsResult ks = ks_two_sample(errors_a, errors_b);

    auto mean_of = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };

    std::ostringstream report;
    report << "[ks comparison]\n";
    report << "statistic = per-case mean dense Chamfer across classes (mm)\n";
    report << "direction = " << direction_name(direction) << "\n";
    report << "group_a = " << group_name(group_a) << " (n = " << ks.n_a << ")\n";
    report << "group_b = " << group_name(group_b) << " (n = " << ks.n_b << ")\n";
    report << "mean_a_mm = " << format_double(mean_of(errors_a)) << "\n";
    report << "mean_b_mm = " << format_double(mean_of(errors_b)) << "\n";
    report << "ks_d = " << format_double(ks.d) << "\n";
    report << "ks_p = " << format_double(ks.p_value) << "\n";
    write_text_file(out / "ks_report.txt", report.str());

    std::ostringstream csv;
    csv << "group,subject_id,mean_dense_chamfer_mm\n";
    for (size_t i = 0; i < records_a.size(); ++i) {
        csv << group_name(group_a) << ',' << records_a[i]->id << ','
            << format_double(errors_a[i]) << "\n";
    }
    for (size_t i = 0; i < records_b.size(); ++i) {
        csv << group_name(group_b) << ',' << records_b[i]->id << ','
            << format_double(errors_b[i]) << "\n";
    }
    write_text_file(out / "ks_samples.csv", csv.str());
    echo_config(config, out);
    write_run_meta(out, "ks-compare", {checkpoint});
}

}  // namespace pcd
