#pragma once

#include "pcd/analytics.hpp"
#include "pcd/clinical.hpp"
#include "pcd/config.hpp"

namespace pcd {

// Exclusive ownership of one run directory for the duration of a command.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& dir);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path path_;
};

enum class TrainFilter { kAll, kNormalOnly };
TrainFilter parse_filter(const std::string& s);

enum class EvalScope { kHeldout, kAll };  // heldout: test-split normals + all MI cases
EvalScope parse_scope(const std::string& s);

// Regression-input arms mirroring the benchmark rows: EF benchmarks computed
// from gold clouds, latent arms from a trained encoder.
enum class InputArm { kLvEf, kRvEf, kLvRvEf, kLatentEd2Es, kLatentEs2Ed };
InputArm parse_input_arm(const std::string& s);
const char* input_arm_name(InputArm a);

struct LoadedCohort {
    std::vector<SubjectRecord> records;
};

// Cohort directory layout: clouds/<id>_ed.ply, clouds/<id>_es.ply and
// manifest.csv with columns subject_id,ed_path,es_path,group,event,months.
void write_cohort(const std::filesystem::path& dir, const Cohort& cohort);
LoadedCohort load_cohort(const std::filesystem::path& dir);

// The record split used by training and by every evaluation command
// (train fractions and seed from [train]).
SplitIndices cohort_split(const RunConfig& config, size_t record_count);

// Commands. Each writes its outputs plus config.ini (the echoed effective
// config) into `out`, and run_meta.txt (timestamp, checkpoint hash) as the
// only timestamp-bearing file.
void cmd_generate(const RunConfig& config, const std::filesystem::path& out);

void cmd_train(const RunConfig& config, Direction direction,
               const std::filesystem::path& cohort_dir, TrainFilter filter,
               const std::filesystem::path& out);

void cmd_predict(const RunConfig& config, const std::filesystem::path& checkpoint,
                 const std::filesystem::path& cohort_dir, const std::filesystem::path& out);

void cmd_eval_geometry(const RunConfig& config, const std::filesystem::path& checkpoint,
                       Direction direction, const std::filesystem::path& cohort_dir,
                       const std::filesystem::path& out);

void cmd_eval_clinical(const RunConfig& config, const std::filesystem::path& checkpoint,
                       Direction direction, const std::filesystem::path& cohort_dir,
                       const std::filesystem::path& out);

void cmd_extract_latents(const RunConfig& config, const std::filesystem::path& checkpoint,
                         Direction direction, const std::filesystem::path& cohort_dir,
                         const std::filesystem::path& out);

void cmd_classify(const RunConfig& config, const std::filesystem::path& cohort_dir, Group task,
                  const std::vector<InputArm>& arms,
                  const std::vector<std::filesystem::path>& checkpoints, EvalScope scope,
                  const std::filesystem::path& out);

void cmd_survival(const RunConfig& config, const std::filesystem::path& cohort_dir,
                  const std::vector<InputArm>& arms,
                  const std::vector<std::filesystem::path>& checkpoints, EvalScope scope,
                  const std::filesystem::path& out);

void cmd_ks_compare(const RunConfig& config, const std::filesystem::path& checkpoint,
                    Direction direction, const std::filesystem::path& cohort_dir, Group group_a,
                    Group group_b, EvalScope scope, const std::filesystem::path& out);

// Shared helpers, exposed for the acceptance suite.

// Gold-standard EF features per record (LV, RV), from the gold ED/ES clouds.
struct EfFeatures {
    std::vector<double> lv_ef;
    std::vector<double> rv_ef;
};
EfFeatures gold_ef_features(const std::vector<const SubjectRecord*>& records);

// Feature matrix for one input arm.
LatentDataset arm_features(InputArm arm, const std::vector<const SubjectRecord*>& records,
                           const ModelParameters* ed2es, const ModelParameters* es2ed);

// Per-case mean dense Chamfer (mm) across the three classes of the predicted
// vs gold output-phase cloud.
std::vector<double> prediction_errors_mm(const ModelParameters& params, Direction direction,
                                         const std::vector<const SubjectRecord*>& records);

}  // namespace pcd
