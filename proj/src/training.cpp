#include "pcd/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "pcd/checkpoint.hpp"

namespace pcd {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
    if (patience < 1) throw ConfigError("train: patience must be at least 1");
    if (validation_interval < 1) throw ConfigError("train: validation_interval must be at least 1");
    if (max_steps < 0) throw ConfigError("train: max_steps must be non-negative");
    if (threads < 1) throw ConfigError("train: threads must be at least 1");
    double sum = train_fraction + val_fraction + test_fraction;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("train: split fractions sum to " + format_double(sum) + ", expected 1.0");
    }
    if (alpha_breakpoints.empty()) throw ConfigError("train: alpha schedule has no breakpoints");
    double prev = -1;
    for (const auto& [step, alpha] : alpha_breakpoints) {
        if (step < 0) throw ConfigError("train: alpha breakpoint steps must be non-negative");
        if (alpha < prev) throw ConfigError("train: alpha schedule must be non-decreasing");
        prev = alpha;
    }
    adam.validate();
}

double alpha_schedule(int64_t step, const std::map<int64_t, double>& breakpoints) {
    if (step < 0) throw ConfigError("alpha_schedule: step must be non-negative");
    if (breakpoints.empty()) throw ConfigError("alpha_schedule: empty breakpoint table");
    auto it = breakpoints.upper_bound(step);
    if (it == breakpoints.begin()) return it->second;  // before the first breakpoint
    return std::prev(it)->second;
}

double alpha_schedule(int64_t step, const TrainConfig& config) {
    return alpha_schedule(step, config.alpha_breakpoints);
}

LossBreakdown total_loss(const DeformationPrediction& pred, const MultiClassPointCloud& target,
                         double alpha) {
    if (alpha < 0) throw ConfigError("total_loss: alpha must be non-negative");
    target.validate();
    LossBreakdown out;
    out.alpha = alpha;
    for (int c = 0; c < kNumClasses; ++c) {
        PointList tgt = target.class_points(c);
        out.coarse[c] = chamfer(pred.coarse[c], tgt);
        out.dense[c] = chamfer(pred.dense[c], tgt);
        out.total += out.coarse[c] + alpha * out.dense[c];
    }
    return out;
}

ChamferTargets ChamferTargets::build(const MultiClassPointCloud& target) {
    target.validate();
    ChamferTargets t;
    for (int c = 0; c < kNumClasses; ++c) {
        t.per_class[c] = std::make_shared<const ad::ChamferTarget>(target.class_points(c));
    }
    return t;
}

LossGraph total_loss_graph(ad::Tape& tape, const ParamVars& pv, const ArchitectureConfig& arch,
                           const MultiClassPointCloud& input, const ChamferTargets& target,
                           double alpha) {
    if (alpha < 0) throw ConfigError("total_loss_graph: alpha must be non-negative");
    ad::Var latent = encode(tape, pv, arch, input);
    ad::Var coarse = decode_coarse(tape, pv, arch, latent);
    ad::Var dense = fold_dense(tape, pv, arch, latent, coarse);

    LossGraph g;
    g.breakdown.alpha = alpha;
    ad::Var total;
    for (int c = 0; c < kNumClasses; ++c) {
        ad::Var coarse_c = tape.chamfer(tape.gather_rows(coarse, class_rows(arch.coarse_points, c)),
                                        target.per_class[c]);
        ad::Var dense_c = tape.chamfer(tape.gather_rows(dense, class_rows(arch.dense_points(), c)),
                                       target.per_class[c]);
        g.breakdown.coarse[c] = tape.value_scalar(coarse_c);
        g.breakdown.dense[c] = tape.value_scalar(dense_c);
        ad::Var term = tape.add(coarse_c, tape.scale(dense_c, alpha));
        total = total.valid() ? tape.add(total, term) : term;
    }
    g.total = total;
    g.breakdown.total = tape.value_scalar(total);
    return g;
}

SplitIndices split_dataset(size_t count, double train_fraction, double val_fraction,
                           double test_fraction, uint64_t seed) {
    if (count < 3) throw ConfigError("split_dataset: need at least 3 records");
    double sum = train_fraction + val_fraction + test_fraction;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split_dataset: fractions sum to " + format_double(sum));
    }

    // Largest-remainder rounding of the three shares.
    const double fracs[3] = {train_fraction, val_fraction, test_fraction};
    size_t sizes[3];
    double remainders[3];
    size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        double exact = fracs[i] * static_cast<double>(count);
        sizes[i] = static_cast<size_t>(std::floor(exact));
        remainders[i] = exact - std::floor(exact);
        assigned += sizes[i];
    }
    while (assigned < count) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (remainders[i] > remainders[best]) best = i;
        }
        sizes[best]++;
        remainders[best] = -1;
        assigned++;
    }

    std::vector<size_t> order(count);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + sizes[0]);
    s.validation.assign(order.begin() + sizes[0], order.begin() + sizes[0] + sizes[1]);
    s.test.assign(order.begin() + sizes[0] + sizes[1], order.end());
    return s;
}

void write_log_header(std::ostream& out) {
    out << "step,alpha,loss_total,loss_coarse_lvendo,loss_coarse_lvepi,loss_coarse_rvendo,"
           "loss_dense_lvendo,loss_dense_lvepi,loss_dense_rvendo,val_dense_chamfer\n";
}

void write_log_row(std::ostream& out, const TrainLogRow& row) {
    out << row.step << ',' << format_double(row.alpha) << ',' << format_double(row.loss.total);
    for (int c = 0; c < kNumClasses; ++c) out << ',' << format_double(row.loss.coarse[c]);
    for (int c = 0; c < kNumClasses; ++c) out << ',' << format_double(row.loss.dense[c]);
    out << ',';
    if (row.val_dense_chamfer) out << format_double(*row.val_dense_chamfer);
    out << '\n';
}

double validation_dense_chamfer(const ModelParameters& params,
                                const std::vector<TrainPair>& pairs) {
    if (pairs.empty()) throw ConfigError("validation: no pairs");
    double sum = 0;
    for (const TrainPair& pair : pairs) {
        DeformationPrediction pred = predict_normalized(params, pair.input);
        double case_sum = 0;
        for (int c = 0; c < kNumClasses; ++c) {
            case_sum += chamfer(pred.dense[c], pair.target.class_points(c));
        }
        sum += case_sum / kNumClasses;
    }
    return sum / static_cast<double>(pairs.size());
}

namespace {

struct SampleGrad {
    LossBreakdown breakdown;
    std::vector<double> grads;
};

SampleGrad run_sample(const ModelParameters& params, const MultiClassPointCloud& input,
                      const ChamferTargets& targets, double alpha) {
    ad::Tape tape;
    ParamVars pv = register_params(tape, params, /*requires_grad=*/true);
    LossGraph g = total_loss_graph(tape, pv, params.arch, input, targets, alpha);
    tape.backward(g.total);

    SampleGrad out;
    out.breakdown = g.breakdown;
    out.grads.resize(params.table.size());
    for (size_t i = 0; i < pv.vars.size(); ++i) {
        const auto& e = params.table.entries[i];
        const auto& grad = tape.grad(pv.vars[i]);
        std::copy(grad.begin(), grad.end(), out.grads.begin() + e.offset);
    }
    return out;
}

}  // namespace

TrainResult train(const std::vector<TrainPair>& train_pairs,
                  const std::vector<TrainPair>& val_pairs, const ArchitectureConfig& arch,
                  const NormalizationTransform& norm, const TrainConfig& config,
                  std::ostream* log, const std::optional<std::filesystem::path>& checkpoint_path) {
    config.validate();
    if (train_pairs.empty()) throw ConfigError("train: empty training split");
    if (val_pairs.empty()) throw ConfigError("train: empty validation split");

    ModelParameters params = ModelParameters::init(arch, norm, Rng::mix(config.seed, 0x1217));
    ad::AdamState adam_state(params.table.size());

    // Per-target Chamfer structures are fixed; build them once.
    std::vector<ChamferTargets> targets;
    targets.reserve(train_pairs.size());
    for (const TrainPair& p : train_pairs) targets.push_back(ChamferTargets::build(p.target));

    if (log) write_log_header(*log);

    Rng shuffle_rng = Rng(config.seed).fork(0xBA7C);
    std::vector<size_t> order(train_pairs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size();  // triggers a shuffle on first use

    TrainResult result;
    result.best_val_metric = std::numeric_limits<double>::infinity();
    result.params = params;

    std::vector<double> grad_sum(params.table.size());
    int64_t step = 0;
    bool stop = false;

    auto run_validation = [&](int64_t at_step) {
        double metric = validation_dense_chamfer(params, val_pairs);
        if (metric < result.best_val_metric) {
            result.best_val_metric = metric;
            result.best_step = at_step;
            result.params = params;
            if (checkpoint_path) save_checkpoint_atomic(*checkpoint_path, result.params);
        }
        return metric;
    };

    while (!stop) {
        ++step;
        double alpha = alpha_schedule(step - 1, config);

        // Assemble the batch; reshuffle each epoch, keep the final partial batch.
        std::vector<size_t> batch;
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor == order.size()) {
                if (b > 0) break;  // partial epoch tail becomes its own batch
                shuffle_rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }

        std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
        LossBreakdown mean_loss;
        mean_loss.alpha = alpha;

        std::vector<SampleGrad> results(batch.size());
        try {
            if (config.threads > 1 && batch.size() > 1) {
                std::vector<std::future<SampleGrad>> futures;
                futures.reserve(batch.size());
                for (size_t bi = 0; bi < batch.size(); ++bi) {
                    size_t idx = batch[bi];
                    futures.push_back(std::async(std::launch::async, [&, idx] {
                        return run_sample(params, train_pairs[idx].input, targets[idx], alpha);
                    }));
                }
                for (size_t bi = 0; bi < batch.size(); ++bi) results[bi] = futures[bi].get();
            } else {
                for (size_t bi = 0; bi < batch.size(); ++bi) {
                    size_t idx = batch[bi];
                    results[bi] = run_sample(params, train_pairs[idx].input, targets[idx], alpha);
                }
            }
        } catch (const NumericError& e) {
            throw NumericError("train: numeric failure at step " + std::to_string(step) + ": " +
                               e.what());
        }

        // Single-reducer accumulation in batch order keeps results bitwise
        // reproducible regardless of the worker count.
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (const SampleGrad& r : results) {
            for (size_t i = 0; i < grad_sum.size(); ++i) grad_sum[i] += r.grads[i];
            mean_loss.total += r.breakdown.total;
            for (int c = 0; c < kNumClasses; ++c) {
                mean_loss.coarse[c] += r.breakdown.coarse[c];
                mean_loss.dense[c] += r.breakdown.dense[c];
            }
        }
        for (double& g : grad_sum) g *= inv;
        mean_loss.total *= inv;
        for (int c = 0; c < kNumClasses; ++c) {
            mean_loss.coarse[c] *= inv;
            mean_loss.dense[c] *= inv;
        }

        if (!std::isfinite(mean_loss.total)) {
            throw NumericError("train: non-finite loss at step " + std::to_string(step));
        }

        adam_step(params.table.values, grad_sum, adam_state, config.adam);

        TrainLogRow row;
        row.step = step;
        row.alpha = alpha;
        row.loss = mean_loss;

        if (config.max_steps > 0 && step >= config.max_steps) stop = true;

        if (step % config.validation_interval == 0) {
            row.val_dense_chamfer = run_validation(step);
            if (step - result.best_step >= config.patience) stop = true;
        } else if (stop) {
            // Final parameters still compete for best-on-validation.
            row.val_dense_chamfer = run_validation(step);
        }
        if (log) write_log_row(*log, row);
    }

    result.total_steps = step;
    return result;
}

}  // namespace pcd
