#include "pcd/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pcd {

namespace {

// Dense symmetric solve (Gaussian elimination, partial pivoting); dimensions
// here are z+1 at most.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        }
        if (std::abs(a[pivot * n + col]) < 1e-300) {
            throw NumericError("linear solve: singular system");
        }
        if (pivot != col) {
            for (size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
            std::swap(b[col], b[pivot]);
        }
        double inv = 1.0 / a[col * n + col];
        for (size_t r = col + 1; r < n; ++r) {
            double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t ri = n; ri-- > 0;) {
        double s = b[ri];
        for (size_t j = ri + 1; j < n; ++j) s -= a[ri * n + j] * x[j];
        x[ri] = s / a[ri * n + ri];
    }
    return x;
}

double sigmoid(double t) {
    if (t >= 0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    double e = std::exp(t);
    return e / (1.0 + e);
}

// -log p(y|t) for logistic, numerically stable.
double logistic_nll_term(double t, int y) {
    // log(1 + exp(-|t|)) + max(0, -yt-ish) form
    double m = std::max(t, 0.0);
    return m - t * y + std::log1p(std::exp(-std::abs(t)));
}

}  // namespace

LatentDataset extract_latents(const std::vector<const SubjectRecord*>& records,
                              const ModelParameters& params, Direction direction) {
    if (records.empty()) throw ConfigError("extract_latents: no records");
    LatentDataset out;
    out.cases = records.size();
    out.dim = static_cast<size_t>(params.arch.latent_dim);
    out.features.reserve(out.cases * out.dim);
    for (const SubjectRecord* rec : records) {
        if (!rec) throw ConfigError("extract_latents: null record");
        const MultiClassPointCloud& cloud = direction == Direction::kEd2Es ? rec->ed : rec->es;
        std::vector<double> z;
        try {
            z = encode_latent(params, cloud);
        } catch (const std::exception& e) {
            throw ConfigError("extract_latents: subject " + rec->id + ": " + e.what());
        }
        out.features.insert(out.features.end(), z.begin(), z.end());
        out.ids.push_back(rec->id);
    }
    return out;
}

StandardScaler StandardScaler::fit(const std::vector<std::span<const double>>& rows) {
    if (rows.empty()) throw ConfigError("scaler: no rows");
    const size_t dim = rows[0].size();
    StandardScaler s;
    s.mean.assign(dim, 0.0);
    s.sd.assign(dim, 0.0);
    for (const auto& r : rows) {
        for (size_t j = 0; j < dim; ++j) s.mean[j] += r[j];
    }
    for (size_t j = 0; j < dim; ++j) s.mean[j] /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
        for (size_t j = 0; j < dim; ++j) {
            double d = r[j] - s.mean[j];
            s.sd[j] += d * d;
        }
    }
    for (size_t j = 0; j < dim; ++j) {
        s.sd[j] = std::sqrt(s.sd[j] / static_cast<double>(rows.size()));
        if (s.sd[j] == 0) s.sd[j] = 1.0;  // constant feature: center only
    }
    return s;
}

std::vector<double> StandardScaler::transform(std::span<const double> row) const {
    std::vector<double> out(row.size());
    for (size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / sd[j];
    return out;
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("ks_two_sample: empty sample");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    KsResult res;
    res.n_a = sa.size();
    res.n_b = sb.size();
    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());

    // Track the CDF gap as the integer |i*nb - j*na| so exact fractions like
    // 1/3 survive; one division at the end.
    size_t i = 0, j = 0;
    uint64_t worst_num = 0;
    while (i < sa.size() && j < sb.size()) {
        double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == x) ++i;
        while (j < sb.size() && sb[j] == x) ++j;
        int64_t gap = static_cast<int64_t>(i * sb.size()) - static_cast<int64_t>(j * sa.size());
        worst_num = std::max(worst_num, static_cast<uint64_t>(gap < 0 ? -gap : gap));
    }
    res.d = static_cast<double>(worst_num) / (na * nb);

    double ne = na * nb / (na + nb);
    double lambda = std::sqrt(ne) * res.d;
    if (lambda < 0.05) {
        res.p_value = 1.0;
        return res;
    }
    double q = 0;
    double sign = 1;
    for (int kterm = 1; kterm <= 1000; ++kterm) {
        double term = std::exp(-2.0 * kterm * kterm * lambda * lambda);
        q += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    res.p_value = std::clamp(2.0 * q, 0.0, 1.0);
    return res;
}

double LogisticModel::predict_probability(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw ShapeError("logistic predict: feature size " + std::to_string(x.size()) +
                         " does not match model size " + std::to_string(weights.size()));
    }
    double t = intercept;
    for (size_t j = 0; j < x.size(); ++j) t += weights[j] * x[j];
    return sigmoid(t);
}

LogisticModel logistic_fit(const std::vector<std::span<const double>>& rows,
                           const std::vector<int>& labels, double l2_strength) {
    if (rows.size() != labels.size() || rows.empty()) {
        throw ConfigError("logistic_fit: rows/labels size mismatch or empty input");
    }
    size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw ConfigError("logistic_fit: labels must be 0/1");
        pos += static_cast<size_t>(y);
    }
    if (pos < 2 || rows.size() - pos < 2) {
        throw ConfigError("logistic_fit: need at least 2 cases per label");
    }
    if (l2_strength < 0) throw ConfigError("logistic_fit: l2 strength must be non-negative");

    const size_t n = rows.size();
    const size_t d = rows[0].size();
    const size_t dim = d + 1;  // weights then intercept, unpenalized intercept

    std::vector<double> beta(dim, 0.0);
    auto linear = [&](size_t i, const std::vector<double>& bb) {
        double t = bb[d];
        for (size_t j = 0; j < d; ++j) t += bb[j] * rows[i][j];
        return t;
    };
    auto objective = [&](const std::vector<double>& bb) {
        double o = 0;
        for (size_t i = 0; i < n; ++i) o += logistic_nll_term(linear(i, bb), labels[i]);
        for (size_t j = 0; j < d; ++j) o += 0.5 * l2_strength * bb[j] * bb[j];
        return o;
    };

    LogisticModel model;
    double obj = objective(beta);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<double> grad(dim, 0.0);
        std::vector<double> hess(dim * dim, 0.0);
        for (size_t i = 0; i < n; ++i) {
            double p = sigmoid(linear(i, beta));
            double r = p - labels[i];
            double w = std::max(p * (1.0 - p), 1e-12);
            for (size_t j = 0; j < dim; ++j) {
                double xj = j < d ? rows[i][j] : 1.0;
                grad[j] += r * xj;
                for (size_t k2 = j; k2 < dim; ++k2) {
                    double xk = k2 < d ? rows[i][k2] : 1.0;
                    hess[j * dim + k2] += w * xj * xk;
                }
            }
        }
        for (size_t j = 0; j < d; ++j) {
            grad[j] += l2_strength * beta[j];
            hess[j * dim + j] += l2_strength;
        }
        for (size_t j = 0; j < dim; ++j) {
            for (size_t k2 = 0; k2 < j; ++k2) hess[j * dim + k2] = hess[k2 * dim + j];
        }

        double gnorm = 0;
        for (double g : grad) gnorm += g * g;
        gnorm = std::sqrt(gnorm);
        model.iterations = iter;
        if (gnorm < 1e-8) {
            model.converged = true;
            break;
        }

        std::vector<double> delta = solve_linear(hess, grad);
        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            std::vector<double> cand = beta;
            for (size_t j = 0; j < dim; ++j) cand[j] -= step * delta[j];
            double cobj = objective(cand);
            if (cobj <= obj) {  // non-increasing penalized objective
                beta = std::move(cand);
                obj = cobj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // stationary within line-search resolution
    }

    model.weights.assign(beta.begin(), beta.begin() + d);
    model.intercept = beta[d];
    return model;
}

ClassificationMetrics classification_metrics(std::span<const double> scores,
                                             const std::vector<int>& labels, double threshold) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw ConfigError("classification_metrics: scores/labels size mismatch or empty");
    }
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    size_t n_pos = 0, n_neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        if (labels[i] == 1) {
            ++n_pos;
            pred ? ++tp : ++fn;
        } else {
            ++n_neg;
            pred ? ++fp : ++tn;
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw ConfigError("classification_metrics: AUROC undefined with a single label");
    }

    ClassificationMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    m.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.f1 = (m.precision + m.recall) == 0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);

    // Mann-Whitney pair statistic; 0/0.5/1 contributions are exact in binary64.
    double concordant = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            if (scores[i] > scores[j]) {
                concordant += 1.0;
            } else if (scores[i] == scores[j]) {
                concordant += 0.5;
            }
        }
    }
    m.auroc = concordant / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    return m;
}

std::vector<int> stratified_folds(const std::vector<int>& strata, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("folds: k must be at least 2");
    if (static_cast<size_t>(k) > strata.size()) {
        throw ConfigError("folds: k exceeds the number of cases");
    }
    std::map<int, std::vector<size_t>> groups;
    for (size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

    std::vector<int> fold(strata.size(), -1);
    Rng root(seed);
    for (auto& [value, indices] : groups) {
        Rng rng = root.fork(static_cast<uint64_t>(value) + 0x51AB);
        rng.shuffle(indices);
        for (size_t i = 0; i < indices.size(); ++i) {
            fold[indices[i]] = static_cast<int>(i % static_cast<size_t>(k));
        }
    }
    return fold;
}

ClassificationMetrics kfold_cv_classify(const LatentDataset& data, const std::vector<int>& labels,
                                        int k, double l2_strength, uint64_t seed) {
    if (data.cases != labels.size()) throw ConfigError("cv: dataset/labels size mismatch");
    if (static_cast<size_t>(k) > data.cases) throw ConfigError("cv: k exceeds the case count");
    std::vector<int> fold = stratified_folds(labels, k, seed);

    ClassificationMetrics mean;
    for (int f = 0; f < k; ++f) {
        std::vector<std::span<const double>> train_rows;
        std::vector<int> train_labels;
        std::vector<size_t> test_idx;
        for (size_t i = 0; i < data.cases; ++i) {
            if (fold[i] == f) {
                test_idx.push_back(i);
            } else {
                train_rows.push_back(data.row(i));
                train_labels.push_back(labels[i]);
            }
        }
        StandardScaler scaler = StandardScaler::fit(train_rows);
        std::vector<std::vector<double>> train_std;
        train_std.reserve(train_rows.size());
        for (const auto& r : train_rows) train_std.push_back(scaler.transform(r));
        std::vector<std::span<const double>> train_view(train_std.begin(), train_std.end());
        LogisticModel model = logistic_fit(train_view, train_labels, l2_strength);

        std::vector<double> scores;
        std::vector<int> test_labels;
        scores.reserve(test_idx.size());
        for (size_t i : test_idx) {
            scores.push_back(model.predict_probability(scaler.transform(data.row(i))));
            test_labels.push_back(labels[i]);
        }
        ClassificationMetrics fm = classification_metrics(scores, test_labels);
        mean.accuracy += fm.accuracy;
        mean.auroc += fm.auroc;
        mean.f1 += fm.f1;
        mean.precision += fm.precision;
        mean.recall += fm.recall;
    }
    mean.accuracy /= k;
    mean.auroc /= k;
    mean.f1 /= k;
    mean.precision /= k;
    mean.recall /= k;
    return mean;
}

double SurvivalFit::risk_score(std::span<const double> x) const {
    if (x.size() != coefficients.size()) {
        throw ShapeError("cox risk: feature size does not match coefficient count");
    }
    double t = 0;
    for (size_t j = 0; j < x.size(); ++j) t += coefficients[j] * x[j];
    return t;
}

SurvivalFit cox_fit(const std::vector<std::span<const double>>& rows,
                    const std::vector<int>& events, const std::vector<double>& times,
                    double ridge) {
    const size_t n = rows.size();
    if (n == 0 || events.size() != n || times.size() != n) {
        throw ConfigError("cox_fit: rows/events/times size mismatch or empty");
    }
    size_t n_events = 0;
    for (size_t i = 0; i < n; ++i) {
        if (events[i] != 0 && events[i] != 1) throw ConfigError("cox_fit: events must be 0/1");
        if (!(times[i] > 0)) throw ConfigError("cox_fit: times must be positive");
        n_events += static_cast<size_t>(events[i]);
    }
    if (n_events == 0) throw ConfigError("cox_fit: no events");
    const size_t d = rows[0].size();

    // Ascending time; ties grouped, Breslow denominator shared within a group.
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (times[a] != times[b]) return times[a] < times[b];
        return a < b;
    });

    std::vector<double> beta(d, 0.0);
    auto eta = [&](size_t i, const std::vector<double>& bb) {
        double t = 0;
        for (size_t j = 0; j < d; ++j) t += bb[j] * rows[i][j];
        return t;
    };

    // Penalized negative Breslow partial log-likelihood.
    auto objective = [&](const std::vector<double>& bb) {
        double nll = 0;
        double s0 = 0;
        size_t idx = n;
        // Walk from the largest time down; the risk set accumulates.
        while (idx > 0) {
            size_t group_end = idx;
            double t = times[order[idx - 1]];
            while (idx > 0 && times[order[idx - 1]] == t) {
                s0 += std::exp(eta(order[idx - 1], bb));
                --idx;
            }
            for (size_t r = idx; r < group_end; ++r) {
                size_t i = order[r];
                if (events[i]) nll -= eta(i, bb) - std::log(s0);
            }
        }
        for (size_t j = 0; j < d; ++j) nll += 0.5 * ridge * bb[j] * bb[j];
        return nll;
    };

    SurvivalFit fit;
    double obj = objective(beta);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<double> grad(d, 0.0);
        std::vector<double> hess(d * d, 0.0);
        {
            double s0 = 0;
            std::vector<double> s1(d, 0.0);
            std::vector<double> s2(d * d, 0.0);
            size_t idx = n;
            while (idx > 0) {
                size_t group_end = idx;
                double t = times[order[idx - 1]];
                while (idx > 0 && times[order[idx - 1]] == t) {
                    size_t i = order[idx - 1];
                    double w = std::exp(eta(i, beta));
                    s0 += w;
                    for (size_t j = 0; j < d; ++j) {
                        s1[j] += w * rows[i][j];
                        for (size_t k2 = 0; k2 < d; ++k2) {
                            s2[j * d + k2] += w * rows[i][j] * rows[i][k2];
                        }
                    }
                    --idx;
                }
                for (size_t r = idx; r < group_end; ++r) {
                    size_t i = order[r];
                    if (!events[i]) continue;
                    for (size_t j = 0; j < d; ++j) {
                        double m1 = s1[j] / s0;
                        grad[j] += m1 - rows[i][j];
                        for (size_t k2 = 0; k2 < d; ++k2) {
                            hess[j * d + k2] += s2[j * d + k2] / s0 - m1 * (s1[k2] / s0);
                        }
                    }
                }
            }
        }
        for (size_t j = 0; j < d; ++j) {
            grad[j] += ridge * beta[j];
            hess[j * d + j] += ridge;
        }

        double gnorm = 0;
        for (double g : grad) gnorm += g * g;
        gnorm = std::sqrt(gnorm);
        fit.iterations = iter;

        std::vector<double> delta = solve_linear(hess, grad);
        double dnorm = 0;
        for (double v : delta) dnorm = std::max(dnorm, std::abs(v));
        // The Newton step estimates the distance to the optimum, which stays
        // meaningful even when the objective is nearly flat (tiny Hessian)
        // and the gradient alone would stop far from the argmin.
        if (dnorm < 1e-8 || gnorm < 1e-10) {
            for (size_t j = 0; j < d; ++j) beta[j] -= delta[j];
            fit.converged = true;
            break;
        }

        double step = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            std::vector<double> cand = beta;
            for (size_t j = 0; j < d; ++j) cand[j] -= step * delta[j];
            double cobj = objective(cand);
            if (cobj <= obj) {
                beta = std::move(cand);
                obj = cobj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Objective flat at floating-point resolution; the convex NLL plus
            // ridge guarantees descent otherwise, so this is the optimum as
            // long as the gradient agrees.
            if (gnorm < 1e-6) fit.converged = true;
            break;
        }
    }

    if (!fit.converged) {
        throw NumericError("cox_fit: no convergence after " + std::to_string(fit.iterations + 1) +
                           " iterations (Newton step still above 1e-8)");
    }

    fit.coefficients = beta;
    std::vector<double> risks(n);
    for (size_t i = 0; i < n; ++i) risks[i] = eta(i, beta);
    fit.concordance = harrell_c(risks, events, times);
    return fit;
}

double harrell_c(std::span<const double> risks, const std::vector<int>& events,
                 const std::vector<double>& times) {
    const size_t n = risks.size();
    if (events.size() != n || times.size() != n) {
        throw ConfigError("harrell_c: input size mismatch");
    }
    double comparable = 0, concordant = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            size_t early, late;
            if (times[i] < times[j]) {
                early = i;
                late = j;
            } else if (times[j] < times[i]) {
                early = j;
                late = i;
            } else {
                continue;  // tied times: ordering indeterminable
            }
            if (!events[early]) continue;  // censored before the other's time
            comparable += 1.0;
            if (risks[early] > risks[late]) {
                concordant += 1.0;
            } else if (risks[early] == risks[late]) {
                concordant += 0.5;
            }
        }
    }
    if (comparable == 0) throw ConfigError("harrell_c: no comparable pairs");
    return concordant / comparable;
}

double kfold_cv_cox(const LatentDataset& data, const std::vector<int>& events,
                    const std::vector<double>& times, int k, uint64_t seed, double ridge) {
    if (data.cases != events.size() || data.cases != times.size()) {
        throw ConfigError("cv cox: dataset/outcome size mismatch");
    }
    if (static_cast<size_t>(k) > data.cases) throw ConfigError("cv cox: k exceeds the case count");
    std::vector<int> fold = stratified_folds(events, k, seed);

    double mean_c = 0;
    for (int f = 0; f < k; ++f) {
        std::vector<std::span<const double>> train_rows;
        std::vector<int> train_events;
        std::vector<double> train_times;
        std::vector<size_t> test_idx;
        for (size_t i = 0; i < data.cases; ++i) {
            if (fold[i] == f) {
                test_idx.push_back(i);
            } else {
                train_rows.push_back(data.row(i));
                train_events.push_back(events[i]);
                train_times.push_back(times[i]);
            }
        }
        StandardScaler scaler = StandardScaler::fit(train_rows);
        std::vector<std::vector<double>> train_std;
        train_std.reserve(train_rows.size());
        for (const auto& r : train_rows) train_std.push_back(scaler.transform(r));
        std::vector<std::span<const double>> train_view(train_std.begin(), train_std.end());
        SurvivalFit fit = cox_fit(train_view, train_events, train_times, ridge);

        std::vector<double> risks;
        std::vector<int> test_events;
        std::vector<double> test_times;
        for (size_t i : test_idx) {
            std::vector<double> x = scaler.transform(data.row(i));
            risks.push_back(fit.risk_score(x));
            test_events.push_back(events[i]);
            test_times.push_back(times[i]);
        }
        mean_c += harrell_c(risks, test_events, test_times);
    }
    return mean_c / k;
}

}  // namespace pcd
