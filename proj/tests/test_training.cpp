#include <doctest.h>

#include <sstream>

#include "pcd/synthheart.hpp"
#include "pcd/training.hpp"

using namespace pcd;

TEST_SUITE_BEGIN("training");

namespace {

ArchitectureConfig toy_arch() {
    ArchitectureConfig a;
    a.input_points = 96;
    a.coarse_points = 4;
    a.grid_side = 4;
    a.latent_dim = 8;
    a.pointnet1_widths = {8, 16};
    a.pointnet2_widths = {24, 32};
    a.latent_mlp_widths = {16};
    a.coarse_mlp_widths = {16, 32};
    a.folding_mlp_widths = {16, 8};
    return a;
}

MultiClassPointCloud toy_cloud(uint64_t seed, int per_class = 32) {
    Rng rng(seed);
    MultiClassPointCloud cloud;
    for (int c = 0; c < kNumClasses; ++c) {
        for (int i = 0; i < per_class; ++i) {
            cloud.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                             rng.uniform(-0.5, 0.5)},
                            static_cast<uint8_t>(c));
        }
    }
    return cloud;
}

DeformationPrediction cloud_as_prediction(const MultiClassPointCloud& cloud, int per_class) {
    DeformationPrediction pred;
    for (int c = 0; c < kNumClasses; ++c) {
        PointList pts = cloud.class_points(c);
        pts.resize(per_class, pts.front());
        pred.coarse[c] = pts;
        pred.dense[c] = pts;
    }
    return pred;
}

}  // namespace

TEST_CASE("total loss is zero when both outputs equal the target") {
    auto target = toy_cloud(1);
    auto pred = cloud_as_prediction(target, 32);
    LossBreakdown l = total_loss(pred, target, 0.7);
    CHECK(l.total == 0.0);
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(l.coarse[c] == 0.0);
        CHECK(l.dense[c] == 0.0);
    }
}

TEST_CASE("alpha 0 keeps only the coarse terms") {
    auto target = toy_cloud(2);
    auto other = toy_cloud(3);
    auto pred = cloud_as_prediction(other, 32);
    LossBreakdown l = total_loss(pred, target, 0.0);
    double coarse_sum = l.coarse[0] + l.coarse[1] + l.coarse[2];
    CHECK(l.total == doctest::Approx(coarse_sum).epsilon(1e-15));
    CHECK(coarse_sum > 0);
}

TEST_CASE("loss is linear in alpha") {
    auto target = toy_cloud(4);
    auto pred = cloud_as_prediction(toy_cloud(5), 32);
    LossBreakdown lo = total_loss(pred, target, 0.01);
    LossBreakdown hi = total_loss(pred, target, 5.0);
    double dense_sum = lo.dense[0] + lo.dense[1] + lo.dense[2];
    CHECK(hi.total - lo.total == doctest::Approx(4.99 * dense_sum).epsilon(1e-12));
}

TEST_CASE("loss breakdown total is reconstructible from its fields") {
    auto target = toy_cloud(6);
    auto pred = cloud_as_prediction(toy_cloud(7), 32);
    LossBreakdown l = total_loss(pred, target, 1.7);
    double rebuilt = 0;
    for (int c = 0; c < kNumClasses; ++c) rebuilt += l.coarse[c] + l.alpha * l.dense[c];
    CHECK(l.total == doctest::Approx(rebuilt).epsilon(1e-12));
}

TEST_CASE("graph loss agrees with the non-graph loss") {
    ArchitectureConfig arch = toy_arch();
    auto params = ModelParameters::init(arch, {}, 40);
    auto input = toy_cloud(8);
    auto target = toy_cloud(9);

    ad::Tape tape;
    ParamVars pv = register_params(tape, params, false);
    LossGraph g = total_loss_graph(tape, pv, arch, input, ChamferTargets::build(target), 0.5);

    auto pred = predict_normalized(params, input);
    LossBreakdown direct = total_loss(pred, target, 0.5);
    CHECK(g.breakdown.total == doctest::Approx(direct.total).epsilon(1e-12));
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(g.breakdown.coarse[c] == doctest::Approx(direct.coarse[c]).epsilon(1e-12));
        CHECK(g.breakdown.dense[c] == doctest::Approx(direct.dense[c]).epsilon(1e-12));
    }
}

TEST_CASE("alpha schedule endpoints and lookup") {
    TrainConfig cfg;
    CHECK(alpha_schedule(0, cfg) == 0.01);
    CHECK(alpha_schedule(4999, cfg) == 0.01);
    CHECK(alpha_schedule(20000, cfg) == 0.5);
    CHECK(alpha_schedule(50000, cfg) == 5.0);
    CHECK(alpha_schedule(1000000, cfg) == 5.0);
}

TEST_CASE("alpha schedule is monotone non-decreasing with range in [0.01, 5]") {
    TrainConfig cfg;
    double prev = 0;
    for (int64_t step = 0; step < 60000; step += 37) {
        double a = alpha_schedule(step, cfg);
        CHECK(a >= prev);
        CHECK(a >= 0.01);
        CHECK(a <= 5.0);
        prev = a;
    }
}

TEST_CASE("split 100 records into 70/5/25") {
    SplitIndices s = split_dataset(100, 0.70, 0.05, 0.25, 9);
    CHECK(s.train.size() == 70);
    CHECK(s.validation.size() == 5);
    CHECK(s.test.size() == 25);
}

TEST_CASE("split is a disjoint cover and deterministic under seed") {
    SplitIndices a = split_dataset(53, 0.70, 0.05, 0.25, 77);
    SplitIndices b = split_dataset(53, 0.70, 0.05, 0.25, 77);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);

    std::vector<bool> seen(53, false);
    for (const auto* part : {&a.train, &a.validation, &a.test}) {
        for (size_t i : *part) {
            CHECK_FALSE(seen[i]);
            seen[i] = true;
        }
    }
    for (bool s : seen) CHECK(s);
}

TEST_CASE("split rejects fewer than 3 records and bad fractions") {
    CHECK_THROWS_AS(split_dataset(2, 0.7, 0.05, 0.25, 1), ConfigError);
    CHECK_THROWS_AS(split_dataset(10, 0.7, 0.1, 0.1, 1), ConfigError);
}

namespace {

TrainConfig fast_config(int64_t max_steps) {
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.validation_interval = 25;
    cfg.patience = 10000;
    cfg.max_steps = max_steps;
    cfg.seed = 5150;
    return cfg;
}

std::pair<std::vector<TrainPair>, NormalizationTransform> single_pair_dataset() {
    HeartParams hp;
    DeformationParams dp;
    dp.noise_mm = 0;
    auto ed = generate_ed(hp, 64, 1111);
    auto es = deform_to_es(ed, hp, dp, 2222);
    std::vector<const MultiClassPointCloud*> clouds{&ed, &es};
    NormalizationTransform norm = fit_normalization(clouds);
    TrainPair pair{normalize(ed, norm), normalize(es, norm)};
    return {{pair}, norm};
}

}  // namespace

TEST_CASE("training loss on a memorized pair drops well below its initial value") {
    auto [pairs, norm] = single_pair_dataset();
    ArchitectureConfig arch = toy_arch();
    arch.input_points = 192;

    std::ostringstream log;
    TrainConfig cfg = fast_config(400);
    TrainResult result = train(pairs, pairs, arch, norm, cfg, &log);

    // First and last logged loss_total column.
    std::istringstream rows(log.str());
    std::string line;
    std::getline(rows, line);  // header
    double first = -1, last = -1;
    while (std::getline(rows, line)) {
        auto cols = split(line, ',');
        REQUIRE(cols.size() == 10);
        double v = parse_double(cols[2], "loss_total");
        if (first < 0) first = v;
        last = v;
    }
    CHECK(first > 0);
    CHECK(last < 0.5 * first);
    CHECK(result.best_val_metric < first);
}

TEST_CASE("early stopping halts shortly after the best validation step") {
    auto [pairs, norm] = single_pair_dataset();
    ArchitectureConfig arch = toy_arch();
    arch.input_points = 192;

    TrainConfig cfg = fast_config(0);
    cfg.validation_interval = 10;
    cfg.patience = 30;
    // Absurd learning rate: progress stalls immediately, so patience expires.
    cfg.adam.learning_rate = 40.0;
    TrainResult result = train(pairs, pairs, arch, norm, cfg, nullptr);
    CHECK(result.total_steps <= result.best_step + cfg.patience + cfg.validation_interval);
    CHECK(result.best_val_metric <= validation_dense_chamfer(result.params, pairs) + 1e-12);
}

TEST_CASE("training is deterministic: same seed, same checkpoint bitwise") {
    auto [pairs, norm] = single_pair_dataset();
    ArchitectureConfig arch = toy_arch();
    arch.input_points = 192;
    TrainConfig cfg = fast_config(60);

    TrainResult a = train(pairs, pairs, arch, norm, cfg, nullptr);
    TrainResult b = train(pairs, pairs, arch, norm, cfg, nullptr);
    CHECK(a.params.table.values == b.params.table.values);
    CHECK(a.best_val_metric == b.best_val_metric);

    SUBCASE("and bitwise identical with parallel batch workers") {
        TrainConfig threaded = cfg;
        threaded.threads = 3;
        TrainResult c = train(pairs, pairs, arch, norm, threaded, nullptr);
        CHECK(c.params.table.values == a.params.table.values);
    }
}

TEST_CASE("non-finite loss aborts with the step in the message") {
    auto [pairs, norm] = single_pair_dataset();
    // Blow up the inputs so the forward pass overflows.
    for (Vec3& p : pairs[0].input.points) p = p * 1e160;
    ArchitectureConfig arch = toy_arch();
    arch.input_points = 192;
    TrainConfig cfg = fast_config(10);
    try {
        train(pairs, pairs, arch, norm, cfg, nullptr);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("log rows are monotone in step and carry the validation column") {
    auto [pairs, norm] = single_pair_dataset();
    ArchitectureConfig arch = toy_arch();
    arch.input_points = 192;
    TrainConfig cfg = fast_config(50);
    cfg.validation_interval = 20;
    std::ostringstream log;
    train(pairs, pairs, arch, norm, cfg, &log);

    std::istringstream rows(log.str());
    std::string line;
    std::getline(rows, line);
    CHECK(line ==
          "step,alpha,loss_total,loss_coarse_lvendo,loss_coarse_lvepi,loss_coarse_rvendo,"
          "loss_dense_lvendo,loss_dense_lvepi,loss_dense_rvendo,val_dense_chamfer");
    int64_t prev = 0;
    int val_rows = 0;
    while (std::getline(rows, line)) {
        auto cols = split(line, ',');
        int64_t step = parse_int(cols[0], "step");
        CHECK(step > prev);
        prev = step;
        if (!cols[9].empty()) ++val_rows;
    }
    CHECK(val_rows >= 2);  // steps 20, 40, final
}

TEST_SUITE_END();
