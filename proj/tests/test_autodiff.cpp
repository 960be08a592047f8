#include <doctest.h>

#include <cmath>

#include "pcd/adam.hpp"
#include "pcd/gradcheck.hpp"
#include "pcd/tensor.hpp"

using namespace pcd;
using ad::Shape;
using ad::Tape;
using ad::Var;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("elementwise square of [3] is [9]") {
    Tape tape;
    Var x = tape.leaf(Shape{1, 1}, std::vector<double>{3.0}, true);
    Var y = tape.mul(x, x);
    CHECK(tape.value_scalar(y) == 9.0);
}

TEST_CASE("identity matrix times vector reproduces the vector") {
    Tape tape;
    Var eye = tape.constant(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
    Var v = tape.constant(Shape{2, 1}, std::vector<double>{1, 2});
    Var y = tape.matmul(eye, v);
    CHECK(tape.values(y) == std::vector<double>{1, 2});
}

TEST_CASE("max over the point axis takes column maxima") {
    Tape tape;
    Var m = tape.constant(Shape{2, 2}, std::vector<double>{1, 5, 4, 2});
    Var y = tape.max_rows(m);
    CHECK(tape.values(y) == std::vector<double>{4, 5});
}

TEST_CASE("d/dx of x^2 at 3 is 6") {
    Tape tape;
    Var x = tape.leaf(Shape{1, 1}, std::vector<double>{3.0}, true);
    Var y = tape.mul(x, x);
    tape.backward(y);
    CHECK(tape.grad(x) == std::vector<double>{6.0});
}

TEST_CASE("max gradient routes to the single argmax element") {
    Tape tape;
    Var x = tape.leaf(Shape{2, 1}, std::vector<double>{2, 5}, true);
    Var y = tape.max_rows(x);
    tape.backward(y);
    CHECK(tape.grad(x) == std::vector<double>{0, 1});
}

TEST_CASE("max-pool tie routes gradient to the lowest row index") {
    Tape tape;
    Var x = tape.leaf(Shape{3, 1}, std::vector<double>{7, 7, 7}, true);
    Var y = tape.max_rows(x);
    tape.backward(y);
    CHECK(tape.grad(x) == std::vector<double>{1, 0, 0});
}

TEST_CASE("backward requires a scalar output") {
    Tape tape;
    Var x = tape.leaf(Shape{2, 1}, std::vector<double>{1, 2}, true);
    Var y = tape.relu(x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("shape mismatch errors name the operation and shapes") {
    Tape tape;
    Var a = tape.constant(Shape{2, 3}, std::vector<double>(6, 1.0));
    Var b = tape.constant(Shape{4, 5}, std::vector<double>(20, 1.0));
    try {
        tape.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

namespace {

// Small 2-layer MLP scalar objective for gradient checking.
struct MlpProblem {
    std::vector<double> w1, b1, w2, b2, x;
    int in = 3, hidden = 4;

    explicit MlpProblem(uint64_t seed) {
        Rng rng(seed);
        auto fill = [&](std::vector<double>& v, size_t n) {
            v.resize(n);
            for (double& e : v) e = rng.uniform(-1, 1);
        };
        fill(w1, in * hidden);
        fill(b1, hidden);
        fill(w2, hidden);
        fill(b2, 1);
        fill(x, 2 * in);  // two input rows
    }

    std::vector<double*> params() {
        std::vector<double*> p;
        for (auto* v : {&w1, &b1, &w2, &b2}) {
            for (double& e : *v) p.push_back(&e);
        }
        return p;
    }

    // loss = sum(relu(X W1 + b1) W2 + b2)
    double run(std::vector<double>* grads) const {
        Tape tape;
        Var xv = tape.constant(Shape{2, in}, x);
        Var w1v = tape.leaf(Shape{in, hidden}, w1, true);
        Var b1v = tape.leaf(Shape{1, hidden}, b1, true);
        Var w2v = tape.leaf(Shape{hidden, 1}, w2, true);
        Var b2v = tape.leaf(Shape{1, 1}, b2, true);
        Var h = tape.relu(tape.add_row(tape.matmul(xv, w1v), b1v));
        Var out = tape.sum(tape.add_row(tape.matmul(h, w2v), b2v));
        if (grads) {
            tape.backward(out);
            grads->clear();
            for (Var v : {w1v, b1v, w2v, b2v}) {
                const auto& g = tape.grad(v);
                grads->insert(grads->end(), g.begin(), g.end());
            }
        }
        return tape.value_scalar(out);
    }
};

}  // namespace

TEST_CASE("2-layer MLP gradient matches central differences below 1e-4") {
    MlpProblem problem(99);
    auto params = problem.params();
    ad::GradCheckProblem gc;
    gc.size = params.size();
    gc.value = [&] { return problem.run(nullptr); };
    gc.gradient = [&] {
        std::vector<double> g;
        problem.run(&g);
        return g;
    };
    gc.param = [&](size_t i) -> double& { return *params[i]; };
    auto report = ad::finite_difference_check(gc, 1e-5, 1e-4);
    INFO(report.str());
    CHECK(report.pass);
}

TEST_CASE("finite-difference harness accepts the quadratic and flags a wrong rule") {
    double x = 3.0;
    ad::GradCheckProblem gc;
    gc.size = 1;
    gc.value = [&] { return x * x; };
    gc.gradient = [&] { return std::vector<double>{2 * x}; };
    gc.param = [&](size_t) -> double& { return x; };
    auto good = ad::finite_difference_check(gc, 1e-5, 1e-8);
    INFO(good.str());
    CHECK(good.pass);
    CHECK(good.worst_relative_error < 1e-8);

    gc.gradient = [&] { return std::vector<double>{2 * x + 0.5}; };  // deliberately wrong
    auto bad = ad::finite_difference_check(gc, 1e-5, 1e-8);
    CHECK_FALSE(bad.pass);
}

namespace {

// Wraps a tape-building function into a gradcheck problem over a flat
// parameter buffer of the given shape.
ad::GradCheckReport check_op(std::vector<double>& params, ad::Shape shape,
                             const std::function<Var(Tape&, Var)>& body, double step = 1e-6,
                             double tol = 1e-4) {
    auto eval = [&](std::vector<double>* grads) {
        Tape tape;
        Var x = tape.leaf(shape, params, true);
        Var out = tape.sum(body(tape, x));
        if (grads) {
            tape.backward(out);
            *grads = tape.grad(x);
        }
        return tape.value_scalar(out);
    };
    ad::GradCheckProblem gc;
    gc.size = params.size();
    gc.value = [&] { return eval(nullptr); };
    gc.gradient = [&] {
        std::vector<double> g;
        eval(&g);
        return g;
    };
    gc.param = [&](size_t i) -> double& { return params[i]; };
    return ad::finite_difference_check(gc, step, tol);
}

}  // namespace

TEST_CASE("every differentiable operation matches central finite differences") {
    Rng rng(2025);
    auto randvec = [&](size_t n, double lo = -1, double hi = 1) {
        std::vector<double> v(n);
        for (double& e : v) e = rng.uniform(lo, hi);
        return v;
    };

    // Secondary constants reused by binary ops.
    std::vector<double> other = randvec(12);
    std::vector<double> row = randvec(4);
    auto target = std::make_shared<const ad::ChamferTarget>(
        PointList{{0.7, 0.2, -0.3}, {-0.6, 0.5, 0.1}, {0.2, -0.8, 0.4}});

    struct OpCase {
        const char* name;
        ad::Shape shape;
        std::function<Var(Tape&, Var)> body;
    };
    const std::vector<OpCase> cases = {
        {"add", {3, 4}, [&](Tape& t, Var x) { return t.add(x, t.constant({3, 4}, other)); }},
        {"sub", {3, 4}, [&](Tape& t, Var x) { return t.sub(t.constant({3, 4}, other), x); }},
        {"mul", {3, 4}, [&](Tape& t, Var x) { return t.mul(x, t.constant({3, 4}, other)); }},
        {"mul self", {3, 4}, [&](Tape& t, Var x) { return t.mul(x, x); }},
        {"scale", {3, 4}, [&](Tape& t, Var x) { return t.scale(x, -2.3); }},
        {"relu", {3, 4}, [&](Tape& t, Var x) { return t.relu(x); }},
        {"matmul lhs", {3, 4}, [&](Tape& t, Var x) { return t.matmul(x, t.constant({4, 3}, other)); }},
        {"matmul rhs", {4, 3}, [&](Tape& t, Var x) { return t.matmul(t.constant({3, 4}, other), x); }},
        {"add_row lhs", {3, 4}, [&](Tape& t, Var x) { return t.add_row(x, t.constant({1, 4}, row)); }},
        {"add_row bias", {1, 4}, [&](Tape& t, Var x) { return t.add_row(t.constant({3, 4}, other), x); }},
        {"tile_rows", {1, 4}, [&](Tape& t, Var x) { return t.tile_rows(x, 5); }},
        {"concat_cols", {3, 4}, [&](Tape& t, Var x) { return t.concat_cols(x, t.constant({3, 4}, other)); }},
        {"max_rows", {3, 4}, [&](Tape& t, Var x) { return t.max_rows(x); }},
        {"gather_rows", {3, 4}, [&](Tape& t, Var x) { return t.gather_rows(x, {2, 0, 2, 1}); }},
        {"reshape", {3, 4}, [&](Tape& t, Var x) { return t.reshape(x, ad::Shape{4, 3}); }},
        {"mean", {3, 4}, [&](Tape& t, Var x) { return t.mean(x); }},
        {"chamfer", {4, 3}, [&](Tape& t, Var x) { return t.chamfer(x, target); }},
    };

    for (const auto& c : cases) {
        std::vector<double> params = randvec(static_cast<size_t>(c.shape.numel()));
        auto report = check_op(params, c.shape, c.body);
        INFO(c.name, ": ", report.str());
        CHECK(report.pass);
    }
}

TEST_CASE("backward is deterministic: identical tapes give bitwise-identical gradients") {
    auto run = [] {
        Rng rng(5);
        std::vector<double> xv(12), wv(12);
        for (double& v : xv) v = rng.uniform(-1, 1);
        for (double& v : wv) v = rng.uniform(-1, 1);
        Tape tape;
        Var x = tape.leaf(Shape{4, 3}, xv, true);
        Var w = tape.leaf(Shape{3, 4}, wv, true);
        Var out = tape.sum(tape.relu(tape.matmul(x, w)));
        tape.backward(out);
        return std::make_pair(tape.grad(x), tape.grad(w));
    };
    auto [gx1, gw1] = run();
    auto [gx2, gw2] = run();
    CHECK(gx1 == gx2);
    CHECK(gw1 == gw2);
}

TEST_CASE("chamfer op value and gradient") {
    // A={0}, B={(1,0,0),(3,0,0)}: 0.5*(1 + (1+3)/2) = 1.5
    auto target = std::make_shared<const ad::ChamferTarget>(
        PointList{{1, 0, 0}, {3, 0, 0}});
    Tape tape;
    Var pred = tape.leaf(Shape{1, 3}, std::vector<double>{0, 0, 0}, true);
    Var d = tape.chamfer(pred, target);
    CHECK(tape.value_scalar(d) == doctest::Approx(1.5).epsilon(1e-15));

    SUBCASE("gradient matches central differences on a random non-degenerate pair") {
        Rng rng(17);
        std::vector<double> pv(15);
        for (double& v : pv) v = rng.uniform(-1, 1);
        auto tgt = std::make_shared<const ad::ChamferTarget>(PointList{
            {0.9, 0.1, 0.2}, {-0.8, 0.4, -0.1}, {0.2, -0.7, 0.6}, {0.1, 0.8, -0.5}});
        auto eval = [&](std::vector<double>* grads) {
            Tape t;
            Var p = t.leaf(Shape{5, 3}, pv, true);
            Var c = t.chamfer(p, tgt);
            if (grads) {
                t.backward(c);
                *grads = t.grad(p);
            }
            return t.value_scalar(c);
        };
        ad::GradCheckProblem gc;
        gc.size = pv.size();
        gc.value = [&] { return eval(nullptr); };
        gc.gradient = [&] {
            std::vector<double> g;
            eval(&g);
            return g;
        };
        gc.param = [&](size_t i) -> double& { return pv[i]; };
        auto report = ad::finite_difference_check(gc, 1e-6, 1e-4);
        INFO(report.str());
        CHECK(report.pass);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged for all steps") {
    std::vector<double> params{1.0, -2.0, 0.5};
    std::vector<double> grads(3, 0.0);
    ad::AdamState state(3);
    ad::AdamConfig cfg;
    for (int i = 0; i < 10; ++i) adam_step(params, grads, state, cfg);
    CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
    CHECK(state.step == 10);
}

TEST_CASE("adam: first step moves each weight by about lr times the gradient sign") {
    std::vector<double> params{0.0, 0.0};
    std::vector<double> grads{0.3, -4.0};
    ad::AdamState state(2);
    ad::AdamConfig cfg;  // lr 1e-3
    adam_step(params, grads, state, cfg);
    // bias-corrected mhat/sqrt(vhat) = g/|g|
    CHECK(params[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(params[1] == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("adam: repeated identical gradients keep both moments positive") {
    std::vector<double> params{1.0};
    std::vector<double> grads{0.25};
    ad::AdamState state(1);
    ad::AdamConfig cfg;
    adam_step(params, grads, state, cfg);
    adam_step(params, grads, state, cfg);
    CHECK(state.m[0] > 0);
    CHECK(state.v[0] > 0);
}

TEST_CASE("adam: size mismatch is rejected") {
    std::vector<double> params{1.0};
    std::vector<double> grads{0.1, 0.2};
    ad::AdamState state(1);
    CHECK_THROWS_AS(adam_step(params, grads, state, ad::AdamConfig{}), ShapeError);
}

TEST_SUITE_END();
