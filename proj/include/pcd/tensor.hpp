#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcd/geometry.hpp"

namespace pcd::ad {

struct Shape {
    std::vector<int> dims;

    Shape() = default;
    Shape(std::initializer_list<int> d) : dims(d) {}
    explicit Shape(std::vector<int> d) : dims(std::move(d)) {}

    int64_t numel() const {
        int64_t n = 1;
        for (int d : dims) n *= d;
        return n;
    }
    int rank() const { return static_cast<int>(dims.size()); }
    int rows() const { return dims.at(0); }
    int cols() const { return dims.at(1); }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

// Handle into a Tape.
struct Var {
    int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Fixed ground-truth side of the Chamfer loss; built once per training target
// and shared across steps.
struct ChamferTarget {
    PointList points;
    NearestNeighborIndex index;

    explicit ChamferTarget(PointList pts) : points(std::move(pts)), index(points) {}
};

// Reverse-mode tape over dense float64 tensors, define-by-run: each forward
// pass builds a fresh tape, backward() walks it once in reverse. Operations
// are recorded in topological order by construction.
class Tape {
public:
    Var leaf(Shape shape, std::span<const double> values, bool requires_grad);
    Var constant(Shape shape, std::span<const double> values) { return leaf(shape, values, false); }

    // elementwise, same shape
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var relu(Var a);

    // 2-D linear algebra
    Var matmul(Var a, Var b);               // [n,k] x [k,m] -> [n,m]
    Var add_row(Var m, Var row);            // [n,f] + [1,f] broadcast over rows
    Var tile_rows(Var row, int n);          // [1,f] -> [n,f]
    Var concat_cols(Var a, Var b);          // [n,fa] | [n,fb] -> [n,fa+fb]
    Var max_rows(Var m);                    // column-wise max: [n,f] -> [1,f]; ties -> lowest row
    Var gather_rows(Var m, std::vector<int32_t> rows);
    Var reshape(Var a, Shape shape);

    // reductions
    Var sum(Var a);
    Var mean(Var a);

    // Symmetric Chamfer distance between the [k,3] prediction and a fixed
    // target set; gradient flows to the single nearest neighbor per term
    // (ties -> lowest index, zero-distance pairs get zero gradient).
    Var chamfer(Var pred, std::shared_ptr<const ChamferTarget> target);

    // output must be scalar; visits every recorded operation exactly once in
    // reverse order. Deterministic: fixed iteration order throughout.
    void backward(Var output);

    const Shape& shape(Var v) const { return node(v).shape; }
    const std::vector<double>& values(Var v) const { return node(v).value; }
    const std::vector<double>& grad(Var v) const;
    double value_scalar(Var v) const;
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    size_t size() const { return nodes_.size(); }

private:
    enum class Op : uint8_t {
        kLeaf,
        kAdd,
        kSub,
        kMul,
        kScale,
        kRelu,
        kMatmul,
        kAddRow,
        kTileRows,
        kConcatCols,
        kMaxRows,
        kGatherRows,
        kReshape,
        kSum,
        kMean,
        kChamfer,
    };

    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = false;
        Op op = Op::kLeaf;
        int32_t in0 = -1, in1 = -1;
        double scalar = 0;
        std::vector<int32_t> idata;
        std::vector<double> ddata;
        std::shared_ptr<const ChamferTarget> target;
    };

    Node& node(Var v) { return nodes_.at(static_cast<size_t>(v.id)); }
    const Node& node(Var v) const { return nodes_.at(static_cast<size_t>(v.id)); }
    Var push(Node n);
    void backward_node(int32_t id);

    std::vector<Node> nodes_;
};

}  // namespace pcd::ad
