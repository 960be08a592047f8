#include "pcd/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace pcd::ad {

std::string Shape::str() const {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

namespace {

[[noreturn]] void shape_error(const std::string& op, const Shape& a) {
    throw ShapeError(op + ": invalid shape " + a.str());
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
    throw ShapeError(op + ": incompatible shapes " + a.str() + " and " + b.str());
}

void require_2d(const char* op, const Shape& s) {
    if (s.rank() != 2) shape_error(std::string(op) + " (expects 2-D)", s);
}

// C[M,N] += A[M,K] * B[K,N]
void matmul_accum(std::span<const double> a, std::span<const double> b, std::span<double> c,
                  int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a.data() + static_cast<size_t>(i) * k;
        double* crow = c.data() + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b.data() + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// dA[M,K] += G[M,N] * B[K,N]^T
void matmul_accum_nt(std::span<const double> g, std::span<const double> b, std::span<double> da,
                     int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* grow = g.data() + static_cast<size_t>(i) * n;
        double* darow = da.data() + static_cast<size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double* brow = b.data() + static_cast<size_t>(kk) * n;
            double s = 0;
            for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
            darow[kk] += s;
        }
    }
}

// dB[K,N] += A[M,K]^T * G[M,N]
void matmul_accum_tn(std::span<const double> a, std::span<const double> g, std::span<double> db,
                     int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a.data() + static_cast<size_t>(i) * k;
        const double* grow = g.data() + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            if (av == 0.0) continue;
            double* dbrow = db.data() + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) dbrow[j] += av * grow[j];
        }
    }
}

}  // namespace

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Shape shape, std::span<const double> values, bool requires_grad) {
    if (shape.numel() != static_cast<int64_t>(values.size())) {
        throw ShapeError("leaf: shape " + shape.str() + " does not match value count " +
                         std::to_string(values.size()));
    }
    Node n;
    n.shape = std::move(shape);
    n.value.assign(values.begin(), values.end());
    n.requires_grad = requires_grad;
    n.op = Op::kLeaf;
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Node &na = node(a), &nb = node(b);
    if (na.shape != nb.shape) shape_error("add", na.shape, nb.shape);
    Node n;
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] + nb.value[i];
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.op = Op::kAdd;
    n.in0 = a.id;
    n.in1 = b.id;
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    const Node &na = node(a), &nb = node(b);
    if (na.shape != nb.shape) shape_error("sub", na.shape, nb.shape);
    Node n;
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] - nb.value[i];
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.op = Op::kSub;
    n.in0 = a.id;
    n.in1 = b.id;
    return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
    const Node &na = node(a), &nb = node(b);
    if (na.shape != nb.shape) shape_error("mul", na.shape, nb.shape);
    Node n;
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] * nb.value[i];
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.op = Op::kMul;
    n.in0 = a.id;
    n.in1 = b.id;
    return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
    const Node& na = node(a);
    Node n;
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = s * na.value[i];
    n.requires_grad = na.requires_grad;
    n.op = Op::kScale;
    n.in0 = a.id;
    n.scalar = s;
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    const Node& na = node(a);
    Node n;
    n.shape = na.shape;
    n.value.resize(na.value.size());
    for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] > 0 ? na.value[i] : 0.0;
    n.requires_grad = na.requires_grad;
    n.op = Op::kRelu;
    n.in0 = a.id;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
    const Node &na = node(a), &nb = node(b);
    require_2d("matmul", na.shape);
    require_2d("matmul", nb.shape);
    if (na.shape.cols() != nb.shape.rows()) shape_error("matmul", na.shape, nb.shape);
    int m = na.shape.rows(), k = na.shape.cols(), cols = nb.shape.cols();
    Node n;
    n.shape = Shape{m, cols};
    n.value.assign(static_cast<size_t>(m) * cols, 0.0);
    matmul_accum(na.value, nb.value, n.value, m, k, cols);
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.op = Op::kMatmul;
    n.in0 = a.id;
    n.in1 = b.id;
    return push(std::move(n));
}

Var Tape::add_row(Var m, Var row) {
    const Node &nm = node(m), &nr = node(row);
    require_2d("add_row", nm.shape);
    require_2d("add_row", nr.shape);
    if (nr.shape.rows() != 1 || nr.shape.cols() != nm.shape.cols()) {
        shape_error("add_row", nm.shape, nr.shape);
    }
    int rows = nm.shape.rows(), cols = nm.shape.cols();
    Node n;
    n.shape = nm.shape;
    n.value.resize(nm.value.size());
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            n.value[static_cast<size_t>(i) * cols + j] =
                nm.value[static_cast<size_t>(i) * cols + j] + nr.value[j];
        }
    }
    n.requires_grad = nm.requires_grad || nr.requires_grad;
    n.op = Op::kAddRow;
    n.in0 = m.id;
    n.in1 = row.id;
    return push(std::move(n));
}

Var Tape::tile_rows(Var row, int count) {
    const Node& nr = node(row);
    require_2d("tile_rows", nr.shape);
    if (nr.shape.rows() != 1) shape_error("tile_rows (expects [1,f])", nr.shape);
    if (count < 1) throw ShapeError("tile_rows: row count must be positive");
    int cols = nr.shape.cols();
    Node n;
    n.shape = Shape{count, cols};
    n.value.resize(static_cast<size_t>(count) * cols);
    for (int i = 0; i < count; ++i) {
        std::copy(nr.value.begin(), nr.value.end(), n.value.begin() + static_cast<size_t>(i) * cols);
    }
    n.requires_grad = nr.requires_grad;
    n.op = Op::kTileRows;
    n.in0 = row.id;
    return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
    const Node &na = node(a), &nb = node(b);
    require_2d("concat_cols", na.shape);
    require_2d("concat_cols", nb.shape);
    if (na.shape.rows() != nb.shape.rows()) shape_error("concat_cols", na.shape, nb.shape);
    int rows = na.shape.rows(), ca = na.shape.cols(), cb = nb.shape.cols();
    Node n;
    n.shape = Shape{rows, ca + cb};
    n.value.resize(static_cast<size_t>(rows) * (ca + cb));
    for (int i = 0; i < rows; ++i) {
        double* out = n.value.data() + static_cast<size_t>(i) * (ca + cb);
        std::copy_n(na.value.data() + static_cast<size_t>(i) * ca, ca, out);
        std::copy_n(nb.value.data() + static_cast<size_t>(i) * cb, cb, out + ca);
    }
    n.requires_grad = na.requires_grad || nb.requires_grad;
    n.op = Op::kConcatCols;
    n.in0 = a.id;
    n.in1 = b.id;
    return push(std::move(n));
}

Var Tape::max_rows(Var m) {
    const Node& nm = node(m);
    require_2d("max_rows", nm.shape);
    int rows = nm.shape.rows(), cols = nm.shape.cols();
    if (rows < 1) shape_error("max_rows (needs at least one row)", nm.shape);
    Node n;
    n.shape = Shape{1, cols};
    n.value.resize(cols);
    n.idata.resize(cols);
    for (int j = 0; j < cols; ++j) {
        double best = nm.value[j];
        int32_t arg = 0;
        for (int i = 1; i < rows; ++i) {
            double v = nm.value[static_cast<size_t>(i) * cols + j];
            if (v > best) {  // strict: ties keep the lowest row index
                best = v;
                arg = i;
            }
        }
        n.value[j] = best;
        n.idata[j] = arg;
    }
    n.requires_grad = nm.requires_grad;
    n.op = Op::kMaxRows;
    n.in0 = m.id;
    return push(std::move(n));
}

Var Tape::gather_rows(Var m, std::vector<int32_t> rows) {
    const Node& nm = node(m);
    require_2d("gather_rows", nm.shape);
    int src_rows = nm.shape.rows(), cols = nm.shape.cols();
    for (int32_t r : rows) {
        if (r < 0 || r >= src_rows) {
            throw ShapeError("gather_rows: row index " + std::to_string(r) + " out of range for " +
                             nm.shape.str());
        }
    }
    Node n;
    n.shape = Shape{static_cast<int>(rows.size()), cols};
    n.value.resize(rows.size() * static_cast<size_t>(cols));
    for (size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(nm.value.data() + static_cast<size_t>(rows[i]) * cols, cols,
                    n.value.data() + i * cols);
    }
    n.requires_grad = nm.requires_grad;
    n.op = Op::kGatherRows;
    n.in0 = m.id;
    n.idata = std::move(rows);
    return push(std::move(n));
}

Var Tape::reshape(Var a, Shape shape) {
    const Node& na = node(a);
    if (shape.numel() != na.shape.numel()) shape_error("reshape", na.shape, shape);
    Node n;
    n.shape = std::move(shape);
    n.value = na.value;
    n.requires_grad = na.requires_grad;
    n.op = Op::kReshape;
    n.in0 = a.id;
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    const Node& na = node(a);
    double s = 0;
    for (double v : na.value) s += v;
    Node n;
    n.shape = Shape{1, 1};
    n.value = {s};
    n.requires_grad = na.requires_grad;
    n.op = Op::kSum;
    n.in0 = a.id;
    return push(std::move(n));
}

Var Tape::mean(Var a) {
    const Node& na = node(a);
    if (na.value.empty()) shape_error("mean (empty tensor)", na.shape);
    double s = 0;
    for (double v : na.value) s += v;
    Node n;
    n.shape = Shape{1, 1};
    n.value = {s / static_cast<double>(na.value.size())};
    n.requires_grad = na.requires_grad;
    n.op = Op::kMean;
    n.in0 = a.id;
    return push(std::move(n));
}

Var Tape::chamfer(Var pred, std::shared_ptr<const ChamferTarget> target) {
    const Node& np = node(pred);
    require_2d("chamfer", np.shape);
    if (np.shape.cols() != 3 || np.shape.rows() < 1) {
        shape_error("chamfer (expects [k,3], k>=1)", np.shape);
    }
    if (!target || target->points.empty()) throw ConfigError("chamfer: empty target set");

    int k = np.shape.rows();
    PointList pred_pts(k);
    for (int i = 0; i < k; ++i) {
        pred_pts[i] = {np.value[3 * i], np.value[3 * i + 1], np.value[3 * i + 2]};
    }
    const size_t l = target->points.size();

    // d(|p - t|)/dp = (p - t)/|p - t|; zero-distance pairs contribute zero.
    std::vector<double> dpred(static_cast<size_t>(k) * 3, 0.0);
    double sum_pred = 0;
    const double wp = 0.5 / static_cast<double>(k);
    for (int i = 0; i < k; ++i) {
        auto hit = target->index.nearest(pred_pts[i]);
        Vec3 diff = pred_pts[i] - target->points[hit.index];
        double d = diff.norm();
        sum_pred += d;
        if (d > 0) {
            dpred[3 * i + 0] += wp * diff.x / d;
            dpred[3 * i + 1] += wp * diff.y / d;
            dpred[3 * i + 2] += wp * diff.z / d;
        }
    }

    NearestNeighborIndex pred_index(pred_pts);
    double sum_tgt = 0;
    const double wt = 0.5 / static_cast<double>(l);
    for (size_t j = 0; j < l; ++j) {
        auto hit = pred_index.nearest(target->points[j]);
        Vec3 diff = pred_pts[hit.index] - target->points[j];
        double d = diff.norm();
        sum_tgt += d;
        if (d > 0) {
            dpred[3 * hit.index + 0] += wt * diff.x / d;
            dpred[3 * hit.index + 1] += wt * diff.y / d;
            dpred[3 * hit.index + 2] += wt * diff.z / d;
        }
    }

    Node n;
    n.shape = Shape{1, 1};
    n.value = {0.5 * (sum_pred / static_cast<double>(k) + sum_tgt / static_cast<double>(l))};
    n.requires_grad = np.requires_grad;
    n.op = Op::kChamfer;
    n.in0 = pred.id;
    n.ddata = std::move(dpred);
    n.target = std::move(target);
    return push(std::move(n));
}

const std::vector<double>& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty() && !n.value.empty()) {
        throw NumericError("grad: no gradient recorded for this tensor (run backward first, "
                           "and only requires_grad tensors receive gradients)");
    }
    return n.grad;
}

double Tape::value_scalar(Var v) const {
    const Node& n = node(v);
    if (n.shape.numel() != 1) {
        throw ShapeError("value_scalar: tensor has shape " + n.shape.str());
    }
    return n.value[0];
}

void Tape::backward(Var output) {
    Node& out = node(output);
    if (out.shape.numel() != 1) {
        throw ShapeError("backward: output must be scalar, got shape " + out.shape.str());
    }
    for (Node& n : nodes_) {
        if (n.requires_grad) {
            n.grad.assign(n.value.size(), 0.0);
        } else {
            n.grad.clear();
        }
    }
    if (!out.requires_grad) return;  // nothing depends on a differentiable leaf
    out.grad[0] = 1.0;
    for (int32_t id = output.id; id >= 0; --id) {
        if (nodes_[static_cast<size_t>(id)].requires_grad) backward_node(id);
    }
}

void Tape::backward_node(int32_t id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) return;
    auto grad_of = [&](int32_t in) -> std::vector<double>* {
        if (in < 0) return nullptr;
        Node& m = nodes_[static_cast<size_t>(in)];
        return m.requires_grad ? &m.grad : nullptr;
    };
    std::vector<double>* g0 = grad_of(n.in0);
    std::vector<double>* g1 = grad_of(n.in1);

    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kAdd:
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g0)[i] += n.grad[i];
            if (g1)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g1)[i] += n.grad[i];
            break;
        case Op::kSub:
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g0)[i] += n.grad[i];
            if (g1)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g1)[i] -= n.grad[i];
            break;
        case Op::kMul: {
            const auto& va = nodes_[static_cast<size_t>(n.in0)].value;
            const auto& vb = nodes_[static_cast<size_t>(n.in1)].value;
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g0)[i] += n.grad[i] * vb[i];
            if (g1)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g1)[i] += n.grad[i] * va[i];
            break;
        }
        case Op::kScale:
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g0)[i] += n.scalar * n.grad[i];
            break;
        case Op::kRelu: {
            const auto& va = nodes_[static_cast<size_t>(n.in0)].value;
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i)
                    if (va[i] > 0) (*g0)[i] += n.grad[i];
            break;
        }
        case Op::kMatmul: {
            const Node& a = nodes_[static_cast<size_t>(n.in0)];
            const Node& b = nodes_[static_cast<size_t>(n.in1)];
            int m = a.shape.rows(), k = a.shape.cols(), cols = b.shape.cols();
            if (g0) matmul_accum_nt(n.grad, b.value, *g0, m, k, cols);
            if (g1) matmul_accum_tn(a.value, n.grad, *g1, m, k, cols);
            break;
        }
        case Op::kAddRow: {
            int cols = n.shape.cols(), rows = n.shape.rows();
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g0)[i] += n.grad[i];
            if (g1) {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        (*g1)[j] += n.grad[static_cast<size_t>(i) * cols + j];
            }
            break;
        }
        case Op::kTileRows: {
            int cols = n.shape.cols(), rows = n.shape.rows();
            if (g0) {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        (*g0)[j] += n.grad[static_cast<size_t>(i) * cols + j];
            }
            break;
        }
        case Op::kConcatCols: {
            const Node& a = nodes_[static_cast<size_t>(n.in0)];
            int rows = n.shape.rows(), ca = a.shape.cols(), cb = n.shape.cols() - ca;
            for (int i = 0; i < rows; ++i) {
                const double* g = n.grad.data() + static_cast<size_t>(i) * (ca + cb);
                if (g0)
                    for (int j = 0; j < ca; ++j) (*g0)[static_cast<size_t>(i) * ca + j] += g[j];
                if (g1)
                    for (int j = 0; j < cb; ++j) (*g1)[static_cast<size_t>(i) * cb + j] += g[ca + j];
            }
            break;
        }
        case Op::kMaxRows: {
            int cols = n.shape.cols();
            const Node& a = nodes_[static_cast<size_t>(n.in0)];
            int acols = a.shape.cols();
            if (g0) {
                for (int j = 0; j < cols; ++j)
                    (*g0)[static_cast<size_t>(n.idata[j]) * acols + j] += n.grad[j];
            }
            break;
        }
        case Op::kGatherRows: {
            int cols = n.shape.cols();
            if (g0) {
                for (size_t i = 0; i < n.idata.size(); ++i) {
                    double* dst = g0->data() + static_cast<size_t>(n.idata[i]) * cols;
                    const double* g = n.grad.data() + i * cols;
                    for (int j = 0; j < cols; ++j) dst[j] += g[j];
                }
            }
            break;
        }
        case Op::kReshape:
            if (g0)
                for (size_t i = 0; i < n.grad.size(); ++i) (*g0)[i] += n.grad[i];
            break;
        case Op::kSum:
            if (g0)
                for (size_t i = 0; i < g0->size(); ++i) (*g0)[i] += n.grad[0];
            break;
        case Op::kMean: {
            if (g0) {
                double w = n.grad[0] / static_cast<double>(g0->size());
                for (size_t i = 0; i < g0->size(); ++i) (*g0)[i] += w;
            }
            break;
        }
        case Op::kChamfer:
            if (g0)
                for (size_t i = 0; i < n.ddata.size(); ++i) (*g0)[i] += n.grad[0] * n.ddata[i];
            break;
    }
}

}  // namespace pcd::ad
