#include "pcd/geometry.hpp"

#include <algorithm>
#include <limits>
#include <memory>

namespace pcd {

const char* class_name(int c) {
    switch (c) {
        case kLvEndo: return "lv_endo";
        case kLvEpi: return "lv_epi";
        case kRvEndo: return "rv_endo";
    }
    return "unknown";
}

const char* class_long_name(int c) {
    switch (c) {
        case kLvEndo: return "LV endocardium";
        case kLvEpi: return "LV epicardium";
        case kRvEndo: return "RV endocardium";
    }
    return "unknown";
}

std::array<size_t, kNumClasses> MultiClassPointCloud::class_counts() const {
    std::array<size_t, kNumClasses> counts{0, 0, 0};
    for (uint8_t l : labels) {
        if (l < kNumClasses) counts[l]++;
    }
    return counts;
}

PointList MultiClassPointCloud::class_points(int c) const {
    PointList out;
    for (size_t i = 0; i < points.size(); ++i) {
        if (labels[i] == c) out.push_back(points[i]);
    }
    return out;
}

void MultiClassPointCloud::validate() const {
    if (labels.size() != points.size()) {
        throw ConfigError("point cloud: labels length " + std::to_string(labels.size()) +
                          " does not match point count " + std::to_string(points.size()));
    }
    for (uint8_t l : labels) {
        if (l >= kNumClasses) {
            throw ConfigError("point cloud: invalid class label " + std::to_string(int(l)));
        }
    }
    auto counts = class_counts();
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0) {
            throw ConfigError(std::string("point cloud: class ") + class_name(c) + " is empty");
        }
    }
}

Vec3 centroid(const PointList& pts) {
    if (pts.empty()) throw ConfigError("centroid: empty point list");
    Vec3 c;
    for (const Vec3& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

double bounding_box_diagonal(const PointList& pts) {
    if (pts.empty()) throw ConfigError("bounding_box_diagonal: empty point list");
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    return (hi - lo).norm();
}

double bounding_box_diagonal(const MultiClassPointCloud& cloud) {
    return bounding_box_diagonal(cloud.points);
}

// --- KdTree ---------------------------------------------------------------

KdTree::KdTree(PointList points, int leaf_size)
    : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
    if (points_.empty()) throw ConfigError("KdTree: cannot index an empty point set");
    for (const Vec3& p : points_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            throw NumericError("KdTree: non-finite point coordinates");
        }
    }
    order_.resize(points_.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(2 * points_.size() / leaf_size_ + 4);
    build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int begin, int end) {
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    if (end - begin <= leaf_size_) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (int i = begin; i < end; ++i) {
        const Vec3& p = points_[order_[i]];
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    Vec3 extent = hi - lo;
    int axis = 0;
    if (extent.y > extent[axis]) axis = 1;
    if (extent.z > extent[axis]) axis = 2;

    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         double pa = points_[a][axis], pb = points_[b][axis];
                         if (pa != pb) return pa < pb;
                         return a < b;  // total order keeps the build deterministic
                     });

    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(int node, const Vec3& q, Hit& best) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            int idx = order_[i];
            double d2 = dist2(points_[idx], q);
            if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) {
                best.dist2 = d2;
                best.index = idx;
            }
        }
        return;
    }
    double diff = q[n.axis] - n.split;
    int near = diff < 0 ? n.left : n.right;
    int far = diff < 0 ? n.right : n.left;
    search(near, q, best);
    // Prune only when strictly farther; subtrees at exactly the best distance
    // stay reachable so the lowest-index tie rule holds.
    if (diff * diff <= best.dist2) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
    Hit best;
    best.dist2 = std::numeric_limits<double>::infinity();
    best.index = static_cast<int>(points_.size());
    search(0, query, best);
    return best;
}

// --- NearestNeighborIndex ---------------------------------------------------

NearestNeighborIndex::NearestNeighborIndex(PointList points) : points_(std::move(points)) {
    if (points_.empty()) throw ConfigError("NearestNeighborIndex: empty point set");
    for (const Vec3& p : points_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
            throw NumericError("NearestNeighborIndex: non-finite point coordinates");
        }
    }
    if (points_.size() >= kBruteForceThreshold) {
        tree_ = std::make_unique<KdTree>(points_);
    }
}

KdTree::Hit NearestNeighborIndex::nearest(const Vec3& query) const {
    if (tree_) return tree_->nearest(query);
    KdTree::Hit best;
    best.dist2 = std::numeric_limits<double>::infinity();
    best.index = static_cast<int>(points_.size());
    for (size_t i = 0; i < points_.size(); ++i) {
        double d2 = dist2(points_[i], query);
        // The equality arm keeps the lowest-index tie rule and still selects a
        // valid index when every distance overflows to infinity.
        if (d2 < best.dist2 || (d2 == best.dist2 && static_cast<int>(i) < best.index)) {
            best.dist2 = d2;
            best.index = static_cast<int>(i);
        }
    }
    return best;
}

// --- Chamfer ----------------------------------------------------------------

double directed_mean_distance(const PointList& from, const NearestNeighborIndex& to) {
    std::vector<double> dists;
    dists.reserve(from.size());
    for (const Vec3& p : from) {
        KdTree::Hit h = to.nearest(p);
        dists.push_back((p - to.points()[h.index]).norm());
    }
    // Canonical summation order: the mean depends only on the multiset of
    // distances, so permuting a cloud cannot change the result.
    std::sort(dists.begin(), dists.end());
    double sum = 0;
    for (double d : dists) sum += d;
    return sum / static_cast<double>(from.size());
}

double chamfer(const PointList& a, const PointList& b) {
    if (a.empty() || b.empty()) throw ConfigError("chamfer: empty point set");
    NearestNeighborIndex ia(a), ib(b);
    double dab = directed_mean_distance(a, ib);
    double dba = directed_mean_distance(b, ia);
    return 0.5 * (dab + dba);
}

std::array<double, kNumClasses> per_class_chamfer(const MultiClassPointCloud& p,
                                                  const MultiClassPointCloud& g) {
    auto pc = p.class_counts();
    auto gc = g.class_counts();
    for (int c = 0; c < kNumClasses; ++c) {
        if (pc[c] == 0 || gc[c] == 0) {
            throw ConfigError(std::string("per_class_chamfer: class ") + class_name(c) +
                              " is empty in " + (pc[c] == 0 ? "prediction" : "ground truth"));
        }
    }
    std::array<double, kNumClasses> out{};
    for (int c = 0; c < kNumClasses; ++c) {
        out[c] = chamfer(p.class_points(c), g.class_points(c));
    }
    return out;
}

// --- Normalization ----------------------------------------------------------

void NormalizationTransform::validate() const {
    if (!(scale > 0) || !std::isfinite(scale)) {
        throw ConfigError("normalization: scale must be a positive finite number");
    }
}

MultiClassPointCloud normalize(const MultiClassPointCloud& cloud, const NormalizationTransform& t) {
    t.validate();
    MultiClassPointCloud out;
    out.labels = cloud.labels;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.points.push_back(t.to_normalized(p));
    return out;
}

MultiClassPointCloud denormalize(const MultiClassPointCloud& cloud, const NormalizationTransform& t) {
    t.validate();
    MultiClassPointCloud out;
    out.labels = cloud.labels;
    out.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.points.push_back(t.to_mm(p));
    return out;
}

NormalizationTransform fit_normalization(const std::vector<const MultiClassPointCloud*>& clouds) {
    if (clouds.empty()) throw ConfigError("fit_normalization: no clouds");
    Vec3 mean_centroid;
    double mean_diag = 0;
    for (const auto* c : clouds) {
        mean_centroid += centroid(c->points);
        mean_diag += bounding_box_diagonal(c->points);
    }
    NormalizationTransform t;
    t.translation = mean_centroid / static_cast<double>(clouds.size());
    t.scale = mean_diag / static_cast<double>(clouds.size());
    t.validate();
    return t;
}

}  // namespace pcd
