#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pcd/common.hpp"

namespace pcd {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
};

inline double dist2(const Vec3& a, const Vec3& b) {
    double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

using PointList = std::vector<Vec3>;

// Anatomical classes carried by every cloud.
enum : uint8_t { kLvEndo = 0, kLvEpi = 1, kRvEndo = 2 };
constexpr int kNumClasses = 3;
const char* class_name(int c);        // "lv_endo" / "lv_epi" / "rv_endo"
const char* class_long_name(int c);   // "LV endocardium" / ...

// Set of 3D points, each tagged with an anatomical class label.
// Coordinates are mm in external files, normalized units internally.
struct MultiClassPointCloud {
    PointList points;
    std::vector<uint8_t> labels;

    size_t size() const { return points.size(); }
    void push_back(const Vec3& p, uint8_t label) {
        points.push_back(p);
        labels.push_back(label);
    }

    std::array<size_t, kNumClasses> class_counts() const;
    PointList class_points(int c) const;

    // labels length equals point count, every label in {0,1,2},
    // all three classes non-empty.
    void validate() const;
};

Vec3 centroid(const PointList& pts);
double bounding_box_diagonal(const PointList& pts);
double bounding_box_diagonal(const MultiClassPointCloud& cloud);

// Exact nearest-neighbor index over one class's points. Balanced kd-tree,
// median split on the widest axis. Among equidistant candidates the lowest
// original index wins, which makes Chamfer gradients deterministic.
class KdTree {
public:
    static constexpr int kDefaultLeafSize = 16;

    explicit KdTree(PointList points, int leaf_size = kDefaultLeafSize);

    struct Hit {
        double dist2 = 0;
        int index = -1;
    };

    Hit nearest(const Vec3& query) const;
    size_t size() const { return points_.size(); }
    const PointList& points() const { return points_; }

private:
    struct Node {
        int axis = -1;          // -1 marks a leaf
        double split = 0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    int build(int begin, int end);
    void search(int node, const Vec3& q, Hit& best) const;

    PointList points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int leaf_size_;
};

// Nearest-neighbor lookup that picks brute force for small inputs and the
// kd-tree otherwise. Both paths return the lowest-index argmin.
class NearestNeighborIndex {
public:
    static constexpr size_t kBruteForceThreshold = 64;

    explicit NearestNeighborIndex(PointList points);

    KdTree::Hit nearest(const Vec3& query) const;
    size_t size() const { return points_.size(); }
    const PointList& points() const { return points_; }

private:
    PointList points_;
    std::unique_ptr<KdTree> tree_;  // null when brute force
};

// Mean nearest-neighbor distance from every point of `from` onto `to`.
double directed_mean_distance(const PointList& from, const NearestNeighborIndex& to);

// Symmetric Chamfer distance:
//   CD(A,B) = 1/2 ( mean_a min_b |a-b| + mean_b min_a |a-b| )
// Un-squared L2, per-direction means, average of the two directions, so the
// result carries the units of the inputs (mm for external clouds).
double chamfer(const PointList& a, const PointList& b);

// chamfer() applied per matching anatomical class.
std::array<double, kNumClasses> per_class_chamfer(const MultiClassPointCloud& p,
                                                  const MultiClassPointCloud& g);

// points' = (points - translation) / scale. Stored in checkpoints so
// predictions can be reported in mm.
struct NormalizationTransform {
    Vec3 translation{0, 0, 0};
    double scale = 1.0;

    Vec3 to_normalized(const Vec3& p) const { return (p - translation) / scale; }
    Vec3 to_mm(const Vec3& p) const { return p * scale + translation; }
    void validate() const;
};

MultiClassPointCloud normalize(const MultiClassPointCloud& cloud, const NormalizationTransform& t);
MultiClassPointCloud denormalize(const MultiClassPointCloud& cloud, const NormalizationTransform& t);

// Dataset-level transform: translate by the mean centroid, scale by the mean
// bounding-box diagonal of the given clouds.
NormalizationTransform fit_normalization(const std::vector<const MultiClassPointCloud*>& clouds);

}  // namespace pcd
