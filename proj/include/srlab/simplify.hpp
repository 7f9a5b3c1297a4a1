#pragma once

#include <Eigen/Dense>

#include <map>
#include <unordered_map>

#include "srlab/common.hpp"
#include "srlab/expr.hpp"

namespace srlab {

struct HashPlane {
    int bits = 0;
    int dim = 0;
    Eigen::MatrixXd p; // bits x dim, standard normal entries
};

HashPlane make_plane(int bits, int dim, std::uint64_t seed);

// sign bits of the projection; '1' where the projection is strictly positive
std::string simhash_bits(const HashPlane& plane, const Eigen::ArrayXd& pred);

// angle between prediction vectors in degrees; NaN when either norm is zero
double prediction_angle(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

struct SimplifyConfig {
    bool enabled = false;
    double tolerance = 0.01;  // max distance to a bucket representative
    bool bottom_up = true;    // false: top-down, replaced subtrees not descended
    int hash_bits = 256;
    int max_subtree = 0;      // 0 = no cap
};

struct SimplifyEvent {
    int generation = 0;
    int node = 0; // preorder index at visit time
    int pre_size = 0;
    int post_size = 0;
    double distance = 0.0;
    double angle_deg = 0.0;
};

// buckets keyed by hash bits; each holds the first indexed prediction as its
// representative plus a size-sorted list of equivalent trees
class SimplificationTable {
public:
    // indexes one bucket per terminal (constants collapse to the zero vector);
    // a collision between distinct terminals doubles the bit width, up to 4096
    SimplificationTable(const Eigen::MatrixXd& x_train, int bits, std::uint64_t seed);

    // walks the tree, replacing subtrees whose predictions land within
    // tolerance of an indexed bucket by that bucket's smallest member;
    // returns the number of replacements
    int simplify(Node& tree, const SimplifyConfig& cfg, int generation,
                 std::vector<SimplifyEvent>* log = nullptr);

    size_t bucket_count() const { return buckets_.size(); }
    int bits() const { return plane_.bits; }
    long nodes_visited() const { return visited_; }
    // per-bucket member sizes in storage order, for order-invariant checks
    std::vector<std::vector<int>> bucket_tree_sizes() const;

private:
    struct Bucket {
        Eigen::ArrayXd representative;
        std::vector<Node> trees;       // ascending size, insertion-stable
        std::vector<std::string> keys; // structural identities, parallel to trees
    };

    bool visit(Node& node, const SimplifyConfig& cfg, int generation,
               std::vector<SimplifyEvent>* log, int& replacements);
    void walk_bottom_up(Node& node, const SimplifyConfig& cfg, int generation,
                        std::vector<SimplifyEvent>* log, int& replacements);
    void walk_top_down(Node& node, const SimplifyConfig& cfg, int generation,
                       std::vector<SimplifyEvent>* log, int& replacements);
    void insert_tree(Bucket& bucket, const Node& tree);

    Eigen::MatrixXd x_;
    HashPlane plane_;
    std::unordered_map<std::string, Bucket> buckets_;
    long visited_ = 0;
    int next_node_id_ = 0;
};

} // namespace srlab
