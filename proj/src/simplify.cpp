#include "srlab/simplify.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "srlab/data.hpp"

namespace srlab {

namespace {

constexpr double kVarFloor = 1e-12;
constexpr int kMaxBits = 4096;

// constant-like predictions all share the null hash
Eigen::ArrayXd canonical_pred(const Eigen::ArrayXd& pred) {
    if (population_variance(pred) < kVarFloor) return Eigen::ArrayXd::Zero(pred.size());
    return pred;
}

std::string structural_key(const Node& n) { return tree_to_json(n).dump(); }

} // namespace

HashPlane make_plane(int bits, int dim, std::uint64_t seed) {
    HashPlane plane;
    plane.bits = bits;
    plane.dim = dim;
    plane.p.resize(bits, dim);
    Rng rng(seed);
    for (int i = 0; i < bits; ++i)
        for (int j = 0; j < dim; ++j) plane.p(i, j) = rand_norm(rng);
    return plane;
}

std::string simhash_bits(const HashPlane& plane, const Eigen::ArrayXd& pred) {
    Eigen::VectorXd q = plane.p * pred.matrix();
    std::string bits(plane.bits, '0');
    for (int i = 0; i < plane.bits; ++i)
        if (q(i) > 0) bits[i] = '1';
    return bits;
}

double prediction_angle(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    const double na = a.matrix().norm(), nb = b.matrix().norm();
    if (na == 0.0 || nb == 0.0) return std::nan("");
    double c = a.matrix().dot(b.matrix()) / (na * nb);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

SimplificationTable::SimplificationTable(const Eigen::MatrixXd& x_train, int bits,
                                         std::uint64_t seed)
    : x_(x_train) {
    if (x_.rows() == 0) throw data_error("simplification table: no training rows");
    if (bits <= 0) throw config_error("simplification table: hash bits must be positive");

    const int n_feat = static_cast<int>(x_.cols());
    std::vector<std::pair<Node, Eigen::ArrayXd>> terminals;
    Node c = Node::constant(1.0);
    c.weighted = true; // weight carries the value after re-optimization
    terminals.emplace_back(c, Eigen::ArrayXd::Zero(x_.rows()));
    for (int i = 0; i < n_feat; ++i)
        terminals.emplace_back(Node::variable(i), canonical_pred(x_.col(i).array()));

    for (;;) {
        plane_ = make_plane(bits, static_cast<int>(x_.rows()),
                            seed ^ (static_cast<std::uint64_t>(bits) * 0x9e3779b97f4a7c15ULL));
        buckets_.clear();
        bool collision = false;
        for (const auto& [node, pred] : terminals) {
            auto h = simhash_bits(plane_, pred);
            auto it = buckets_.find(h);
            if (it != buckets_.end()) {
                if ((it->second.representative == pred).all())
                    throw config_error(
                        "simplification table: two terminals share identical predictions "
                        "(duplicate or constant feature column); collision cannot be resolved");
                collision = true;
                break;
            }
            Bucket b;
            b.representative = pred;
            insert_tree(b, node);
            buckets_.emplace(std::move(h), std::move(b));
        }
        if (!collision) break;
        if (bits >= kMaxBits)
            throw config_error("simplification table: terminal hash collision persists at " +
                               std::to_string(kMaxBits) + " bits");
        bits *= 2;
    }
}

void SimplificationTable::insert_tree(Bucket& bucket, const Node& tree) {
    auto key = structural_key(tree);
    for (const auto& k : bucket.keys)
        if (k == key) return;
    const int sz = tree_size(tree);
    size_t pos = bucket.trees.size();
    for (size_t i = 0; i < bucket.trees.size(); ++i) {
        if (tree_size(bucket.trees[i]) > sz) {
            pos = i;
            break;
        }
    }
    bucket.trees.insert(bucket.trees.begin() + pos, tree);
    bucket.keys.insert(bucket.keys.begin() + pos, std::move(key));
}

bool SimplificationTable::visit(Node& node, const SimplifyConfig& cfg, int generation,
                               std::vector<SimplifyEvent>* log, int& replacements) {
    ++visited_;
    const int id = next_node_id_++;
    const int pre_size = tree_size(node);
    if (cfg.max_subtree > 0 && pre_size > cfg.max_subtree) return false;

    Eigen::ArrayXd raw = evaluate(node, x_);
    if (!raw.isFinite().all()) return false;
    Eigen::ArrayXd pred = canonical_pred(raw);
    auto h = simhash_bits(plane_, pred);

    auto it = buckets_.find(h);
    if (it == buckets_.end()) {
        Bucket b;
        b.representative = pred;
        insert_tree(b, node);
        buckets_.emplace(std::move(h), std::move(b));
        return false;
    }

    const double dist = (pred - it->second.representative).matrix().norm();
    if (dist > cfg.tolerance) return false;
    insert_tree(it->second, node);
    const Node& best = it->second.trees.front();
    const int best_size = tree_size(best);
    if (best_size >= pre_size) return false;

    if (log) {
        SimplifyEvent ev;
        ev.generation = generation;
        ev.node = id;
        ev.pre_size = pre_size;
        ev.post_size = best_size;
        ev.distance = dist;
        ev.angle_deg = prediction_angle(raw, evaluate(best, x_));
        log->push_back(ev);
    }
    node = best;
    ++replacements;
    return true;
}

void SimplificationTable::walk_bottom_up(Node& node, const SimplifyConfig& cfg, int generation,
                                         std::vector<SimplifyEvent>* log, int& replacements) {
    for (auto& c : node.children) walk_bottom_up(c, cfg, generation, log, replacements);
    visit(node, cfg, generation, log, replacements);
}

void SimplificationTable::walk_top_down(Node& node, const SimplifyConfig& cfg, int generation,
                                        std::vector<SimplifyEvent>* log, int& replacements) {
    if (visit(node, cfg, generation, log, replacements)) return; // fresh subtree: leave it alone
    for (auto& c : node.children) walk_top_down(c, cfg, generation, log, replacements);
}

int SimplificationTable::simplify(Node& tree, const SimplifyConfig& cfg, int generation,
                                  std::vector<SimplifyEvent>* log) {
    next_node_id_ = 0;
    int replacements = 0;
    if (cfg.bottom_up)
        walk_bottom_up(tree, cfg, generation, log, replacements);
    else
        walk_top_down(tree, cfg, generation, log, replacements);
    return replacements;
}

std::vector<std::vector<int>> SimplificationTable::bucket_tree_sizes() const {
    std::vector<std::vector<int>> out;
    out.reserve(buckets_.size());
    for (const auto& [key, b] : buckets_) {
        std::vector<int> sizes;
        sizes.reserve(b.trees.size());
        for (const auto& t : b.trees) sizes.push_back(tree_size(t));
        out.push_back(std::move(sizes));
    }
    return out;
}

} // namespace srlab
