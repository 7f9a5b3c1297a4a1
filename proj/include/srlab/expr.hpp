#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "srlab/common.hpp"

namespace srlab {

enum class Op : std::uint8_t {
    Add, Sub, Mul, Div, Pow,
    Abs, Square, SqrtAbs, Exp, Log, Log1p,
    Sin, Cos, Tan, Tanh,
    Min, Max,
    Const, Var,
};

// add/mul accept 2..kMaxArity children, everything else is fixed-arity
inline constexpr int kMaxArity = 4;

bool is_terminal(Op op);
bool is_nary(Op op);
int fixed_arity(Op op); // -1 for add/mul
const char* op_name(Op op);
Op op_from_name(const std::string& name);
const std::vector<Op>& all_operators(); // everything except Const/Var

// per-node complexity factor used by the recursive complexity measure
double op_complexity(Op op);

struct Node {
    Op op = Op::Const;
    int index = -1;      // Var only
    double value = 0.0;  // Const only
    bool weighted = false;
    double weight = 1.0;
    std::vector<Node> children;

    static Node constant(double v);
    static Node variable(int idx);
    static Node make(Op op, std::vector<Node> ch);
};

int tree_size(const Node& n);
int tree_depth(const Node& n); // edges; single node -> 0

struct TreeMetrics {
    int size = 0;
    int depth = 0;
    double complexity = 0.0;
};
TreeMetrics tree_metrics(const Node& n);
double tree_complexity(const Node& n);

// preorder access; index 0 is the root
Node* node_at(Node& root, int preorder_index);
const Node* node_at(const Node& root, int preorder_index);
int node_depth_at(const Node& root, int preorder_index); // depth of that spot
template <typename F>
void for_each_node(const Node& n, F&& f) {
    f(n);
    for (const auto& c : n.children) for_each_node(c, f);
}

// row-wise evaluation; X is rows x features, IEEE semantics throughout
// (division by zero, log of a negative, etc. propagate as inf/nan)
Eigen::ArrayXd evaluate(const Node& n, const Eigen::MatrixXd& X);

// grow a random tree; result size <= target_size + (kMaxArity - 1),
// depth <= max_depth; terminals mix variables and N(0,1) constants
Node ptc2(Rng& rng, int target_size, int max_depth, int n_features);

nlohmann::json tree_to_json(const Node& n);
Node tree_from_json(const nlohmann::json& j);
std::string tree_to_string(const Node& n, const std::vector<std::string>& names);
// parses a JSON document; malformed input raises data_error with byte position
Node tree_parse(const std::string& text);

} // namespace srlab
