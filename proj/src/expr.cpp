#include "srlab/expr.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>

namespace srlab {

bool is_terminal(Op op) { return op == Op::Const || op == Op::Var; }
bool is_nary(Op op) { return op == Op::Add || op == Op::Mul; }

int fixed_arity(Op op) {
    switch (op) {
        case Op::Add: case Op::Mul: return -1;
        case Op::Sub: case Op::Div: case Op::Pow: case Op::Min: case Op::Max: return 2;
        case Op::Const: case Op::Var: return 0;
        default: return 1;
    }
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Pow: return "pow";
        case Op::Abs: return "abs";
        case Op::Square: return "square";
        case Op::SqrtAbs: return "sqrtabs";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Log1p: return "log1p";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tan: return "tan";
        case Op::Tanh: return "tanh";
        case Op::Min: return "min";
        case Op::Max: return "max";
        case Op::Const: return "const";
        case Op::Var: return "var";
    }
    return "?";
}

Op op_from_name(const std::string& name) {
    static const std::vector<Op> all = {
        Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow, Op::Abs, Op::Square, Op::SqrtAbs,
        Op::Exp, Op::Log, Op::Log1p, Op::Sin, Op::Cos, Op::Tan, Op::Tanh, Op::Min, Op::Max,
        Op::Const, Op::Var};
    for (Op op : all)
        if (name == op_name(op)) return op;
    throw data_error("unknown operator name: '" + name + "'");
}

const std::vector<Op>& all_operators() {
    static const std::vector<Op> ops = {
        Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow, Op::Abs, Op::Square, Op::SqrtAbs,
        Op::Exp, Op::Log, Op::Log1p, Op::Sin, Op::Cos, Op::Tan, Op::Tanh, Op::Min, Op::Max};
    return ops;
}

double op_complexity(Op op) {
    switch (op) {
        case Op::Const: return 2;
        case Op::Add: case Op::Sub: case Op::Var: return 3;
        case Op::Abs: case Op::Square: case Op::Min: case Op::Max: case Op::Mul: return 4;
        case Op::Exp: case Op::Log: case Op::SqrtAbs: case Op::Div: case Op::Pow: return 5;
        case Op::Sin: case Op::Cos: case Op::Tan: case Op::Tanh: return 6;
        case Op::Log1p: return 9;
    }
    return 3;
}

Node Node::constant(double v) {
    Node n;
    n.op = Op::Const;
    n.value = v;
    return n;
}

Node Node::variable(int idx) {
    Node n;
    n.op = Op::Var;
    n.index = idx;
    return n;
}

Node Node::make(Op op, std::vector<Node> ch) {
    Node n;
    n.op = op;
    n.children = std::move(ch);
    return n;
}

int tree_size(const Node& n) {
    int s = 1;
    for (const auto& c : n.children) s += tree_size(c);
    return s;
}

int tree_depth(const Node& n) {
    int d = 0;
    for (const auto& c : n.children) d = std::max(d, 1 + tree_depth(c));
    return d;
}

double tree_complexity(const Node& n) {
    double c = op_complexity(n.op);
    if (n.children.empty()) return c;
    double sum = 0.0;
    for (const auto& ch : n.children) sum += tree_complexity(ch);
    return c * sum;
}

TreeMetrics tree_metrics(const Node& n) {
    return {tree_size(n), tree_depth(n), tree_complexity(n)};
}

namespace {

Node* node_at_impl(Node& n, int& k) {
    if (k == 0) return &n;
    --k;
    for (auto& c : n.children)
        if (Node* r = node_at_impl(c, k)) return r;
    return nullptr;
}

bool node_depth_impl(const Node& n, int& k, int depth, int& out) {
    if (k == 0) {
        out = depth;
        return true;
    }
    --k;
    for (const auto& c : n.children)
        if (node_depth_impl(c, k, depth + 1, out)) return true;
    return false;
}

} // namespace

Node* node_at(Node& root, int preorder_index) {
    int k = preorder_index;
    return node_at_impl(root, k);
}

const Node* node_at(const Node& root, int preorder_index) {
    return node_at(const_cast<Node&>(root), preorder_index);
}

int node_depth_at(const Node& root, int preorder_index) {
    int k = preorder_index, out = -1;
    node_depth_impl(root, k, 0, out);
    return out;
}

Eigen::ArrayXd evaluate(const Node& n, const Eigen::MatrixXd& X) {
    const auto rows = X.rows();
    Eigen::ArrayXd r;
    switch (n.op) {
        case Op::Const:
            r = Eigen::ArrayXd::Constant(rows, n.value);
            break;
        case Op::Var:
            if (n.index < 0 || n.index >= X.cols())
                throw data_error("evaluate: variable index " + std::to_string(n.index) +
                                 " out of range for " + std::to_string(X.cols()) + " features");
            r = X.col(n.index).array();
            break;
        case Op::Add: {
            r = evaluate(n.children[0], X);
            for (size_t i = 1; i < n.children.size(); ++i) r += evaluate(n.children[i], X);
            break;
        }
        case Op::Mul: {
            r = evaluate(n.children[0], X);
            for (size_t i = 1; i < n.children.size(); ++i) r *= evaluate(n.children[i], X);
            break;
        }
        case Op::Sub:
            r = evaluate(n.children[0], X) - evaluate(n.children[1], X);
            break;
        case Op::Div:
            r = evaluate(n.children[0], X) / evaluate(n.children[1], X);
            break;
        case Op::Pow: {
            Eigen::ArrayXd a = evaluate(n.children[0], X), b = evaluate(n.children[1], X);
            r = a.binaryExpr(b, [](double x, double y) { return std::pow(x, y); });
            break;
        }
        case Op::Abs:
            r = evaluate(n.children[0], X).abs();
            break;
        case Op::Square: {
            Eigen::ArrayXd a = evaluate(n.children[0], X);
            r = a * a;
            break;
        }
        case Op::SqrtAbs:
            r = evaluate(n.children[0], X).abs().sqrt();
            break;
        case Op::Exp:
            r = evaluate(n.children[0], X).exp();
            break;
        case Op::Log:
            r = evaluate(n.children[0], X).log();
            break;
        case Op::Log1p:
            r = evaluate(n.children[0], X).unaryExpr([](double x) { return std::log1p(x); });
            break;
        case Op::Sin:
            r = evaluate(n.children[0], X).sin();
            break;
        case Op::Cos:
            r = evaluate(n.children[0], X).cos();
            break;
        case Op::Tan:
            r = evaluate(n.children[0], X).tan();
            break;
        case Op::Tanh:
            r = evaluate(n.children[0], X).tanh();
            break;
        case Op::Min:
            r = evaluate(n.children[0], X).min(evaluate(n.children[1], X));
            break;
        case Op::Max:
            r = evaluate(n.children[0], X).max(evaluate(n.children[1], X));
            break;
    }
    if (n.weighted) r *= n.weight;
    return r;
}

namespace {

Node random_terminal(Rng& rng, int n_features) {
    // constant is one more option next to the features
    int pick = rand_int(rng, 0, n_features);
    if (pick == n_features || n_features == 0) return Node::constant(rand_norm(rng));
    return Node::variable(pick);
}

struct Slot {
    Node* parent;
    int depth;
};

} // namespace

Node ptc2(Rng& rng, int target_size, int max_depth, int n_features) {
    if (target_size <= 1 || max_depth == 0) return random_terminal(rng, n_features);

    auto random_op_node = [&](Rng& r) {
        Op op = rand_pick(r, all_operators());
        Node n;
        n.op = op;
        int arity = is_nary(op) ? rand_int(r, 2, kMaxArity) : fixed_arity(op);
        n.children.resize(arity);
        return n;
    };

    Node root = random_op_node(rng);
    int size = 1;
    std::vector<Slot> open;
    for (auto& c : root.children) open.push_back({&c, 1});

    while (!open.empty() && size + static_cast<int>(open.size()) < target_size) {
        int pick = rand_int(rng, 0, static_cast<int>(open.size()) - 1);
        Slot s = open[pick];
        open.erase(open.begin() + pick);
        if (s.depth >= max_depth) {
            *s.parent = random_terminal(rng, n_features);
        } else {
            *s.parent = random_op_node(rng);
            for (auto& c : s.parent->children) open.push_back({&c, s.depth + 1});
        }
        ++size;
    }
    for (auto& s : open) *s.parent = random_terminal(rng, n_features);
    return root;
}

nlohmann::json tree_to_json(const Node& n) {
    nlohmann::json j;
    j["op"] = op_name(n.op);
    if (n.op == Op::Var) j["index"] = n.index;
    if (n.op == Op::Const) j["value"] = n.value;
    if (n.weighted)
        j["weight"] = n.weight;
    else
        j["weight"] = nullptr;
    if (!n.children.empty()) {
        nlohmann::json ch = nlohmann::json::array();
        for (const auto& c : n.children) ch.push_back(tree_to_json(c));
        j["children"] = std::move(ch);
    }
    return j;
}

Node tree_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw data_error("tree document: node is not an object");
    if (!j.contains("op") || !j.at("op").is_string())
        throw data_error("tree document: node lacks a string 'op'");
    Node n;
    n.op = op_from_name(j.at("op").get<std::string>());
    if (n.op == Op::Var) {
        if (!j.contains("index") || !j.at("index").is_number_integer() || j.at("index").get<int>() < 0)
            throw data_error("tree document: 'var' needs a non-negative integer 'index'");
        n.index = j.at("index").get<int>();
    }
    if (n.op == Op::Const) {
        if (!j.contains("value") || !j.at("value").is_number())
            throw data_error("tree document: 'const' needs a numeric 'value'");
        n.value = j.at("value").get<double>();
    }
    if (j.contains("weight") && !j.at("weight").is_null()) {
        if (!j.at("weight").is_number()) throw data_error("tree document: 'weight' must be a number or null");
        n.weighted = true;
        n.weight = j.at("weight").get<double>();
    }
    int arity = fixed_arity(n.op);
    size_t n_children = j.contains("children") ? j.at("children").size() : 0;
    if (arity == 0 && n_children != 0)
        throw data_error(std::string("tree document: terminal '") + op_name(n.op) + "' cannot have children");
    if (arity > 0 && static_cast<int>(n_children) != arity)
        throw data_error(std::string("tree document: '") + op_name(n.op) + "' expects " +
                         std::to_string(arity) + " children, got " + std::to_string(n_children));
    if (arity < 0 && (n_children < 2 || n_children > kMaxArity))
        throw data_error(std::string("tree document: '") + op_name(n.op) + "' expects 2.." +
                         std::to_string(kMaxArity) + " children, got " + std::to_string(n_children));
    if (n_children > 0)
        for (const auto& c : j.at("children")) n.children.push_back(tree_from_json(c));
    return n;
}

Node tree_parse(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("tree document parse error at byte ") + std::to_string(e.byte) +
                         ": " + e.what());
    }
    return tree_from_json(j);
}

std::string tree_to_string(const Node& n, const std::vector<std::string>& names) {
    std::string body;
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        return std::string(buf);
    };
    switch (n.op) {
        case Op::Const:
            body = num(n.value);
            break;
        case Op::Var:
            body = n.index < static_cast<int>(names.size()) ? names[n.index]
                                                            : "x" + std::to_string(n.index);
            break;
        default: {
            body = std::string(op_name(n.op)) + "(";
            for (size_t i = 0; i < n.children.size(); ++i) {
                if (i) body += ", ";
                body += tree_to_string(n.children[i], names);
            }
            body += ")";
        }
    }
    if (n.weighted) return num(n.weight) + "*" + body;
    return body;
}

} // namespace srlab
