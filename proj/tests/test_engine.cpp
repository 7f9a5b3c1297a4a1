#include <doctest.h>

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "srlab/common.hpp"
#include "srlab/data.hpp"
#include "srlab/engine.hpp"
#include "srlab/expr.hpp"

using namespace srlab;

namespace {

// noise-free planar target over two features, pre-split without shuffling so
// runs are easy to reason about
Dataset plane_dataset(int rows, int val_rows, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.X.resize(rows, 2);
    d.y.resize(rows);
    for (int r = 0; r < rows; ++r) {
        d.X(r, 0) = rand_real(rng, -2.0, 2.0);
        d.X(r, 1) = rand_real(rng, -2.0, 2.0);
        d.y(r) = 2.0 * d.X(r, 0) + d.X(r, 1);
    }
    d.feature_names = {"x0", "x1"};
    d.target_name = "y";
    d.partition.assign(rows, Partition::Train);
    for (int r = rows - val_rows; r < rows; ++r) d.partition[r] = Partition::Validation;
    return d;
}

bool well_formed(const Node& n, int n_features) {
    const int arity = static_cast<int>(n.children.size());
    if (is_nary(n.op)) {
        if (arity < 2 || arity > kMaxArity) return false;
    } else if (arity != std::max(0, fixed_arity(n.op))) {
        return false;
    }
    if (n.op == Op::Var && (n.index < 0 || n.index >= n_features)) return false;
    for (const auto& c : n.children)
        if (!well_formed(c, n_features)) return false;
    return true;
}

std::string dump(const Node& n) { return tree_to_json(n).dump(); }

} // namespace

TEST_SUITE_BEGIN("engine");

TEST_CASE("objective names round-trip") {
    for (Objective o : {Objective::TrainLoss, Objective::ValLoss, Objective::Complexity,
                        Objective::Size, Objective::Depth})
        CHECK(objective_from_name(objective_name(o)) == o);
    CHECK_THROWS_AS(objective_from_name("novelty"), config_error);
}

TEST_CASE("configuration validation rejects broken settings") {
    EngineConfig cfg;
    cfg.pop_size = 7; // odd
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = {};
    cfg.pop_size = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = {};
    cfg.variation_weights.fill(0.0);
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = {};
    cfg.variation_weights[2] = -1.0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = {};
    cfg.objectives.clear();
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = {};
    cfg.validation_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = {};
    cfg.validate();
}

TEST_CASE("every structural edit yields a well-formed tree") {
    Rng rng(3);
    VariationBounds b{40, 6, 3};
    const std::array<VariationOp, kVariationOps> ops = {
        VariationOp::Crossover, VariationOp::ToggleOn, VariationOp::ToggleOff,
        VariationOp::Subtree,   VariationOp::Point,    VariationOp::Delete,
        VariationOp::Insert};
    std::array<int, kVariationOps> produced{}, declined{};
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
    // terminal weights mirror the engine's starting state so that the
    // weight-toggling edits have spots to act on
    auto weight_terminals = [](Node& n, auto&& self) -> void {
        if (n.children.empty()) n.weighted = true;
        for (auto& c : n.children) self(c, self);
    };
    for (int trial = 0; trial < 1500; ++trial) {
        Node parent = ptc2(rng, 1 + static_cast<int>(rng() % 20), 5, 3);
        Node donor = ptc2(rng, 1 + static_cast<int>(rng() % 20), 5, 3);
        if (trial % 2 == 0) weight_terminals(parent, weight_terminals);
        for (size_t o = 0; o < ops.size(); ++o) {
            auto out = apply_variation(ops[o], parent, donor, b, rng);
            if (!out) {
                ++declined[o];
                continue;
            }
            ++produced[o];
            CHECK(well_formed(*out, 3));
            CHECK(evaluate(*out, x).size() == 5); // evaluable end to end
        }
    }
    for (size_t o = 0; o < ops.size(); ++o) CHECK(produced[o] > 0);
    // only spot-dependent edits may decline, and the unconditional ones never do
    CHECK(declined[4] == 0); // point
    CHECK(declined[6] == 0); // insert
}

TEST_CASE("edits that need a qualifying spot decline gracefully") {
    Rng rng(5);
    VariationBounds b{40, 6, 2};
    Node lone = Node::variable(0); // single unweighted terminal
    CHECK_FALSE(apply_variation(VariationOp::Delete, lone, lone, b, rng).has_value());
    CHECK_FALSE(apply_variation(VariationOp::ToggleOff, lone, lone, b, rng).has_value());
    Node weighted = Node::variable(0);
    weighted.weighted = true;
    CHECK_FALSE(apply_variation(VariationOp::ToggleOn, weighted, weighted, b, rng).has_value());
}

TEST_CASE("deleting from a wide operator drops one argument") {
    Rng rng(7);
    VariationBounds b{40, 6, 2};
    Node wide = Node::make(Op::Add, {Node::variable(0), Node::variable(1), Node::constant(1.0)});
    for (int i = 0; i < 30; ++i) {
        auto out = apply_variation(VariationOp::Delete, wide, wide, b, rng);
        REQUIRE(out.has_value());
        CHECK(out->op == Op::Add);
        CHECK(out->children.size() == 2);
    }
}

TEST_CASE("a run stays inside its size and depth budget") {
    Dataset d = plane_dataset(48, 12, 11);
    EngineConfig cfg;
    cfg.pop_size = 12;
    cfg.generations = 6;
    cfg.max_size = 32;
    cfg.max_depth = 5;
    cfg.seed = 1;
    auto res = run_engine(cfg, d);
    CHECK(static_cast<int>(res.population.size()) == cfg.pop_size);
    for (const auto& ind : res.population) {
        CHECK(tree_size(ind.tree) <= cfg.max_size);
        CHECK(tree_depth(ind.tree) <= cfg.max_depth);
        CHECK(well_formed(ind.tree, 2));
        CHECK(ind.metrics.size == tree_size(ind.tree));
        CHECK(ind.metrics.depth == tree_depth(ind.tree));
    }
}

TEST_CASE("stored fitness matches a fresh recomputation") {
    Dataset d = plane_dataset(40, 10, 13);
    EngineConfig cfg;
    cfg.pop_size = 10;
    cfg.generations = 4;
    cfg.max_size = 24;
    cfg.seed = 2;
    auto res = run_engine(cfg, d);
    const Eigen::MatrixXd xtr = d.x_of(Partition::Train);
    const Eigen::ArrayXd ytr = d.y_of(Partition::Train).array();
    for (const auto& ind : res.population) {
        Eigen::ArrayXd pred = evaluate(ind.tree, xtr);
        for (int r = 0; r < pred.size(); ++r) CHECK(pred(r) == ind.train_pred(r));
        const double loss = pred.isFinite().all() ? mse(pred, ytr)
                                                  : std::numeric_limits<double>::infinity();
        if (std::isfinite(loss))
            CHECK(ind.train_loss == loss);
        else
            CHECK(std::isinf(ind.train_loss));
    }
}

TEST_CASE("identical seeds reproduce the run bit for bit") {
    Dataset d = plane_dataset(40, 10, 17);
    EngineConfig cfg;
    cfg.pop_size = 10;
    cfg.generations = 5;
    cfg.max_size = 24;
    cfg.seed = 9;
    auto a = run_engine(cfg, d);
    auto b = run_engine(cfg, d);
    CHECK(dump(a.best.tree) == dump(b.best.tree));
    CHECK(a.best.train_loss == b.best.train_loss);
    REQUIRE(a.population.size() == b.population.size());
    for (size_t i = 0; i < a.population.size(); ++i)
        CHECK(dump(a.population[i].tree) == dump(b.population[i].tree));
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].generation == b.log[i].generation);
        CHECK(a.log[i].best_train_loss == b.log[i].best_train_loss);
        CHECK(a.log[i].best_val_loss == b.log[i].best_val_loss);
        CHECK(a.log[i].median_size == b.log[i].median_size);
        CHECK(a.log[i].median_complexity == b.log[i].median_complexity);
        CHECK(a.log[i].n_simplifications == b.log[i].n_simplifications);
    }
}

TEST_CASE("zero generations reports only the initial population") {
    Dataset d = plane_dataset(30, 6, 19);
    EngineConfig cfg;
    cfg.pop_size = 8;
    cfg.generations = 0;
    cfg.seed = 4;
    auto res = run_engine(cfg, d);
    REQUIRE(res.log.size() == 1);
    CHECK(res.log[0].generation == 0);
    CHECK(static_cast<int>(res.population.size()) == cfg.pop_size);
    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& ind : res.population) best_val = std::min(best_val, ind.val_loss);
    CHECK(res.best.val_loss == best_val);
}

TEST_CASE("the best training loss never backslides between generations") {
    Dataset d = plane_dataset(48, 12, 23);
    EngineConfig cfg;
    cfg.pop_size = 12;
    cfg.generations = 10;
    cfg.max_size = 24;
    cfg.seed = 6;
    auto res = run_engine(cfg, d);
    REQUIRE(res.log.size() == static_cast<size_t>(cfg.generations) + 1);
    for (size_t i = 1; i < res.log.size(); ++i)
        CHECK(res.log[i].best_train_loss <= res.log[i - 1].best_train_loss);
}

TEST_CASE("a zero depth budget confines evolution to terminals") {
    Dataset d = plane_dataset(30, 6, 29);
    EngineConfig cfg;
    cfg.pop_size = 8;
    cfg.generations = 4;
    cfg.max_size = 8;
    cfg.max_depth = 0;
    cfg.seed = 7;
    auto res = run_engine(cfg, d);
    for (const auto& ind : res.population) {
        CHECK(tree_depth(ind.tree) == 0);
        CHECK(tree_size(ind.tree) == 1);
    }
}

TEST_CASE("smallest even population still runs") {
    Dataset d = plane_dataset(24, 6, 31);
    EngineConfig cfg;
    cfg.pop_size = 2;
    cfg.generations = 3;
    cfg.seed = 8;
    auto res = run_engine(cfg, d);
    CHECK(res.population.size() == 2);
}

TEST_CASE("enabling simplification logs gated, shrinking rewrites") {
    Dataset d = plane_dataset(48, 12, 37);
    EngineConfig cfg;
    cfg.pop_size = 12;
    cfg.generations = 8;
    cfg.max_size = 32;
    cfg.simplify.enabled = true;
    cfg.seed = 10;
    auto res = run_engine(cfg, d);
    for (const auto& ev : res.simplify_events) {
        CHECK(ev.distance <= cfg.simplify.tolerance);
        CHECK(ev.post_size < ev.pre_size);
    }
    // the per-generation counters agree with the event stream
    std::vector<long> per_gen(cfg.generations + 1, 0);
    for (const auto& ev : res.simplify_events) {
        REQUIRE(ev.generation >= 0);
        REQUIRE(ev.generation <= cfg.generations);
        ++per_gen[ev.generation];
    }
    for (const auto& row : res.log) CHECK(row.n_simplifications == per_gen[row.generation]);
}

TEST_CASE("without a validation partition the champion falls back to training loss") {
    Dataset d = plane_dataset(30, 0, 41); // everything stays in the train split
    EngineConfig cfg;
    cfg.pop_size = 8;
    cfg.generations = 3;
    cfg.seed = 11;
    auto res = run_engine(cfg, d);
    CHECK(res.val_fallback);
    double best_train = std::numeric_limits<double>::infinity();
    for (const auto& ind : res.population) best_train = std::min(best_train, ind.train_loss);
    CHECK(res.best.train_loss == best_train);
}

TEST_CASE("an empty training partition is refused") {
    Dataset d = plane_dataset(10, 10, 43); // every row assigned to validation
    EngineConfig cfg;
    cfg.pop_size = 4;
    cfg.generations = 1;
    CHECK_THROWS_AS(run_engine(cfg, d), data_error);
}

TEST_CASE("a linear target is typically solved with small budgets") {
    // individual seeds can stall in a local optimum, so judge the median run
    Dataset d = plane_dataset(60, 15, 47);
    std::vector<double> finals;
    for (std::uint64_t seed : {12, 13, 14, 15, 16, 17, 18}) {
        EngineConfig cfg;
        cfg.pop_size = 20;
        cfg.generations = 25;
        cfg.max_size = 24;
        cfg.seed = seed;
        auto res = run_engine(cfg, d);
        CHECK(res.best.train_loss <= res.log.front().best_train_loss);
        finals.push_back(res.best.train_loss);
    }
    std::sort(finals.begin(), finals.end());
    CHECK(finals[finals.size() / 2] < 0.5); // weight fitting alone expresses 2a+b
}

TEST_SUITE_END();
