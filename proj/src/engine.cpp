#include "srlab/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "srlab/optim.hpp"

namespace srlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void collect_weighted(Node& n, std::vector<Node*>& out) {
    if (n.weighted) out.push_back(&n);
    for (auto& c : n.children) collect_weighted(c, out);
}

void collect_indices_if(const Node& n, int& idx, std::vector<int>& out, bool want_weighted) {
    if (n.weighted == want_weighted) out.push_back(idx);
    ++idx;
    for (const auto& c : n.children) collect_indices_if(c, idx, out, want_weighted);
}

struct SpotInfo {
    int size;
    int depth;     // of the subtree rooted here
    int at_depth;  // of the spot itself
};

int collect_spots(const Node& n, int at_depth, std::vector<SpotInfo>& out) {
    const int my = static_cast<int>(out.size());
    out.push_back({1, 0, at_depth});
    int size = 1, depth = 0;
    for (const auto& c : n.children) {
        const int child = collect_spots(c, at_depth + 1, out);
        size += out[child].size;
        depth = std::max(depth, 1 + out[child].depth);
    }
    out[my].size = size;
    out[my].depth = depth;
    return my;
}

Node random_terminal_node(Rng& rng, int n_features) {
    int pick = rand_int(rng, 0, n_features);
    if (pick == n_features || n_features == 0) return Node::constant(rand_norm(rng));
    return Node::variable(pick);
}

} // namespace

Objective objective_from_name(const std::string& name) {
    if (name == "train_loss") return Objective::TrainLoss;
    if (name == "val_loss") return Objective::ValLoss;
    if (name == "complexity") return Objective::Complexity;
    if (name == "size") return Objective::Size;
    if (name == "depth") return Objective::Depth;
    throw config_error("unknown objective: '" + name + "'");
}

const char* objective_name(Objective o) {
    switch (o) {
        case Objective::TrainLoss: return "train_loss";
        case Objective::ValLoss: return "val_loss";
        case Objective::Complexity: return "complexity";
        case Objective::Size: return "size";
        case Objective::Depth: return "depth";
    }
    return "?";
}

std::optional<Node> apply_variation(VariationOp op, const Node& parent, const Node& donor,
                                    const VariationBounds& b, Rng& rng) {
    switch (op) {
        case VariationOp::Crossover: {
            std::vector<SpotInfo> pspots, dspots;
            collect_spots(parent, 0, pspots);
            collect_spots(donor, 0, dspots);
            const int psize = pspots[0].size;
            std::vector<int> order(pspots.size());
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            for (int sp : order) {
                const int size_budget = b.max_size - (psize - pspots[sp].size);
                const int depth_budget = b.max_depth - pspots[sp].at_depth;
                std::vector<int> cands;
                for (size_t dp = 0; dp < dspots.size(); ++dp)
                    if (dspots[dp].size <= size_budget && dspots[dp].depth <= depth_budget)
                        cands.push_back(static_cast<int>(dp));
                if (cands.empty()) continue;
                Node child = parent;
                *node_at(child, sp) = *node_at(donor, rand_pick(rng, cands));
                return child;
            }
            return std::nullopt;
        }
        case VariationOp::ToggleOn:
        case VariationOp::ToggleOff: {
            const bool want = op == VariationOp::ToggleOff; // toggle-off needs weighted spots
            std::vector<int> cands;
            int idx = 0;
            collect_indices_if(parent, idx, cands, want);
            if (cands.empty()) return std::nullopt;
            Node child = parent;
            Node* spot = node_at(child, rand_pick(rng, cands));
            spot->weighted = !want;
            spot->weight = 1.0;
            return child;
        }
        case VariationOp::Subtree: {
            std::vector<SpotInfo> spots;
            collect_spots(parent, 0, spots);
            const int sp = rand_int(rng, 0, static_cast<int>(spots.size()) - 1);
            const int size_budget = b.max_size - (spots[0].size - spots[sp].size);
            const int depth_budget = b.max_depth - spots[sp].at_depth;
            if (size_budget < 1 || depth_budget < 0) return std::nullopt;
            Node child = parent;
            *node_at(child, sp) =
                ptc2(rng, rand_int(rng, 1, size_budget), depth_budget, b.n_features);
            return child;
        }
        case VariationOp::Point: {
            Node child = parent;
            const int sp = rand_int(rng, 0, tree_size(child) - 1);
            Node* spot = node_at(child, sp);
            const int arity = static_cast<int>(spot->children.size());
            if (arity == 0) {
                Node t = random_terminal_node(rng, b.n_features);
                spot->op = t.op;
                spot->index = t.index;
                spot->value = t.value;
            } else {
                std::vector<Op> opts;
                for (Op o : all_operators()) {
                    const int fa = fixed_arity(o);
                    if (fa == arity || (is_nary(o) && arity >= 2 && arity <= kMaxArity))
                        opts.push_back(o);
                }
                spot->op = rand_pick(rng, opts);
            }
            return child;
        }
        case VariationOp::Delete: {
            std::vector<SpotInfo> spots;
            collect_spots(parent, 0, spots);
            std::vector<int> internal;
            for (size_t i = 0; i < spots.size(); ++i)
                if (spots[i].size > 1) internal.push_back(static_cast<int>(i));
            if (internal.empty()) return std::nullopt;
            Node child = parent;
            Node* spot = node_at(child, rand_pick(rng, internal));
            if (is_nary(spot->op) && spot->children.size() > 2) {
                spot->children.erase(spot->children.begin() +
                                     rand_int(rng, 0, static_cast<int>(spot->children.size()) - 1));
            } else {
                Node keep =
                    spot->children[rand_int(rng, 0, static_cast<int>(spot->children.size()) - 1)];
                *spot = std::move(keep);
            }
            return child;
        }
        case VariationOp::Insert: {
            Node child = parent;
            const int sp = rand_int(rng, 0, tree_size(child) - 1);
            Node* spot = node_at(child, sp);
            Op o = rand_pick(rng, all_operators());
            const int arity = is_nary(o) ? rand_int(rng, 2, kMaxArity) : fixed_arity(o);
            Node fresh;
            fresh.op = o;
            fresh.children.resize(arity);
            const int pos = rand_int(rng, 0, arity - 1);
            for (int i = 0; i < arity; ++i)
                if (i != pos) fresh.children[i] = random_terminal_node(rng, b.n_features);
            fresh.children[pos] = std::move(*spot);
            *spot = std::move(fresh);
            return child;
        }
    }
    return std::nullopt;
}

void EngineConfig::validate() const {
    if (pop_size < 2 || pop_size % 2 != 0)
        throw config_error("engine: population size must be even and >= 2");
    if (generations < 0) throw config_error("engine: generations must be >= 0");
    if (max_size < 1) throw config_error("engine: max size must be >= 1");
    if (max_depth < 0) throw config_error("engine: max depth must be >= 0");
    if (validation_fraction < 0 || validation_fraction >= 1)
        throw config_error("engine: validation fraction must lie in [0, 1)");
    if (variation_tolerance < 1) throw config_error("engine: variation tolerance must be >= 1");
    double wsum = 0;
    for (double w : variation_weights) {
        if (w < 0) throw config_error("engine: variation weights must be non-negative");
        wsum += w;
    }
    if (!(wsum > 0)) throw config_error("engine: variation weights sum to zero");
    if (objectives.empty()) throw config_error("engine: objective list is empty");
    if (opt_iterations < 0) throw config_error("engine: optimizer iterations must be >= 0");
    if (simplify.enabled && simplify.tolerance < 0)
        throw config_error("engine: simplification tolerance must be >= 0");
}

namespace {

class EngineRun {
public:
    EngineRun(const EngineConfig& cfg, const Dataset& data)
        : cfg_(cfg),
          xtr_(data.x_of(Partition::Train)),
          ytr_(data.y_of(Partition::Train)),
          xval_(data.x_of(Partition::Validation)),
          yval_(data.y_of(Partition::Validation)),
          rng_(cfg.seed) {
        cfg_.validate();
        if (xtr_.rows() == 0) throw data_error("engine: no training rows");
        bounds_ = {cfg_.max_size, cfg_.max_depth, static_cast<int>(xtr_.cols())};
        if (cfg_.simplify.enabled)
            table_.emplace(xtr_, cfg_.simplify.hash_bits, cfg_.seed ^ 0x5b1f3ac1d2e94707ULL);
    }

    EngineResult run() {
        using clock = std::chrono::steady_clock;
        EngineResult result;
        auto t0 = clock::now();

        init_population();
        log_generation(result, 0, t0);

        for (int gen = 1; gen <= cfg_.generations; ++gen) {
            t0 = clock::now();
            gen_simplifications_ = 0;
            step(gen);
            log_generation(result, gen, t0);
        }

        std::vector<FinalCandidate> cands;
        cands.reserve(pop_.size());
        for (const auto& ind : pop_)
            cands.push_back({ind.val_loss, ind.metrics.complexity, ind.metrics.size, ind.train_loss});
        auto [best, fallback] = pick_final(cands);
        result.best = pop_[best];
        result.val_fallback = fallback;
        result.simplify_events = std::move(events_);
        result.population = std::move(pop_);
        result.log = std::move(log_);
        return result;
    }

private:
    double safe_mse(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& y) const {
        if (pred.size() != y.size() || y.size() == 0) return kInf;
        if (!pred.isFinite().all()) return kInf;
        const double v = mse(pred, y);
        return std::isfinite(v) ? v : kInf;
    }

    // fits the enabled node weights; on numeric failure every weight resets to
    // the multiplicative neutral 1.0
    void optimize(Individual& ind) {
        std::vector<Node*> spots;
        collect_weighted(ind.tree, spots);
        if (spots.empty() || cfg_.opt_iterations == 0) return;
        Eigen::VectorXd theta0(spots.size());
        for (size_t i = 0; i < spots.size(); ++i) theta0(i) = spots[i]->weight;
        auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            for (size_t i = 0; i < spots.size(); ++i) spots[i]->weight = v(i);
            return ytr_ - evaluate(ind.tree, xtr_).matrix();
        };
        LmOptions opt;
        opt.max_iters = cfg_.opt_iterations;
        auto res = lm_fit(residual, theta0, opt);
        if (!res) {
            for (auto* s : spots) s->weight = 1.0;
            return;
        }
        for (size_t i = 0; i < spots.size(); ++i) spots[i]->weight = res->theta(i);
    }

    void score(Individual& ind) {
        ind.train_pred = evaluate(ind.tree, xtr_);
        ind.train_loss = safe_mse(ind.train_pred, ytr_.array());
        ind.val_loss = yval_.size() > 0
                           ? safe_mse(evaluate(ind.tree, xval_), yval_.array())
                           : std::nan("");
        ind.metrics = tree_metrics(ind.tree);
    }

    void simplify_in_place(Individual& ind, int gen) {
        if (!table_) return;
        const int n = table_->simplify(ind.tree, cfg_.simplify, gen, &events_);
        gen_simplifications_ += n;
        if (n > 0) optimize(ind);
    }

    Individual fresh_individual(int gen) {
        Individual ind;
        ind.tree = ptc2(rng_, rand_int(rng_, 1, cfg_.max_size), cfg_.max_depth,
                        bounds_.n_features);
        enable_terminal_weights(ind.tree);
        simplify_in_place(ind, gen);
        optimize(ind);
        score(ind);
        return ind;
    }

    static void enable_terminal_weights(Node& n) {
        if (n.children.empty()) {
            n.weighted = true;
            n.weight = 1.0;
        }
        for (auto& c : n.children) enable_terminal_weights(c);
    }

    void init_population() {
        pop_.clear();
        pop_.reserve(cfg_.pop_size);
        gen_simplifications_ = 0;
        for (int i = 0; i < cfg_.pop_size; ++i) pop_.push_back(fresh_individual(0));
    }

    Eigen::MatrixXd error_matrix() const {
        const auto cases = ytr_.size();
        Eigen::MatrixXd errors(cases, pop_.size());
        for (size_t p = 0; p < pop_.size(); ++p) {
            if (!std::isfinite(pop_[p].train_loss) || !pop_[p].train_pred.isFinite().all()) {
                errors.col(p).setConstant(kInf);
                continue;
            }
            errors.col(p) = (pop_[p].train_pred - ytr_.array()).abs().matrix();
        }
        return errors;
    }

    Individual make_child(const Individual& parent, const Individual& donor, int gen) {
        std::discrete_distribution<int> pick_op(cfg_.variation_weights.begin(),
                                                cfg_.variation_weights.end());
        for (int attempt = 0; attempt < cfg_.variation_tolerance; ++attempt) {
            const auto op = static_cast<VariationOp>(pick_op(rng_));
            auto cand = apply_variation(op, parent.tree, donor.tree, bounds_, rng_);
            if (!cand) continue;
            if (tree_size(*cand) > cfg_.max_size || tree_depth(*cand) > cfg_.max_depth) continue;
            Individual child;
            child.tree = std::move(*cand);
            optimize(child);
            simplify_in_place(child, gen);
            score(child);
            return child;
        }
        if (cfg_.variation_failure_random) return fresh_individual(gen);
        return parent;
    }

    std::vector<double> objective_vector(const Individual& ind) const {
        std::vector<double> v;
        v.reserve(cfg_.objectives.size());
        for (Objective o : cfg_.objectives) {
            double x = 0;
            switch (o) {
                case Objective::TrainLoss: x = ind.train_loss; break;
                case Objective::ValLoss: x = ind.val_loss; break;
                case Objective::Complexity: x = ind.metrics.complexity; break;
                case Objective::Size: x = ind.metrics.size; break;
                case Objective::Depth: x = ind.metrics.depth; break;
            }
            v.push_back(std::isfinite(x) ? x : kInf);
        }
        return v;
    }

    void step(int gen) {
        Selector selector(error_matrix(), cfg_.selection);
        std::vector<int> parents(cfg_.pop_size);
        for (int i = 0; i < cfg_.pop_size; ++i) parents[i] = selector.select(rng_);

        std::vector<Individual> merged = pop_;
        merged.reserve(2 * cfg_.pop_size);
        for (int i = 0; i + 1 < cfg_.pop_size; i += 2) {
            const auto& a = pop_[parents[i]];
            const auto& b = pop_[parents[i + 1]];
            merged.push_back(make_child(a, b, gen));
            merged.push_back(make_child(b, a, gen));
        }

        std::vector<std::vector<double>> objs;
        objs.reserve(merged.size());
        for (const auto& ind : merged) objs.push_back(objective_vector(ind));
        auto keep = survive(objs, cfg_.pop_size);
        std::vector<Individual> next;
        next.reserve(keep.size());
        for (int i : keep) next.push_back(std::move(merged[i]));
        pop_ = std::move(next);
    }

    void log_generation(EngineResult& result, int gen,
                        std::chrono::steady_clock::time_point t0) {
        GenerationLog row;
        row.generation = gen;
        row.best_train_loss = kInf;
        row.best_val_loss = kInf;
        std::vector<double> sizes, cplx;
        for (const auto& ind : pop_) {
            row.best_train_loss = std::min(row.best_train_loss, ind.train_loss);
            if (std::isfinite(ind.val_loss)) row.best_val_loss = std::min(row.best_val_loss, ind.val_loss);
            sizes.push_back(ind.metrics.size);
            cplx.push_back(ind.metrics.complexity);
        }
        auto mid = [](std::vector<double>& v) {
            std::sort(v.begin(), v.end());
            const size_t n = v.size();
            return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
        };
        row.median_size = mid(sizes);
        row.median_complexity = mid(cplx);
        row.n_simplifications = gen_simplifications_;
        row.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
        log_.push_back(row);
        result.log = log_; // kept current so partial runs stay inspectable
    }

    EngineConfig cfg_;
    Eigen::MatrixXd xtr_;
    Eigen::VectorXd ytr_;
    Eigen::MatrixXd xval_;
    Eigen::VectorXd yval_;
    Rng rng_;
    VariationBounds bounds_;
    std::optional<SimplificationTable> table_;
    std::vector<Individual> pop_;
    std::vector<SimplifyEvent> events_;
    std::vector<GenerationLog> log_;
    long gen_simplifications_ = 0;
};

} // namespace

EngineResult run_engine(const EngineConfig& cfg, const Dataset& data) {
    EngineRun run(cfg, data);
    return run.run();
}

} // namespace srlab
