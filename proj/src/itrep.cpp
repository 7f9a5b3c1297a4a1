#include "srlab/itrep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>

#include "srlab/data.hpp"
#include "srlab/select.hpp"

namespace srlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRandInitLo = -100.0, kRandInitHi = 100.0;

double apply_transform(Transform t, double v) {
    switch (t) {
        case Transform::Id: return v;
        case Transform::Sin: return std::sin(v);
        case Transform::Cos: return std::cos(v);
        case Transform::Tan: return std::tan(v);
        case Transform::Sqrt: return std::sqrt(v);
        case Transform::Log: return std::log(v);
        case Transform::Exp: return std::exp(v);
        case Transform::Abs: return std::abs(v);
    }
    return v;
}

// small integer powers, exact for the strength range
double int_pow(double x, int k) {
    if (k == 0) return 1.0;
    const int a = k < 0 ? -k : k;
    double r = x;
    for (int i = 1; i < a; ++i) r *= x;
    return k < 0 ? 1.0 / r : r;
}

Eigen::ArrayXd interaction(const ITTerm& term, const Eigen::MatrixXd& X) {
    Eigen::ArrayXd p = Eigen::ArrayXd::Ones(X.rows());
    for (size_t j = 0; j < term.k.size(); ++j) {
        if (term.k[j] == 0) continue;
        p *= X.col(j).array().unaryExpr([k = term.k[j]](double x) { return int_pow(x, k); });
    }
    return p;
}

Eigen::ArrayXd term_basis(const ITTerm& term, const Eigen::MatrixXd& X) {
    Eigen::ArrayXd inner = term.theta0 + term.theta1 * interaction(term, X);
    return inner.unaryExpr([g = term.g](double v) { return apply_transform(g, v); });
}

std::string term_key(const ITTerm& t) {
    std::string s = transform_name(t.g);
    s += '|';
    for (size_t j = 0; j < t.k.size(); ++j) {
        if (j) s += ',';
        s += std::to_string(t.k[j]);
    }
    return s;
}

double safe_nmse(const Eigen::ArrayXd& pred, const Eigen::ArrayXd& y) {
    if (!pred.isFinite().all()) return kInf;
    const double v = nmse(pred, y);
    return std::isfinite(v) ? v : kInf;
}

bool params_finite(const ITExpression& e) {
    if (!std::isfinite(e.beta0)) return false;
    for (const auto& t : e.terms)
        if (!std::isfinite(t.beta) || !std::isfinite(t.theta0) || !std::isfinite(t.theta1))
            return false;
    return true;
}

} // namespace

const char* transform_name(Transform t) {
    switch (t) {
        case Transform::Id: return "id";
        case Transform::Sin: return "sin";
        case Transform::Cos: return "cos";
        case Transform::Tan: return "tan";
        case Transform::Sqrt: return "sqrt";
        case Transform::Log: return "log";
        case Transform::Exp: return "exp";
        case Transform::Abs: return "abs";
    }
    return "?";
}

Transform transform_from_name(const std::string& name) {
    static const Transform all[] = {Transform::Id,  Transform::Sin,  Transform::Cos,
                                    Transform::Tan, Transform::Sqrt, Transform::Log,
                                    Transform::Exp, Transform::Abs};
    for (Transform t : all)
        if (name == transform_name(t)) return t;
    throw config_error("unknown transformation: '" + name + "'");
}

FitHeuristic heuristic_from_name(const std::string& name) {
    if (name == "ols") return FitHeuristic::Ols;
    if (name == "lm") return FitHeuristic::Lm;
    if (name == "ols-lm") return FitHeuristic::OlsLm;
    if (name == "lm-ols") return FitHeuristic::LmOls;
    throw config_error("unknown fit heuristic: '" + name + "'");
}

const char* heuristic_name(FitHeuristic h) {
    switch (h) {
        case FitHeuristic::Ols: return "ols";
        case FitHeuristic::Lm: return "lm";
        case FitHeuristic::OlsLm: return "ols-lm";
        case FitHeuristic::LmOls: return "lm-ols";
    }
    return "?";
}

int nonzero_strengths(const ITTerm& term) {
    int n = 0;
    for (int k : term.k)
        if (k != 0) ++n;
    return n;
}

Eigen::ArrayXd it_evaluate(const ITExpression& e, const Eigen::MatrixXd& X) {
    Eigen::ArrayXd out = Eigen::ArrayXd::Constant(X.rows(), e.beta0);
    for (const auto& t : e.terms) out += t.beta * term_basis(t, X);
    return out;
}

std::string it_render(const ITExpression& e, const std::vector<std::string>& names) {
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string s = num(e.beta0);
    for (const auto& t : e.terms) {
        std::string inter;
        for (size_t j = 0; j < t.k.size(); ++j) {
            if (t.k[j] == 0) continue;
            if (!inter.empty()) inter += "*";
            inter += j < names.size() ? names[j] : "x" + std::to_string(j);
            if (t.k[j] != 1) inter += "^" + std::to_string(t.k[j]);
        }
        if (inter.empty()) inter = "1";
        s += " + " + num(t.beta) + "*" + transform_name(t.g) + "(" + num(t.theta0) + " + " +
             num(t.theta1) + "*" + inter + ")";
    }
    return s;
}

std::vector<int> it_canonical_order(const ITExpression& e) {
    std::vector<int> order(e.terms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ta = e.terms[a];
        const auto& tb = e.terms[b];
        if (ta.g != tb.g) return static_cast<int>(ta.g) < static_cast<int>(tb.g);
        return ta.k < tb.k;
    });
    return order;
}

std::string it_canonical_key(const ITExpression& e) {
    auto order = it_canonical_order(e);
    std::string key;
    for (int i : order) {
        if (!key.empty()) key += ';';
        key += term_key(e.terms[i]);
    }
    return key;
}

ITParams it_extract_params(const ITExpression& e) {
    auto order = it_canonical_order(e);
    ITParams p;
    p.beta0 = e.beta0;
    for (int i : order) {
        p.beta.push_back(e.terms[i].beta);
        p.theta0.push_back(e.terms[i].theta0);
        p.theta1.push_back(e.terms[i].theta1);
    }
    return p;
}

void it_apply_params(ITExpression& e, const ITParams& p) {
    auto order = it_canonical_order(e);
    if (order.size() != p.beta.size())
        throw numeric_error("cached parameter pack does not match the expression arity");
    e.beta0 = p.beta0;
    for (size_t r = 0; r < order.size(); ++r) {
        e.terms[order[r]].beta = p.beta[r];
        e.terms[order[r]].theta0 = p.theta0[r];
        e.terms[order[r]].theta1 = p.theta1[r];
    }
}

void ITEAConfig::validate() const {
    if (pop_size < 1) throw config_error("itea: population size must be >= 1");
    if (generations < 0) throw config_error("itea: generations must be >= 0");
    if (terms_min < 1 || terms_min > terms_max)
        throw config_error("itea: term bounds must satisfy 1 <= min <= max");
    if (strength_min > strength_max) throw config_error("itea: strength bounds inverted");
    if (strength_min == 0 && strength_max == 0)
        throw config_error("itea: strength bounds admit no nonzero value");
    if (max_nonzero_strengths < 1) throw config_error("itea: max nonzero strengths must be >= 1");
    if (transforms.empty()) throw config_error("itea: transformation set is empty");
    if (tournament_size < 1) throw config_error("itea: tournament size must be >= 1");
    if (cache_capacity < 1) throw config_error("itea: cache capacity must be >= 1");
    if (lm_iterations < 0) throw config_error("itea: lm iterations must be >= 0");
}

namespace {

int random_nonzero_strength(const ITEAConfig& cfg, Rng& rng) {
    int lo = cfg.strength_min, hi = cfg.strength_max;
    int count = hi - lo + 1 - (lo <= 0 && 0 <= hi ? 1 : 0);
    int r = rand_int(rng, 0, count - 1);
    int v = lo + r;
    if (lo <= 0 && v >= 0) ++v; // skip zero
    return v;
}

ITTerm random_term(const ITEAConfig& cfg, int n_features, Rng& rng) {
    ITTerm t;
    t.g = rand_pick(rng, cfg.transforms);
    t.k.assign(n_features, 0);
    const int nz = rand_int(rng, 1, std::min(cfg.max_nonzero_strengths, n_features));
    std::vector<int> idx(n_features);
    std::iota(idx.begin(), idx.end(), 0);
    for (int j = 0; j < nz; ++j) {
        std::swap(idx[j], idx[rand_int(rng, j, n_features - 1)]);
        t.k[idx[j]] = random_nonzero_strength(cfg, rng);
    }
    return t;
}

// element-wise +- combination of two existing tuples, clipped and re-truncated
ITTerm combine_terms(const ITTerm& a, const ITTerm& b, const ITEAConfig& cfg, Rng& rng) {
    ITTerm t;
    t.g = rand_pick(rng, cfg.transforms);
    t.k.resize(a.k.size());
    const int sign = rand_bool(rng) ? 1 : -1;
    for (size_t j = 0; j < a.k.size(); ++j)
        t.k[j] = std::clamp(a.k[j] + sign * b.k[j], cfg.strength_min, cfg.strength_max);
    if (nonzero_strengths(t) > cfg.max_nonzero_strengths) {
        std::vector<int> pos;
        for (size_t j = 0; j < t.k.size(); ++j)
            if (t.k[j] != 0) pos.push_back(static_cast<int>(j));
        std::stable_sort(pos.begin(), pos.end(), [&](int x, int y) {
            return std::abs(t.k[x]) > std::abs(t.k[y]); // keep the largest magnitudes
        });
        for (size_t r = cfg.max_nonzero_strengths; r < pos.size(); ++r) t.k[pos[r]] = 0;
    }
    return t;
}

} // namespace

ITExpression it_random(const ITEAConfig& cfg, int n_features, Rng& rng) {
    if (n_features < 1) throw config_error("itea: need at least one feature");
    ITExpression e;
    const int t = rand_int(rng, cfg.terms_min, cfg.terms_max);
    for (int i = 0; i < t; ++i) e.terms.push_back(random_term(cfg, n_features, rng));
    return e;
}

ITExpression it_mutate(const ITExpression& e, const ITEAConfig& cfg, Rng& rng) {
    const int t = static_cast<int>(e.terms.size());
    std::vector<int> moves; // 0 expand, 1 shrink, 2 local
    if (t < cfg.terms_max) moves.push_back(0);
    if (t > cfg.terms_min) moves.push_back(1);
    moves.push_back(2);

    ITExpression out = e;
    switch (rand_pick(rng, moves)) {
        case 0: {
            const int n_features = static_cast<int>(e.terms.front().k.size());
            if (rand_bool(rng) && t >= 2) {
                int i = rand_int(rng, 0, t - 1);
                int j = rand_int(rng, 0, t - 2);
                if (j >= i) ++j;
                out.terms.push_back(combine_terms(e.terms[i], e.terms[j], cfg, rng));
            } else {
                out.terms.push_back(random_term(cfg, n_features, rng));
            }
            break;
        }
        case 1:
            out.terms.erase(out.terms.begin() + rand_int(rng, 0, t - 1));
            break;
        case 2: {
            ITTerm& term = out.terms[rand_int(rng, 0, t - 1)];
            const int nz = nonzero_strengths(term);
            std::vector<std::pair<int, int>> options; // (position, new value)
            for (size_t j = 0; j < term.k.size(); ++j) {
                for (int v = cfg.strength_min; v <= cfg.strength_max; ++v) {
                    if (v == term.k[j]) continue;
                    const int new_nz = nz - (term.k[j] != 0 ? 1 : 0) + (v != 0 ? 1 : 0);
                    if (new_nz <= cfg.max_nonzero_strengths) options.emplace_back(j, v);
                }
            }
            const auto& [j, v] = rand_pick(rng, options);
            term.k[j] = v;
            term.beta = 0.0;
            term.theta0 = 0.0;
            term.theta1 = 1.0;
            break;
        }
    }
    return out;
}

void it_neutral_fallback(ITExpression& e) {
    e.beta0 = 0.0;
    for (auto& t : e.terms) {
        t.beta = 0.0;
        t.theta0 = 0.0;
        t.theta1 = 1.0;
    }
}

namespace {

std::string dedupe_key(const ITTerm& t) {
    std::string s = term_key(t);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "|%a|%a", t.theta0, t.theta1);
    return s + buf;
}

// design matrix with exactly identical basis columns collapsed; the merged
// coefficient lands on the first occurrence, duplicates get zero
bool fit_ols_betas(ITExpression& e, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    std::vector<int> column_of(e.terms.size(), -1);
    std::map<std::string, int> seen;
    std::vector<int> owners;
    for (size_t i = 0; i < e.terms.size(); ++i) {
        auto key = dedupe_key(e.terms[i]);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(std::move(key), static_cast<int>(owners.size()));
            column_of[i] = static_cast<int>(owners.size());
            owners.push_back(static_cast<int>(i));
        }
    }
    Eigen::MatrixXd phi(X.rows(), owners.size() + 1);
    phi.col(0).setOnes();
    for (size_t c = 0; c < owners.size(); ++c)
        phi.col(c + 1) = term_basis(e.terms[owners[c]], X).matrix();
    if (!phi.allFinite()) return false;
    auto fit = ols_fit(phi, y);
    if (!fit) return false;
    e.beta0 = fit->beta(0);
    for (size_t i = 0; i < e.terms.size(); ++i)
        e.terms[i].beta = column_of[i] >= 0 ? fit->beta(column_of[i] + 1) : 0.0;
    return true;
}

void pack_params(const ITExpression& e, Eigen::VectorXd& v) {
    const size_t t = e.terms.size();
    v.resize(1 + 3 * t);
    v(0) = e.beta0;
    for (size_t i = 0; i < t; ++i) {
        v(1 + i) = e.terms[i].beta;
        v(1 + t + i) = e.terms[i].theta0;
        v(1 + 2 * t + i) = e.terms[i].theta1;
    }
}

void unpack_params(ITExpression& e, const Eigen::VectorXd& v) {
    const size_t t = e.terms.size();
    e.beta0 = v(0);
    for (size_t i = 0; i < t; ++i) {
        e.terms[i].beta = v(1 + i);
        e.terms[i].theta0 = v(1 + t + i);
        e.terms[i].theta1 = v(1 + 2 * t + i);
    }
}

bool joint_lm(ITExpression& e, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int iters) {
    Eigen::VectorXd theta0;
    pack_params(e, theta0);
    ITExpression scratch = e;
    auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        unpack_params(scratch, v);
        return y - it_evaluate(scratch, X).matrix();
    };
    LmOptions opt;
    opt.max_iters = iters;
    auto res = lm_fit(residual, theta0, opt);
    if (!res) return false;
    unpack_params(e, res->theta);
    return true;
}

// adjusts one term's inner parameters against the raw target
bool per_term_lm(ITTerm& term, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int iters,
                 Rng& rng) {
    term.theta0 = rand_real(rng, kRandInitLo, kRandInitHi);
    term.theta1 = rand_real(rng, kRandInitLo, kRandInitHi);
    Eigen::VectorXd v(2);
    v << term.theta0, term.theta1;
    ITTerm scratch = term;
    auto residual = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        scratch.theta0 = p(0);
        scratch.theta1 = p(1);
        return y - term_basis(scratch, X).matrix();
    };
    LmOptions opt;
    opt.max_iters = iters;
    auto res = lm_fit(residual, v, opt);
    if (!res) return false;
    term.theta0 = res->theta(0);
    term.theta1 = res->theta(1);
    return true;
}

} // namespace

ITFitOutcome it_fit(const ITExpression& e, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const ITEAConfig& cfg, Rng& rng) {
    ITExpression work = e;
    bool ok = true;
    switch (cfg.heuristic) {
        case FitHeuristic::Ols:
            ok = fit_ols_betas(work, X, y);
            break;
        case FitHeuristic::Lm: {
            work.beta0 = rand_real(rng, kRandInitLo, kRandInitHi);
            for (auto& t : work.terms) t.beta = rand_real(rng, kRandInitLo, kRandInitHi);
            for (auto& t : work.terms) {
                t.theta0 = rand_real(rng, kRandInitLo, kRandInitHi);
                t.theta1 = rand_real(rng, kRandInitLo, kRandInitHi);
            }
            ok = joint_lm(work, X, y, cfg.lm_iterations);
            break;
        }
        case FitHeuristic::OlsLm: {
            // outer coefficients closed-form, conditioned on the fresh inner draw
            for (auto& t : work.terms) {
                t.theta0 = rand_real(rng, kRandInitLo, kRandInitHi);
                t.theta1 = rand_real(rng, kRandInitLo, kRandInitHi);
            }
            ok = fit_ols_betas(work, X, y);
            if (ok) ok = joint_lm(work, X, y, cfg.lm_iterations);
            break;
        }
        case FitHeuristic::LmOls: {
            for (auto& t : work.terms) {
                if (!per_term_lm(t, X, y, cfg.lm_iterations, rng)) {
                    ok = false;
                    break;
                }
            }
            if (ok) ok = fit_ols_betas(work, X, y);
            // the plain least-squares fit stays a feasible candidate
            ITExpression alt = e;
            if (fit_ols_betas(alt, X, y)) {
                const double alt_loss = safe_nmse(it_evaluate(alt, X), y);
                const double work_loss = ok ? safe_nmse(it_evaluate(work, X), y) : kInf;
                if (alt_loss < work_loss) {
                    work = std::move(alt);
                    ok = true;
                }
            }
            break;
        }
    }

    ITFitOutcome out;
    if (ok && params_finite(work)) {
        const double loss = safe_nmse(it_evaluate(work, X), y);
        if (std::isfinite(loss)) {
            out.expr = std::move(work);
            out.loss = loss;
            return out;
        }
    }
    out.expr = e;
    it_neutral_fallback(out.expr);
    out.loss = safe_nmse(it_evaluate(out.expr, X), y);
    out.fell_back = true;
    return out;
}

ITFitOutcome cache_get_or_fit(ITParamCache& cache, const ITExpression& e,
                              const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const ITEAConfig& cfg, Rng& rng, bool* hit) {
    const auto key = it_canonical_key(e);
    if (ITParams* stored = cache.get(key)) {
        if (hit) *hit = true;
        ITFitOutcome out;
        out.expr = e;
        it_apply_params(out.expr, *stored);
        out.loss = safe_nmse(it_evaluate(out.expr, X), y);
        return out;
    }
    if (hit) *hit = false;

    ITFitOutcome fitted = it_fit(e, X, y, cfg, rng);
    ITExpression neutral = e;
    it_neutral_fallback(neutral);
    const double neutral_loss = safe_nmse(it_evaluate(neutral, X), y);
    if (!fitted.fell_back && fitted.loss < neutral_loss) {
        cache.put(key, it_extract_params(fitted.expr));
        return fitted;
    }
    // failed or non-improving fits are not memoized; the expression keeps
    // neutral parameters for this round and may be re-fit if seen again
    ITFitOutcome out;
    out.expr = std::move(neutral);
    out.loss = neutral_loss;
    out.fell_back = true;
    return out;
}

ITEAResult itea_run(const ITEAConfig& cfg, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    cfg.validate();
    if (X.rows() != y.rows() || X.rows() == 0) throw data_error("itea: shape mismatch or no rows");
    if (!(population_variance(y.array()) > 0)) throw numeric_error("itea: target has zero variance");

    Rng rng(cfg.seed);
    ITParamCache cache(cfg.cache_capacity);
    const int n_features = static_cast<int>(X.cols());
    ITEAResult result;

    struct Member {
        ITExpression expr;
        double loss;
    };
    std::vector<Member> pop;
    pop.reserve(cfg.pop_size);
    auto fit = [&](const ITExpression& e) {
        bool hit = false;
        auto out = cache_get_or_fit(cache, e, X, y, cfg, rng, &hit);
        (hit ? result.cache_hits : result.cache_misses)++;
        return Member{std::move(out.expr), out.loss};
    };

    for (int i = 0; i < cfg.pop_size; ++i) pop.push_back(fit(it_random(cfg, n_features, rng)));

    auto best_loss = [&]() {
        double b = kInf;
        for (const auto& m : pop) b = std::min(b, m.loss);
        return b;
    };
    result.history.push_back(best_loss());

    std::vector<Member> pool;
    for (int gen = 0; gen < cfg.generations; ++gen) {
        pool = pop;
        for (const auto& m : pop) pool.push_back(fit(it_mutate(m.expr, cfg, rng)));
        std::vector<double> losses(pool.size());
        for (size_t i = 0; i < pool.size(); ++i) losses[i] = pool[i].loss;
        std::vector<Member> next;
        next.reserve(cfg.pop_size);
        for (int i = 0; i < cfg.pop_size; ++i)
            next.push_back(pool[select_tournament(losses, cfg.tournament_size, rng)]);
        pop = std::move(next);
        result.history.push_back(best_loss());
    }

    int best = 0;
    for (size_t i = 1; i < pop.size(); ++i)
        if (pop[i].loss < pop[best].loss) best = static_cast<int>(i);
    result.best = pop[best].expr;
    result.best_loss = pop[best].loss;
    return result;
}

} // namespace srlab
