#include "walraswap/solver.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace walraswap {

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::auto_pick: return "auto";
        case Strategy::bisection2: return "bisection2";
        case Strategy::rho_iteration: return "rho_iteration";
        case Strategy::simplicial: return "simplicial";
    }
    return "?";
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::converged: return "converged";
        case SolveStatus::no_equilibrium_bracket: return "no_equilibrium_bracket";
        case SolveStatus::iteration_limit: return "iteration_limit";
        case SolveStatus::mesh_limit: return "mesh_limit";
        case SolveStatus::empty_problem: return "empty_problem";
        case SolveStatus::subproblem_failure: return "subproblem_failure";
    }
    return "?";
}

OrderSpec make_sell(const LimitSellOrder& order, int n) {
    OrderSpec spec;
    spec.kind = OrderSpec::Kind::sell;
    spec.give_token = order.sell_token;
    spec.get_token = order.buy_token;
    spec.amount = order.amount;
    spec.r1 = order.r1;
    spec.r2 = order.r2;
    spec.supply = sell_order_supply(order, n);
    return spec;
}

OrderSpec make_buy(const LimitBuyOrder& order, int n) {
    OrderSpec spec;
    spec.kind = OrderSpec::Kind::buy;
    spec.give_token = order.pay_token;
    spec.get_token = order.buy_token;
    spec.amount = order.amount;
    spec.r1 = order.r1;
    spec.r2 = order.r2;
    spec.supply = buy_order_supply(order, n);
    return spec;
}

EquilibriumProblem EquilibriumProblem::build(int n, std::vector<OrderSpec> orders, AmmSystem amms) {
    if (n < 2) throw std::invalid_argument("problem: need n >= 2");
    EquilibriumProblem problem;
    problem.n = n;
    problem.orders = std::move(orders);
    problem.amms = std::move(amms);
    std::vector<std::shared_ptr<const SupplyAtom>> order_parts;
    for (const auto& spec : problem.orders) {
        if (spec.supply.tokens() != n)
            throw std::invalid_argument("problem: order supply token count mismatch");
        for (const auto& part : spec.supply.parts()) order_parts.push_back(part);
    }
    problem.order_aggregate = SupplyFunction(n, order_parts);
    problem.aggregate = sum(problem.order_aggregate, system_supply(problem.amms, n));
    return problem;
}

bool EquilibriumProblem::sell_cover(std::vector<int>* missing) const {
    std::vector<char> covered(n, 0);
    for (const auto& spec : orders)
        if (spec.kind == OrderSpec::Kind::sell) covered[spec.get_token] = 1;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
        if (!covered[i]) {
            ok = false;
            if (missing) missing->push_back(i);
        }
    }
    return ok;
}

std::vector<double> upper_bounds(const EquilibriumProblem& problem) {
    std::vector<double> bounds = problem.aggregate.upper_bounds();
    for (double& m : bounds)
        if (!(m > 0.0)) m = 1.0;  // tokens with no supply-side exposure
    return bounds;
}

std::vector<double> fixed_point_map(const SupplyFunction& aggregate,
                                    std::span<const double> bounds, std::span<const double> q) {
    const int n = aggregate.tokens();
    if ((int)q.size() != n || (int)bounds.size() != n)
        throw std::invalid_argument("fixed_point_map: size mismatch");
    std::vector<double> pm(n);
    for (int i = 0; i < n; ++i) pm[i] = q[i] / bounds[i];
    const auto psi = aggregate.value_form(pm);
    std::vector<double> rho(n);
    for (int i = 0; i < n; ++i) rho[i] = q[i] - psi[i];
    return rho;
}

double residual_at(const SupplyFunction& aggregate, std::span<const double> p) {
    const auto pn = normalize_sum1(p);
    const auto psi = aggregate.value_form(pn);
    double res = 0.0;
    for (double v : psi) res = std::max(res, std::abs(v));
    return res;
}

namespace {

std::vector<double> default_warm(const EquilibriumProblem& problem, const SolverConfig& config) {
    if (config.warm_start) {
        const auto& w = *config.warm_start;
        if ((int)w.size() != problem.n)
            throw std::invalid_argument("warm start size mismatch");
        if (!is_interior(w)) throw std::invalid_argument("warm start must be strictly positive");
        return normalize_sum1(w);
    }
    return std::vector<double>(problem.n, 1.0 / problem.n);
}

EquilibriumResult result_at(const EquilibriumProblem& problem, std::span<const double> p,
                            Strategy used, SolveStatus status, int iterations,
                            std::string message = {}) {
    EquilibriumResult r;
    r.price = normalize_sum1(p);
    r.residual = residual_at(problem.aggregate, r.price);
    r.iterations = iterations;
    r.strategy_used = used;
    r.status = status;
    r.message = std::move(message);
    return r;
}

// ---- Newton refinement of a localized root -------------------------------
//
// Log-rate parameterization with the last price pinned; the value form at
// the normalized price is the residual vector. Walras's law makes the last
// component dependent, so n-1 equations in n-1 unknowns.

struct PolishOutcome {
    std::vector<double> price;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

bool solve_dense(std::vector<double>& a, std::vector<double>& rhs, int m) {
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int row = col + 1; row < m; ++row)
            if (std::abs(a[row * m + col]) > std::abs(a[piv * m + col])) piv = row;
        if (std::abs(a[piv * m + col]) < 1e-300) return false;
        if (piv != col) {
            for (int k = 0; k < m; ++k) std::swap(a[col * m + k], a[piv * m + k]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (int row = col + 1; row < m; ++row) {
            const double f = a[row * m + col] / a[col * m + col];
            for (int k = col; k < m; ++k) a[row * m + k] -= f * a[col * m + k];
            rhs[row] -= f * rhs[col];
        }
    }
    for (int col = m - 1; col >= 0; --col) {
        double s = rhs[col];
        for (int k = col + 1; k < m; ++k) s -= a[col * m + k] * rhs[k];
        rhs[col] = s / a[col * m + col];
    }
    return true;
}

PolishOutcome polish_root(const SupplyFunction& aggregate, std::span<const double> start,
                          double target, int max_steps = 50) {
    const int n = aggregate.tokens();
    const int m = n - 1;
    double pmax = 0.0;
    for (double x : start) pmax = std::max(pmax, x);
    std::vector<double> p(start.begin(), start.end());
    for (double& x : p) x = std::max(x, 1e-12 * pmax);

    std::vector<double> u(m);
    for (int i = 0; i < m; ++i) u[i] = std::log(p[i] / p[n - 1]);

    auto eval = [&](const std::vector<double>& uu, std::vector<double>& pn,
                    std::vector<double>& psi) -> double {
        std::vector<double> pp(n);
        pp[n - 1] = 1.0;
        for (int i = 0; i < m; ++i) pp[i] = std::exp(std::clamp(uu[i], -300.0, 300.0));
        pn = normalize_sum1(pp);
        psi = aggregate.value_form(pn);
        double res = 0.0;
        for (double v : psi) res = std::max(res, std::abs(v));
        return res;
    };

    PolishOutcome best;
    std::vector<double> pn, psi;
    double res = eval(u, pn, psi);
    best.price = pn;
    best.residual = res;

    const double fd_step = 1e-7;
    for (int step = 0; step < max_steps && res > target; ++step) {
        // forward-difference Jacobian of the first m residual components
        std::vector<double> jac(m * m);
        std::vector<double> pn_d, psi_d;
        for (int j = 0; j < m; ++j) {
            auto ud = u;
            ud[j] += fd_step;
            eval(ud, pn_d, psi_d);
            for (int i = 0; i < m; ++i) jac[i * m + j] = (psi_d[i] - psi[i]) / fd_step;
        }
        std::vector<double> dir(m);
        for (int i = 0; i < m; ++i) dir[i] = -psi[i];
        double mu = 0.0;
        bool solved = false;
        for (int attempt = 0; attempt < 4 && !solved; ++attempt) {
            auto a = jac;
            if (mu > 0.0)
                for (int i = 0; i < m; ++i) a[i * m + i] += mu;
            auto rhs = dir;
            if (solve_dense(a, rhs, m)) {
                dir = rhs;
                solved = true;
            } else {
                double scale = 0.0;
                for (double v : jac) scale = std::max(scale, std::abs(v));
                mu = (mu == 0.0) ? std::max(1e-10 * scale, 1e-300) : mu * 100.0;
            }
        }
        if (!solved) break;
        double dmax = 0.0;
        for (double v : dir) dmax = std::max(dmax, std::abs(v));
        if (dmax > 5.0)
            for (double& v : dir) v *= 5.0 / dmax;  // trust region in log space

        bool accepted = false;
        for (double lambda = 1.0; lambda >= 1.0 / 64; lambda *= 0.5) {
            auto ut = u;
            for (int i = 0; i < m; ++i) ut[i] += lambda * dir[i];
            std::vector<double> pn_t, psi_t;
            const double rt = eval(ut, pn_t, psi_t);
            if (rt < res) {
                u = std::move(ut);
                pn = std::move(pn_t);
                psi = std::move(psi_t);
                res = rt;
                accepted = true;
                break;
            }
        }
        ++best.iterations;
        if (res < best.residual) {
            best.residual = res;
            best.price = pn;
        }
        if (!accepted) break;
    }
    return best;
}

void maybe_polish(const EquilibriumProblem& problem, const SolverConfig& config,
                  EquilibriumResult& result) {
    if (!config.polish || result.price.empty()) return;
    if (result.status == SolveStatus::converged) return;
    const double target = config.residual_tol * 1e-4;
    if (result.residual <= target) return;
    auto polished = polish_root(problem.aggregate, result.price, target);
    if (polished.residual < result.residual) {
        result.price = normalize_sum1(polished.price);
        result.residual = polished.residual;
        result.iterations += polished.iterations;
        if (result.residual <= config.residual_tol &&
            (result.status == SolveStatus::iteration_limit ||
             result.status == SolveStatus::mesh_limit))
            result.status = SolveStatus::converged;
    }
}

}  // namespace

// ---- two-token bisection --------------------------------------------------

EquilibriumResult solve_bisection2(const EquilibriumProblem& problem, const SolverConfig& config) {
    if (problem.n != 2)
        throw std::invalid_argument("solve_bisection2: problem must have exactly two tokens");
    const auto& phi = problem.aggregate;
    const double tol = config.residual_tol;

    auto psi1 = [&phi](double r) {
        const double pr[2] = {r, 1.0};
        return phi.value_form(std::span<const double>(pr, 2))[0];
    };
    auto res_of = [&psi1](double r) { return std::abs(psi1(r)) / (1.0 + r); };

    const auto warm = default_warm(problem, config);
    double r0 = warm[0] / warm[1];
    int evals = 1;
    double s0 = psi1(r0);
    if (std::abs(s0) / (1.0 + r0) <= tol) {
        const double pr[2] = {r0, 1.0};
        return result_at(problem, std::span<const double>(pr, 2), Strategy::bisection2,
                         SolveStatus::converged, evals);
    }

    // bracket by geometric expansion: psi_1 < 0 on the cheap side of the
    // root and > 0 on the expensive side
    double lo = 0.0, hi = 0.0;
    bool bracketed = false;
    if (s0 > 0.0) {
        hi = r0;
        double r = r0;
        for (int k = 0; k < 64; ++k) {
            r *= 0.5;
            ++evals;
            if (psi1(r) < 0.0) {
                lo = r;
                bracketed = true;
                break;
            }
            hi = r;
        }
    } else {
        lo = r0;
        double r = r0;
        for (int k = 0; k < 64; ++k) {
            r *= 2.0;
            ++evals;
            if (psi1(r) > 0.0) {
                hi = r;
                bracketed = true;
                break;
            }
            lo = r;
        }
    }
    if (!bracketed) {
        auto result = result_at(problem, warm, Strategy::bisection2,
                                SolveStatus::no_equilibrium_bracket, evals,
                                "no sign change of psi_1 within 64 doublings; "
                                "aggregate is likely not strict");
        return result;
    }

    double best_r = s0 > 0.0 ? hi : lo;
    double best_res = res_of(best_r);
    const int max_it = std::max(config.max_iterations, 200);
    for (int it = 0; it < max_it; ++it) {
        const double mid = std::sqrt(lo * hi);
        ++evals;
        const double s = psi1(mid);
        const double res = std::abs(s) / (1.0 + mid);
        if (res < best_res) {
            best_res = res;
            best_r = mid;
        }
        if (res <= tol) break;
        if (s < 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-16 * hi) break;
    }
    const double pr[2] = {best_r, 1.0};
    auto result = result_at(problem, std::span<const double>(pr, 2), Strategy::bisection2,
                            best_res <= tol ? SolveStatus::converged : SolveStatus::iteration_limit,
                            evals);
    if (result.status != SolveStatus::converged) maybe_polish(problem, config, result);
    return result;
}

// ---- damped fixed-point iteration ------------------------------------------

EquilibriumResult solve_rho_iteration(const EquilibriumProblem& problem,
                                      const SolverConfig& config) {
    const int n = problem.n;
    const auto bounds = upper_bounds(problem);
    const double tol = config.residual_tol;

    const auto warm = default_warm(problem, config);
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = warm[i] * bounds[i];
    q = normalize_sum1(q);

    double alpha = std::clamp(config.damping, 1e-12, 1.0);
    double best_res = std::numeric_limits<double>::infinity();
    std::vector<double> best_q = q;
    int last_improve = 0;
    int it = 0;
    for (; it < config.max_iterations; ++it) {
        std::vector<double> pm(n);
        double pm_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            pm[i] = q[i] / bounds[i];
            pm_sum += pm[i];
        }
        const auto psi = problem.aggregate.value_form(pm);
        double res = 0.0;
        for (double v : psi) res = std::max(res, std::abs(v));
        res /= pm_sum;  // residual at the sum-normalized price

        if (res < best_res * (1.0 - 1e-3)) last_improve = it;
        if (res < best_res) {
            best_res = res;
            best_q = q;
        }
        if (res <= tol) break;
        if (it - last_improve > 40) {
            alpha *= 0.5;
            last_improve = it;
            if (alpha < 1e-14) break;  // stalled
        }
        for (int i = 0; i < n; ++i) q[i] = std::max(q[i] - alpha * psi[i], 0.0);
        q = normalize_sum1(q);
    }

    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = best_q[i] / bounds[i];
    auto result = result_at(problem, p, Strategy::rho_iteration,
                            best_res <= tol ? SolveStatus::converged : SolveStatus::iteration_limit,
                            it, best_res <= tol ? "" : "iteration limit; best iterate attached");
    maybe_polish(problem, config, result);
    if (result.status == SolveStatus::converged) result.message.clear();
    return result;
}

// ---- simplicial search ------------------------------------------------------

namespace {

struct VertexKey {
    std::string bytes;
    bool operator==(const VertexKey& other) const { return bytes == other.bytes; }
};
struct VertexKeyHash {
    size_t operator()(const VertexKey& k) const { return std::hash<std::string>()(k.bytes); }
};

VertexKey key_of(const std::vector<int>& y) {
    VertexKey k;
    k.bytes.assign(reinterpret_cast<const char*>(y.data()), y.size() * sizeof(int));
    return k;
}

class SimplicialLevel {
public:
    SimplicialLevel(const SupplyFunction& aggregate, std::span<const double> bounds, long mesh)
        : aggregate_(aggregate), bounds_(bounds), mesh_(mesh), n_(aggregate.tokens()) {}

    long labels_used() const { return labels_used_; }

    // smallest index with y_i > 0 and psi_i >= 0; falls back to the largest
    // psi on the support when rounding leaves none
    int label(const std::vector<int>& y) {
        auto key = key_of(y);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        ++labels_used_;
        std::vector<double> pm(n_);
        for (int i = 0; i < n_; ++i) pm[i] = (double)y[i] / (double)mesh_ / bounds_[i];
        const auto psi = aggregate_.value_form(pm);
        int lab = -1;
        for (int i = 0; i < n_; ++i) {
            if (y[i] > 0 && psi[i] >= 0.0) {
                lab = i;
                break;
            }
        }
        if (lab < 0) {
            double best = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < n_; ++i) {
                if (y[i] > 0 && psi[i] > best) {
                    best = psi[i];
                    lab = i;
                }
            }
        }
        memo_.emplace(std::move(key), lab);
        return lab;
    }

    // Search cells whose base lies within L-inf radius (prev_r, r] of the
    // center; returns the barycenter of the first completely labeled cell.
    bool search_ring(const std::vector<int>& center, long prev_r, long r, long budget,
                     std::vector<double>& barycenter) {
        std::vector<int> base(n_, 0);
        return recurse(center, prev_r, r, budget, 0, 0L, base, barycenter);
    }

private:
    bool recurse(const std::vector<int>& center, long prev_r, long r, long budget, int dim,
                 long acc, std::vector<int>& base, std::vector<double>& barycenter) {
        if (labels_used_ > budget) return false;
        if (dim == n_ - 1) {
            const long last = mesh_ - acc;
            if (last < 0) return false;
            if (std::abs(last - (long)center[n_ - 1]) > r) return false;
            base[n_ - 1] = (int)last;
            long dist = 0;
            for (int i = 0; i < n_; ++i) dist = std::max(dist, std::abs((long)base[i] - center[i]));
            if (dist <= prev_r || dist > r) return false;  // outside this ring
            return try_cells(base, barycenter);
        }
        const long lo = std::max(0L, (long)center[dim] - r);
        const long hi = std::min(mesh_, (long)center[dim] + r);
        for (long v = lo; v <= hi; ++v) {
            if (acc + v > mesh_) break;
            base[dim] = (int)v;
            if (recurse(center, prev_r, r, budget, dim + 1, acc + v, base, barycenter)) return true;
        }
        return false;
    }

    bool try_cells(const std::vector<int>& base, std::vector<double>& barycenter) {
        std::vector<int> perm(n_ - 1);
        std::iota(perm.begin(), perm.end(), 0);
        do {
            std::vector<std::vector<int>> verts;
            verts.reserve(n_);
            verts.push_back(base);
            bool valid = true;
            for (int k = 0; k < n_ - 1 && valid; ++k) {
                auto v = verts.back();
                v[perm[k]] += 1;
                v[perm[k] + 1] -= 1;
                if (v[perm[k] + 1] < 0) {
                    valid = false;
                    break;
                }
                verts.push_back(std::move(v));
            }
            if (!valid) continue;
            std::vector<char> seen(n_, 0);
            bool complete = true;
            for (const auto& v : verts) {
                const int lab = label(v);
                if (lab < 0 || seen[lab]) {
                    complete = false;
                    break;
                }
                seen[lab] = 1;
            }
            if (complete) {
                barycenter.assign(n_, 0.0);
                for (const auto& v : verts)
                    for (int i = 0; i < n_; ++i) barycenter[i] += v[i];
                for (double& x : barycenter) x /= (double)n_ * (double)mesh_;
                return true;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return false;
    }

    const SupplyFunction& aggregate_;
    std::span<const double> bounds_;
    long mesh_;
    int n_;
    long labels_used_ = 0;
    std::unordered_map<VertexKey, int, VertexKeyHash> memo_;
};

std::vector<int> center_on_mesh(std::span<const double> q, long mesh) {
    const int n = (int)q.size();
    std::vector<int> c(n);
    long total = 0;
    for (int i = 0; i < n; ++i) {
        c[i] = (int)std::llround(q[i] * (double)mesh);
        total += c[i];
    }
    // fix rounding drift so the center sits on the mesh simplex
    int i = 0;
    while (total != mesh) {
        if (total < mesh) {
            ++c[i % n];
            ++total;
        } else if (c[i % n] > 0) {
            --c[i % n];
            --total;
        }
        ++i;
    }
    return c;
}

}  // namespace

EquilibriumResult solve_simplicial(const EquilibriumProblem& problem, const SolverConfig& config) {
    const int n = problem.n;
    const auto bounds = upper_bounds(problem);
    const double tol = config.residual_tol;
    if (config.mesh_depth < 1) throw std::invalid_argument("solve_simplicial: mesh_depth must be >= 1");

    const auto warm = default_warm(problem, config);
    double res0 = residual_at(problem.aggregate, warm);
    int iterations = 0;
    if (res0 <= tol)
        return result_at(problem, warm, Strategy::simplicial, SolveStatus::converged, 0);

    std::vector<double> q_center(n);
    for (int i = 0; i < n; ++i) q_center[i] = warm[i] * bounds[i];
    q_center = normalize_sum1(q_center);

    std::vector<double> best_p = warm;
    double best_res = res0;
    constexpr long kLabelBudget = 200000;

    long mesh = 1L << std::min(config.mesh_depth, 3);
    bool localized = false;
    while (true) {
        SimplicialLevel level(problem.aggregate, bounds, mesh);
        auto c = center_on_mesh(q_center, mesh);
        std::vector<double> barycenter;
        bool found = false;
        long prev_r = -1;
        for (long r = 4; !found; r = std::min(r * 4, mesh + 1)) {
            found = level.search_ring(c, prev_r, r, kLabelBudget, barycenter);
            if (level.labels_used() > kLabelBudget) break;
            if (r > mesh) break;  // whole simplex swept
            prev_r = r;
        }
        iterations += (int)level.labels_used();
        if (!found) break;

        localized = true;
        std::vector<double> p(n);
        for (int i = 0; i < n; ++i) p[i] = barycenter[i] / bounds[i];
        double res = residual_at(problem.aggregate, p);
        if (res < best_res) {
            best_res = res;
            best_p = normalize_sum1(p);
        }
        if (config.polish && best_res > tol) {
            auto polished = polish_root(problem.aggregate, best_p, tol * 1e-4);
            iterations += polished.iterations;
            if (polished.residual < best_res) {
                best_res = polished.residual;
                best_p = normalize_sum1(polished.price);
            }
        }
        if (best_res <= tol) break;
        q_center = barycenter;
        if (mesh >= (1L << config.mesh_depth)) break;
        mesh *= 2;
    }

    auto result = result_at(problem, best_p, Strategy::simplicial,
                            best_res <= tol ? SolveStatus::converged : SolveStatus::mesh_limit,
                            iterations);
    if (result.status == SolveStatus::mesh_limit)
        result.message = localized ? "mesh depth exhausted; best cell attached"
                                   : "no completely labeled cell within budget";
    return result;
}

// ---- decomposition ----------------------------------------------------------

namespace {

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

Decomposition decompose(const EquilibriumProblem& problem, int hub_token) {
    const int n = problem.n;
    if (hub_token < 0 || hub_token >= n) throw std::invalid_argument("decompose: bad hub token");

    DisjointSet dsu(n);
    auto link = [&](std::span<const int> tokens) {
        int prev = -1;
        for (int t : tokens) {
            if (t == hub_token) continue;
            if (prev >= 0) dsu.unite(prev, t);
            prev = t;
        }
    };
    for (const auto& spec : problem.orders) {
        const int pair[2] = {spec.give_token, spec.get_token};
        link(pair);
    }
    for (const auto& amm : problem.amms.amms) {
        const int pair[2] = {amm.in_token, amm.out_token};
        link(pair);
    }

    std::vector<std::vector<int>> groups(n);
    for (int t = 0; t < n; ++t)
        if (t != hub_token) groups[dsu.find(t)].push_back(t);

    Decomposition dec;
    dec.hub = hub_token;
    for (int root = 0; root < n; ++root) {
        if (groups[root].empty()) continue;
        std::vector<int> cluster = groups[root];
        cluster.push_back(hub_token);
        std::sort(cluster.begin(), cluster.end());
        dec.clusters.push_back(std::move(cluster));
    }
    std::sort(dec.clusters.begin(), dec.clusters.end());

    for (const auto& cluster : dec.clusters) {
        std::vector<int> local(n, -1);
        for (size_t j = 0; j < cluster.size(); ++j) local[cluster[j]] = (int)j;
        const int m = (int)cluster.size();

        std::vector<OrderSpec> orders;
        for (const auto& spec : problem.orders) {
            if (local[spec.give_token] < 0 || local[spec.get_token] < 0) continue;
            if (spec.kind == OrderSpec::Kind::sell) {
                orders.push_back(make_sell(
                    LimitSellOrder{local[spec.give_token], local[spec.get_token], spec.amount,
                                   spec.r1, spec.r2},
                    m));
            } else {
                orders.push_back(make_buy(
                    LimitBuyOrder{local[spec.get_token], local[spec.give_token], spec.amount,
                                  spec.r1, spec.r2},
                    m));
            }
        }
        AmmSystem amms;
        for (const auto& amm : problem.amms.amms)
            if (local[amm.in_token] >= 0 && local[amm.out_token] >= 0)
                amms.amms.push_back(Amm{local[amm.in_token], local[amm.out_token], amm.curve});
        dec.subproblems.push_back(EquilibriumProblem::build(m, std::move(orders), std::move(amms)));
    }
    return dec;
}

// ---- dispatch ----------------------------------------------------------------

namespace {

EquilibriumResult run_strategy(const EquilibriumProblem& problem, const SolverConfig& config) {
    // trivial sub-systems and exact warm starts short-circuit every strategy
    const auto warm = default_warm(problem, config);
    if (residual_at(problem.aggregate, warm) <= config.residual_tol) {
        EquilibriumResult r;
        r.price = warm;
        r.residual = residual_at(problem.aggregate, warm);
        r.strategy_used = config.strategy;
        r.status = SolveStatus::converged;
        return r;
    }
    switch (config.strategy) {
        case Strategy::bisection2:
            return solve_bisection2(problem, config);
        case Strategy::rho_iteration:
            return solve_rho_iteration(problem, config);
        case Strategy::simplicial:
            return solve_simplicial(problem, config);
        case Strategy::auto_pick: {
            if (problem.n == 2) return solve_bisection2(problem, config);
            auto first = solve_rho_iteration(problem, config);
            if (first.ok()) return first;
            auto fallback_config = config;
            fallback_config.warm_start = first.price;
            auto second = solve_simplicial(problem, fallback_config);
            second.iterations += first.iterations;
            return second.residual < first.residual ? second : first;
        }
    }
    throw std::logic_error("run_strategy: unknown strategy");
}

}  // namespace

EquilibriumResult solve(const EquilibriumProblem& problem, const SolverConfig& config) {
    EquilibriumResult result;
    if (problem.empty()) {
        result.status = SolveStatus::empty_problem;
        result.message = "empty batch: no orders and no AMMs";
        result.price.assign(problem.n > 0 ? problem.n : 0, problem.n > 0 ? 1.0 / problem.n : 0.0);
        return result;
    }

    const auto warm = default_warm(problem, config);
    const double warm_res = residual_at(problem.aggregate, warm);
    if (warm_res <= config.residual_tol) {
        result.price = warm;
        result.residual = warm_res;
        result.strategy_used = config.strategy;
        result.status = SolveStatus::converged;
        return result;
    }

    if (!config.use_decomposition) {
        result = run_strategy(problem, config);
        result.residual = residual_at(problem.aggregate, result.price);
        SubproblemRecord rec;
        rec.tokens.resize(problem.n);
        std::iota(rec.tokens.begin(), rec.tokens.end(), 0);
        rec.strategy_used = result.strategy_used;
        rec.status = result.status;
        rec.residual = result.residual;
        rec.iterations = result.iterations;
        result.subproblem_trace.push_back(std::move(rec));
        if (result.ok() && result.residual > config.residual_tol) {
            result.status = SolveStatus::iteration_limit;
            result.message = "residual above tolerance after recomputation";
        }
        return result;
    }

    auto dec = decompose(problem, config.hub_token);
    const int k = (int)dec.clusters.size();

    std::vector<SolverConfig> sub_configs(k, config);
    for (int c = 0; c < k; ++c) {
        std::vector<double> w;
        for (int t : dec.clusters[c]) w.push_back(warm[t]);
        sub_configs[c].warm_start = normalize_sum1(w);
        sub_configs[c].use_decomposition = false;
    }

    std::vector<EquilibriumResult> sub_results(k);
    int parallel_count = 0;
    if (k == 1) {
        sub_results[0] = run_strategy(dec.subproblems[0], sub_configs[0]);
    } else {
#pragma omp parallel for schedule(dynamic) reduction(+ : parallel_count)
        for (int c = 0; c < k; ++c) {
            try {
                sub_results[c] = run_strategy(dec.subproblems[c], sub_configs[c]);
            } catch (const std::exception& e) {
                sub_results[c].status = SolveStatus::subproblem_failure;
                sub_results[c].message = e.what();
            }
            if (omp_in_parallel()) ++parallel_count;
        }
    }

    // merge: pin the hub price to 1 in every cluster, then renormalize
    std::vector<double> price(problem.n, 1.0);
    bool all_ok = true;
    std::ostringstream failures;
    int total_iterations = 0;
    for (int c = 0; c < k; ++c) {
        const auto& cluster = dec.clusters[c];
        const auto& sub = sub_results[c];
        total_iterations += sub.iterations;

        SubproblemRecord rec;
        rec.tokens = cluster;
        rec.strategy_used = sub.strategy_used;
        rec.status = sub.status;
        rec.residual = sub.residual;
        rec.iterations = sub.iterations;
        result.subproblem_trace.push_back(std::move(rec));

        const int hub_pos =
            (int)(std::find(cluster.begin(), cluster.end(), dec.hub) - cluster.begin());
        if (!sub.ok() || sub.price.empty() || !(sub.price[hub_pos] > 0.0)) {
            all_ok = false;
            failures << " cluster{";
            for (size_t j = 0; j < cluster.size(); ++j)
                failures << (j ? "," : "") << cluster[j] + 1;
            failures << "}:" << to_string(sub.status);
            continue;
        }
        const double scale = 1.0 / sub.price[hub_pos];
        for (size_t j = 0; j < cluster.size(); ++j)
            if (cluster[j] != dec.hub) price[cluster[j]] = sub.price[j] * scale;
    }

    result.price = normalize_sum1(price);
    result.residual = residual_at(problem.aggregate, result.price);
    result.iterations = total_iterations;
    result.strategy_used = k == 1 ? sub_results[0].strategy_used : config.strategy;
    result.parallel_subsolves = parallel_count;
    if (!all_ok) {
        result.status = SolveStatus::subproblem_failure;
        result.message = "failed sub-problems:" + failures.str();
    } else if (result.residual > config.residual_tol) {
        result.status = SolveStatus::iteration_limit;
        result.message = "full residual above tolerance after merge";
    } else {
        result.status = SolveStatus::converged;
    }
    return result;
}

}  // namespace walraswap
