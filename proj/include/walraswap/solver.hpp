// Equilibrium solver: finds a strictly positive price vector p with
// Phi(p) = 0 for the aggregate supply of a batch (orders plus AMM virtual
// agents). Strategies are pluggable; all of them measure progress by the
// same residual, max_i |psi_i(p)| at the sum-normalized price, which is the
// quantity a fixed point annihilates and stays finite on the boundary.
#pragma once

#include "walraswap/amm.hpp"
#include "walraswap/orders.hpp"
#include "walraswap/supply.hpp"

#include <optional>
#include <string>

namespace walraswap {

enum class Strategy { auto_pick, bisection2, rho_iteration, simplicial };

enum class SolveStatus {
    converged,
    no_equilibrium_bracket,  // 2-token sign search exhausted
    iteration_limit,
    mesh_limit,
    empty_problem,
    subproblem_failure,
};

const char* to_string(Strategy s);
const char* to_string(SolveStatus s);

struct SolverConfig {
    Strategy strategy = Strategy::auto_pick;
    double residual_tol = 1e-8;
    int max_iterations = 20000;
    double damping = 1.0;  // initial step for the damped fixed-point iteration
    std::optional<std::vector<double>> warm_start;
    int mesh_depth = 24;   // finest simplicial mesh is 2^-mesh_depth
    int hub_token = 0;
    bool use_decomposition = true;
    bool polish = true;    // Newton refinement of a localized root
};

// One batch order with enough metadata to rebuild or reindex it.
struct OrderSpec {
    enum class Kind { sell, buy };
    Kind kind = Kind::sell;
    int give_token = 0;  // supplied: sell_token of a sell, pay_token of a buy
    int get_token = 1;   // received: buy_token
    double amount = 0.0;
    double r1 = 0.0;     // rate band; sell: p_give/p_get, buy: p_get/p_give
    double r2 = 0.0;
    SupplyFunction supply;
};

OrderSpec make_sell(const LimitSellOrder& order, int n);
OrderSpec make_buy(const LimitBuyOrder& order, int n);

struct EquilibriumProblem {
    int n = 0;
    std::vector<OrderSpec> orders;
    AmmSystem amms;
    SupplyFunction order_aggregate;  // orders only; what the batch executes
    SupplyFunction aggregate;        // orders + virtual agents; what the solver roots

    static EquilibriumProblem build(int n, std::vector<OrderSpec> orders, AmmSystem amms);

    bool empty() const { return orders.empty() && amms.amms.empty(); }

    // Sufficient structural strictness condition: every token is the buy
    // side of some sell order. Fills `missing` with uncovered tokens.
    bool sell_cover(std::vector<int>* missing = nullptr) const;
};

// Per-token aggregate supply bounds, padded to stay positive where a token
// has no supply-side exposure.
std::vector<double> upper_bounds(const EquilibriumProblem& problem);

// The simplex self-map whose fixed points are the equilibria:
//   rho_i(q) = q_i (1 - phi_i(q/M) / M_i) = q_i - psi_i(q/M).
// Defined on the whole simplex through the value form.
std::vector<double> fixed_point_map(const SupplyFunction& aggregate,
                                    std::span<const double> bounds, std::span<const double> q);

// max_i |psi_i| at the sum-normalized price.
double residual_at(const SupplyFunction& aggregate, std::span<const double> p);

struct SubproblemRecord {
    std::vector<int> tokens;  // global token indices, hub included
    Strategy strategy_used = Strategy::auto_pick;
    SolveStatus status = SolveStatus::converged;
    double residual = 0.0;
    int iterations = 0;
};

struct EquilibriumResult {
    std::vector<double> price;  // normalized to coordinate sum 1
    double residual = 0.0;      // recomputed on the full aggregate at output
    int iterations = 0;
    Strategy strategy_used = Strategy::auto_pick;
    SolveStatus status = SolveStatus::converged;
    std::string message;
    std::vector<SubproblemRecord> subproblem_trace;
    int parallel_subsolves = 0;  // sub-solves run inside the parallel region

    bool ok() const { return status == SolveStatus::converged; }
};

EquilibriumResult solve_bisection2(const EquilibriumProblem& problem, const SolverConfig& config);
EquilibriumResult solve_rho_iteration(const EquilibriumProblem& problem, const SolverConfig& config);
EquilibriumResult solve_simplicial(const EquilibriumProblem& problem, const SolverConfig& config);

struct Decomposition {
    int hub = 0;
    std::vector<std::vector<int>> clusters;       // sorted global ids, hub included
    std::vector<EquilibriumProblem> subproblems;  // reindexed onto each cluster
};

// Token-graph split at the hub: connected components of the non-hub graph,
// each solvable independently with the hub price pinned.
Decomposition decompose(const EquilibriumProblem& problem, int hub_token);

// Dispatch: decompose, solve each cluster (2-token clusters by bisection
// under auto), merge, recompute the full residual, reject above tolerance.
EquilibriumResult solve(const EquilibriumProblem& problem, const SolverConfig& config);

}  // namespace walraswap
