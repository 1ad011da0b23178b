// Settlement at an equilibrium price: order fills, optimal AMM legs, and the
// per-token surplus the auctioneer keeps. The surplus is computed two
// independent ways -- straight from its definition over the executed legs,
// and from the per-AMM identity that holds only at a root of the aggregate
// -- and an outcome is certified only when both agree and no coordinate is
// negative beyond tolerance.
#pragma once

#include "walraswap/solver.hpp"

#include <string>
#include <vector>

namespace walraswap {

// s_i = phi_orders_i(p) - sum_{in(a)=i} x_a + sum_{out(b)=i} f_b(x_b).
// Virtual agents are excluded: they are a solver device, not a party.
std::vector<double> compute_surplus(const EquilibriumProblem& problem,
                                    std::span<const double> p, std::span<const double> x);

// s_i = sum_{out(c)=i} ( f_c(h_c(p_in/p_i)) - g_c(p_i/p_in) ), valid only at
// an equilibrium; throws if the residual at p exceeds residual_tol.
std::vector<double> surplus_via_theorem(const EquilibriumProblem& problem,
                                        std::span<const double> p, double residual_tol);

double total_value(std::span<const double> p, std::span<const double> s);

struct OptimalityReport {
    bool ok = true;
    int worst_amm = -1;
    double worst_gain = 0.0;  // best improvement found over v(p, x*)
    std::string detail;
};

// Checks that no per-AMM perturbation of the in-amounts improves the total
// surplus value: +-delta probes plus a coarse grid sweep per AMM (the
// objective is separable).
OptimalityReport verify_optimality(const EquilibriumProblem& problem, std::span<const double> p,
                                   std::span<const double> x_star, double delta,
                                   int grid_steps = 4000);

struct ClearingOutcome {
    std::vector<double> price;                       // normalized
    std::vector<std::vector<double>> order_fills;    // per order, n amounts
    std::vector<std::pair<double, double>> amm_legs; // per AMM (in, out)
    std::vector<double> surplus;                     // definitional
    std::vector<double> surplus_theorem;             // per-AMM identity path
    double total_value = 0.0;
    double residual = 0.0;
    bool certified = false;
    std::vector<int> negative_surplus_tokens;
    std::string failure_reason;
};

// Assembles the outcome at result.price and certifies it. A residual above
// tolerance or a negative surplus beyond surplus_tol fails certification;
// nothing is clipped.
ClearingOutcome settle(const EquilibriumProblem& problem, const EquilibriumResult& result,
                       double residual_tol = 1e-8, double surplus_tol = 1e-8);

}  // namespace walraswap
