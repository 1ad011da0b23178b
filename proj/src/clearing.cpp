#include "walraswap/clearing.hpp"

#include "walraswap/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace walraswap {

std::vector<double> compute_surplus(const EquilibriumProblem& problem,
                                    std::span<const double> p, std::span<const double> x) {
    if ((int)p.size() != problem.n) throw std::invalid_argument("compute_surplus: price size");
    if (x.size() != problem.amms.amms.size())
        throw std::invalid_argument("compute_surplus: in-amount count mismatch");
    for (double v : x)
        if (v < 0.0) throw std::domain_error("compute_surplus: negative in-amount");

    std::vector<double> s = problem.order_aggregate.evaluate(p);
    for (size_t c = 0; c < x.size(); ++c) {
        const auto& amm = problem.amms.amms[c];
        s[amm.in_token] -= x[c];
        s[amm.out_token] += amm.curve->out_for_in(x[c]);
    }
    return s;
}

std::vector<double> surplus_via_theorem(const EquilibriumProblem& problem,
                                        std::span<const double> p, double residual_tol) {
    const double res = residual_at(problem.aggregate, p);
    if (res > residual_tol) {
        std::ostringstream os;
        os << "surplus_via_theorem: price is not an equilibrium (residual " << res << ")";
        throw std::domain_error(os.str());
    }
    std::vector<double> s(problem.n, 0.0);
    for (const auto& amm : problem.amms.amms) {
        const double r = p[amm.in_token] / p[amm.out_token];
        const double h = amm.curve->in_to_reach_rate(r);
        const double term = amm.curve->out_for_in(h) - out_supply(*amm.curve, 1.0 / r);
        s[amm.out_token] += term;
    }
    return s;
}

double total_value(std::span<const double> p, std::span<const double> s) {
    if (p.size() != s.size()) throw std::invalid_argument("total_value: size mismatch");
    double v = 0.0;
    for (size_t i = 0; i < p.size(); ++i) v += p[i] * s[i];
    return v;
}

OptimalityReport verify_optimality(const EquilibriumProblem& problem, std::span<const double> p,
                                   std::span<const double> x_star, double delta,
                                   int grid_steps) {
    if (!(delta > 0.0)) throw std::invalid_argument("verify_optimality: delta must be positive");
    OptimalityReport report;
    // v is separable: check each AMM's contribution -p_in x + p_out f(x)
    for (size_t c = 0; c < problem.amms.amms.size(); ++c) {
        const auto& amm = problem.amms.amms[c];
        const double rate_in = p[amm.in_token];
        const double rate_out = p[amm.out_token];
        auto value = [&](double x) { return -rate_in * x + rate_out * amm.curve->out_for_in(x); };
        const double v_star = value(x_star[c]);

        double gain = value(x_star[c] + delta) - v_star;
        if (x_star[c] - delta >= 0.0)
            gain = std::max(gain, value(x_star[c] - delta) - v_star);

        const double x_max = std::max(4.0 * x_star[c], amm.curve->in_to_reach_rate(
                                                           0.125 * rate_in / rate_out)) +
                             delta;
        const auto grid = objective_grid_max(*amm.curve, rate_in, rate_out, x_max, grid_steps,
                                             Exec::parallel);
        gain = std::max(gain, grid.best_value - v_star);

        if (gain > report.worst_gain) {
            report.worst_gain = gain;
            report.worst_amm = (int)c;
        }
        if (gain > 1e-12) {
            report.ok = false;
            if (report.detail.empty()) {
                std::ostringstream os;
                os << "AMM " << c + 1 << ": value improves by " << gain
                   << " away from the optimal in-amount (curve inconsistency)";
                report.detail = os.str();
            }
        }
    }
    return report;
}

ClearingOutcome settle(const EquilibriumProblem& problem, const EquilibriumResult& result,
                       double residual_tol, double surplus_tol) {
    ClearingOutcome outcome;
    if ((int)result.price.size() != problem.n)
        throw std::invalid_argument("settle: result price size mismatch");
    outcome.price = normalize_sum1(result.price);
    const auto& p = outcome.price;
    outcome.residual = residual_at(problem.aggregate, p);

    for (const auto& spec : problem.orders)
        outcome.order_fills.push_back(spec.supply.evaluate(p));

    const auto x = in_amounts(problem.amms, p);
    for (size_t c = 0; c < x.size(); ++c)
        outcome.amm_legs.emplace_back(x[c], problem.amms.amms[c].curve->out_for_in(x[c]));

    outcome.surplus = compute_surplus(problem, p, x);
    outcome.total_value = total_value(p, outcome.surplus);

    for (int i = 0; i < problem.n; ++i)
        if (outcome.surplus[i] < -surplus_tol) outcome.negative_surplus_tokens.push_back(i);

    if (outcome.residual > residual_tol) {
        outcome.certified = false;
        std::ostringstream os;
        os << "residual " << outcome.residual << " above tolerance " << residual_tol;
        if (!outcome.negative_surplus_tokens.empty()) {
            os << "; negative surplus at token(s)";
            for (int t : outcome.negative_surplus_tokens) os << " " << t + 1;
        }
        outcome.failure_reason = os.str();
        return outcome;
    }

    outcome.surplus_theorem = surplus_via_theorem(problem, p, residual_tol);

    // dual-path agreement, scaled by how far from an exact root we are
    double bound_scale = 0.0;
    for (double m : upper_bounds(problem)) bound_scale = std::max(bound_scale, m);
    const double agree_tol =
        std::max(surplus_tol, 10.0 * outcome.residual * problem.n * bound_scale);
    double worst_gap = 0.0;
    for (int i = 0; i < problem.n; ++i)
        worst_gap = std::max(worst_gap,
                             std::abs(outcome.surplus[i] - outcome.surplus_theorem[i]));

    if (!outcome.negative_surplus_tokens.empty()) {
        std::ostringstream os;
        os << "negative surplus at token(s)";
        for (int t : outcome.negative_surplus_tokens) os << " " << t + 1;
        outcome.failure_reason = os.str();
        outcome.certified = false;
    } else if (worst_gap > agree_tol) {
        std::ostringstream os;
        os << "surplus paths disagree by " << worst_gap << " (tolerance " << agree_tol << ")";
        outcome.failure_reason = os.str();
        outcome.certified = false;
    } else {
        outcome.certified = true;
    }
    return outcome;
}

}  // namespace walraswap
