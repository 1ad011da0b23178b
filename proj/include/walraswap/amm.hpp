// One-directional AMM return curves and their virtual-agent supply
// functions.
//
// A curve maps an in-amount x of the input token to the out-amount f(x) it
// returns: increasing, f(0) = 0, bounded by M = sup f, concave (strictly so
// below M), with a finite initial marginal rate. Two derived maps carry the
// whole equilibrium story:
//
//   in_to_reach_rate(r)  -- smallest x whose marginal rate has dropped to r;
//                           the optimal swap size when the out-token trades
//                           at rate r against the in-token.
//   out_supply(r)        -- in_to_reach_rate(1/r) / r; the out-token amount
//                           the AMM effectively supplies when the out-token's
//                           relative price is r. Feeds the virtual agent.
//
// A real two-sided pool is modelled as two curves, one per direction.
#pragma once

#include "walraswap/supply.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace walraswap {

class AmmCurve {
public:
    virtual ~AmmCurve() = default;

    virtual double out_for_in(double in) const = 0;       // f(x), x >= 0
    virtual double marginal_rate(double in) const = 0;    // right derivative
    virtual double max_out() const = 0;                   // M = sup f

    double spot_rate() const { return marginal_rate(0.0); }

    // min { x >= 0 : marginal_rate(x) <= rate }. The default bisects the
    // marginal rate; concrete curves override with closed forms.
    virtual double in_to_reach_rate(double rate) const;
};

// Generic bisection on the (nonincreasing, right-continuous) marginal rate;
// kept public as the reference path the closed forms are checked against.
double bisect_in_to_reach_rate(const AmmCurve& amm, double rate);

// Supply of the out-token against its relative price r = p_out / p_in.
// Continuous, 0 at 0, -> 0 at infinity, bounded by max_out().
double out_supply(const AmmCurve& amm, double r);

// f(x) = b*k*x / (a + k*x) with k the kept input fraction (1 - fee).
class ConstantProductCurve final : public AmmCurve {
public:
    ConstantProductCurve(double reserve_in, double reserve_out, double fee_keep = 1.0);

    double out_for_in(double in) const override;
    double marginal_rate(double in) const override;
    double max_out() const override { return b_; }
    double in_to_reach_rate(double rate) const override;

    double reserve_in() const { return a_; }
    double reserve_out() const { return b_; }
    double fee_keep() const { return keep_; }

private:
    double a_, b_, keep_;
};

// Piecewise curve: constant-product arcs and linear arcs glued value-
// continuously over consecutive in-amount ranges, tick-style. The fee is
// taken on the input before the curve applies. Construction only enforces
// what it must to define f (positive widths and parameters, boundedness);
// concavity across breakpoints is validate_amm's job, so defective curves
// can be represented and reported.
struct CpArc {
    double a = 0.0;  // local virtual reserves
    double b = 0.0;
};
struct LinearArc {
    double slope = 0.0;
};
struct AmmSegment {
    double width = 0.0;  // in-amount extent; infinity allowed on the last
    std::variant<CpArc, LinearArc> shape;
};

class PiecewiseCurve final : public AmmCurve {
public:
    PiecewiseCurve(std::vector<AmmSegment> segments, double fee_keep = 1.0);

    double out_for_in(double in) const override;
    double marginal_rate(double in) const override;
    double max_out() const override { return max_out_; }
    double in_to_reach_rate(double rate) const override;

    const std::vector<AmmSegment>& segments() const { return segments_; }

private:
    int segment_at(double u) const;

    std::vector<AmmSegment> segments_;
    std::vector<double> start_u_;      // cumulative in-amount at segment start
    std::vector<double> start_value_;  // f at segment start (pre-fee space)
    double keep_;
    double max_out_;
};

// One-directional AMM bound to its token pair.
struct Amm {
    int in_token = 0;
    int out_token = 1;
    std::shared_ptr<const AmmCurve> curve;
};

struct AmmSystem {
    std::vector<Amm> amms;
};

// Virtual agent: supply supported at {in, out} with
//   phi_out = out_supply(p_out / p_in),  phi_in = -in_to_reach_rate(p_in / p_out).
SupplyFunction virtual_agent_supply(const Amm& amm, int n);

// Sum of the virtual agents.
SupplyFunction system_supply(const AmmSystem& sys, int n);

// Per-AMM optimal in-amounts at price p: x_c = in_to_reach_rate(p_in / p_out).
std::vector<double> in_amounts(const AmmSystem& sys, std::span<const double> p);

// Two one-directional curves from a two-sided constant-product pool state.
std::pair<Amm, Amm> split_bidirectional_pool(double reserve_a, double reserve_b,
                                             double fee_keep, int token_a, int token_b);

struct AmmValidationReport {
    bool ok = true;
    std::string first_violation;  // empty when ok
};

// Report-only checks of the curve contract on a sample grid: f(0) = 0,
// monotone, bounded by max_out, nonincreasing marginal rate, chordwise
// concavity (strict below the plateau), finite positive spot rate.
AmmValidationReport validate_amm(const AmmCurve& amm, std::span<const double> grid);

}  // namespace walraswap
