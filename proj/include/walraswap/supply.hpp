// Admissible supply functions over a token universe of n >= 2 tokens.
//
// A supply function maps a strictly positive price vector p to a vector of
// token amounts, positive where the agent sells and negative where it buys.
// It is scale-free (only relative prices matter), satisfies Walras's law
// p . phi(p) = 0, is bounded above per coordinate, and its value form
// psi_i(p) = p_i * phi_i(p) extends continuously to the boundary of the
// positive orthant (minus the origin). The value form is what the solver
// drives to zero; it stays well defined when some prices vanish, where the
// amount form does not.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace walraswap {

// Prices are plain positive vectors; all consumers must be invariant under
// uniform scaling.
using PriceVector = std::vector<double>;

bool is_interior(std::span<const double> p);
bool is_boundary_point(std::span<const double> p);  // >= 0, != 0, some zero
std::vector<double> normalize_sum1(std::span<const double> p);

// One additive component of a supply function. Implementations must be
// immutable after construction: evaluation is pure and may run concurrently
// on shared instances.
class SupplyAtom {
public:
    virtual ~SupplyAtom() = default;

    virtual int tokens() const = 0;

    // Accumulate amounts phi(p) into out. Requires p strictly positive.
    virtual void add_amounts(std::span<const double> p, std::span<double> out) const = 0;

    // Accumulate values psi(p) into out. Requires p >= 0, p != 0; uses the
    // analytic boundary extension where coordinates vanish.
    virtual void add_values(std::span<const double> p, std::span<double> out) const = 0;

    virtual void add_upper_bounds(std::span<double> out) const = 0;

    virtual void mark_support(std::vector<char>& mask) const = 0;
};

// Two-token component determined by a curve g of the exchange rate
// r = p_first / p_second:
//
//   phi_first(p)  = g(r)
//   phi_second(p) = -r * g(r)
//
// together with the analytic data needed at the boundary: the limit of g at
// infinity, the limit of r*g(r) at zero, and per-coordinate upper bounds.
// Boundary values:
//   psi_first(s, 0) =  s * lim_{r->inf} g(r)
//   psi_first(0, s) =  s * lim_{r->0} r g(r)
// and psi_second = -psi_first in both cases. When both pair coordinates are
// zero (possible only embedded in n > 2), the limit is 0.
struct PairCurve {
    std::function<double(double)> g;  // r > 0 -> amount of first token
    double g_at_inf = 0.0;            // lim_{r->inf} g(r), finite, >= 0
    double rg_at_zero = 0.0;          // lim_{r->0} r*g(r), finite, <= 0
    double sup_g = 0.0;               // upper bound for the first coordinate
    double sup_neg_rg = 0.0;          // upper bound for the second coordinate
};

class TwoTokenAtom final : public SupplyAtom {
public:
    TwoTokenAtom(int n, int first, int second, PairCurve curve);

    int tokens() const override { return n_; }
    void add_amounts(std::span<const double> p, std::span<double> out) const override;
    void add_values(std::span<const double> p, std::span<double> out) const override;
    void add_upper_bounds(std::span<double> out) const override;
    void mark_support(std::vector<char>& mask) const override;

    int first() const { return first_; }
    int second() const { return second_; }
    const PairCurve& curve() const { return curve_; }

private:
    int n_;
    int first_;
    int second_;
    PairCurve curve_;
};

// Immutable sum of atoms over a fixed token universe. Copies are cheap
// (atoms are shared, never mutated).
class SupplyFunction {
public:
    SupplyFunction() = default;
    SupplyFunction(int n, std::vector<std::shared_ptr<const SupplyAtom>> parts);

    static SupplyFunction zero(int n);

    int tokens() const { return n_; }
    bool empty() const { return parts_.empty(); }

    // phi(p); p strictly positive. Throws std::domain_error on a
    // non-interior p and std::runtime_error if a part produces a
    // non-finite amount.
    std::vector<double> evaluate(std::span<const double> p) const;

    // psi(p); p >= 0 and p != 0. Components always sum to zero exactly,
    // atom by atom.
    std::vector<double> value_form(std::span<const double> p) const;

    const std::vector<double>& upper_bounds() const { return upper_bounds_; }
    const std::vector<int>& support() const { return support_; }
    const std::vector<std::shared_ptr<const SupplyAtom>>& parts() const { return parts_; }

private:
    int n_ = 0;
    std::vector<std::shared_ptr<const SupplyAtom>> parts_;
    std::vector<double> upper_bounds_;
    std::vector<int> support_;
};

// Pointwise sum; supports merge, bounds add. Throws on token-count mismatch.
SupplyFunction sum(const SupplyFunction& a, const SupplyFunction& b);

// Embed an m-token function into n tokens through the injection sigma
// (sigma[j] = global index of local token j). Coordinates outside the image
// are identically zero.
SupplyFunction extend_support(const SupplyFunction& phi, std::span<const int> sigma, int n);

// Restrict a function supported at the index set `kept` (sorted, global
// indices) to a |kept|-token universe. Verifies by sampling that phi really
// vanishes off `kept`; round-trips with extend_support.
SupplyFunction restrict_support(const SupplyFunction& phi, std::span<const int> kept);

struct CheckTolerances {
    double psi_abs = 1e-9;         // absolute, on psi identities
    double homogeneity_rel = 1e-9; // relative, on amounts
    double strict_margin = 1e-12;  // psi_i < -margin required on face i
};

// Sample points for admissibility / strictness scans.
struct SampleGrid {
    std::vector<std::vector<double>> interior;
    std::vector<std::vector<double>> boundary;  // >= 0, != 0, some zeros
};

// Interior points log-uniform in [1e-3, 1e3]^n, boundary points on every
// face p_i = 0 with the free coordinates from a Halton sequence.
SampleGrid make_sample_grid(int n, int interior_count, int per_face, unsigned seed);

struct AdmissibilityReport {
    bool ok = true;
    double homogeneity_err = 0.0;   // relative
    double walras_err = 0.0;        // |p.phi| / sum |p_i phi_i|
    double bounds_excess = 0.0;     // max over samples of phi_i - M_i
    double psi_sum_err = 0.0;       // max |sum_i psi_i| at boundary points
    double boundary_gap = 0.0;      // psi jump approaching boundary samples
    std::string first_violation;    // empty when ok
};

struct StrictnessWitness {
    int face_token = -1;            // i with p_i = 0
    std::vector<double> point;
    double psi_value = 0.0;
};

struct StrictnessReport {
    bool strict_ok = true;
    std::vector<StrictnessWitness> witnesses;  // points where psi_i >= -margin
};

AdmissibilityReport check_admissibility(const SupplyFunction& phi, const SampleGrid& grid,
                                        const CheckTolerances& tol = {});

// Samples every face p_i = 0 (default 32 Halton points per face when the
// grid has none for a face) and requires psi_i < -margin at each point.
StrictnessReport check_strictness(const SupplyFunction& phi,
                                  const std::vector<std::vector<double>>& boundary_samples,
                                  const CheckTolerances& tol = {});
StrictnessReport check_strictness(const SupplyFunction& phi, const CheckTolerances& tol = {});

}  // namespace walraswap
