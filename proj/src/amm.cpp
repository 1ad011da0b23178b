#include "walraswap/amm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace walraswap {

double bisect_in_to_reach_rate(const AmmCurve& amm, double rate) {
    if (!(rate > 0.0)) throw std::domain_error("in_to_reach_rate: rate must be positive");
    if (amm.marginal_rate(0.0) <= rate) return 0.0;
    double lo = 0.0, hi = 1.0;
    int guard = 0;
    while (amm.marginal_rate(hi) > rate) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 1100)
            throw std::runtime_error("in_to_reach_rate: marginal rate never drops to target");
    }
    // invariant: marginal(lo) > rate >= marginal(hi)
    for (int it = 0; it < 200; ++it) {
        if (hi - lo <= 1e-13 * hi) break;
        const double mid = 0.5 * (lo + hi);
        if (amm.marginal_rate(mid) <= rate)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double AmmCurve::in_to_reach_rate(double rate) const {
    return bisect_in_to_reach_rate(*this, rate);
}

double out_supply(const AmmCurve& amm, double r) {
    if (r < 0.0) throw std::domain_error("out_supply: negative rate");
    if (r == 0.0) return 0.0;
    return amm.in_to_reach_rate(1.0 / r) / r;
}

ConstantProductCurve::ConstantProductCurve(double reserve_in, double reserve_out, double fee_keep)
    : a_(reserve_in), b_(reserve_out), keep_(fee_keep) {
    if (!(a_ > 0.0) || !(b_ > 0.0) || !std::isfinite(a_) || !std::isfinite(b_))
        throw std::invalid_argument("constant product: reserves must be positive");
    if (!(keep_ > 0.0) || keep_ > 1.0)
        throw std::invalid_argument("constant product: fee keep fraction must be in (0, 1]");
}

double ConstantProductCurve::out_for_in(double in) const {
    if (in < 0.0) throw std::domain_error("out_for_in: negative in-amount");
    const double u = keep_ * in;
    return b_ * u / (a_ + u);
}

double ConstantProductCurve::marginal_rate(double in) const {
    if (in < 0.0) throw std::domain_error("marginal_rate: negative in-amount");
    const double d = a_ + keep_ * in;
    return keep_ * a_ * b_ / (d * d);
}

double ConstantProductCurve::in_to_reach_rate(double rate) const {
    if (!(rate > 0.0)) throw std::domain_error("in_to_reach_rate: rate must be positive");
    if (rate >= spot_rate()) return 0.0;
    return (std::sqrt(keep_ * a_ * b_ / rate) - a_) / keep_;
}

PiecewiseCurve::PiecewiseCurve(std::vector<AmmSegment> segments, double fee_keep)
    : segments_(std::move(segments)), keep_(fee_keep) {
    if (segments_.empty()) throw std::invalid_argument("piecewise: no segments");
    if (!(keep_ > 0.0) || keep_ > 1.0)
        throw std::invalid_argument("piecewise: fee keep fraction must be in (0, 1]");
    for (size_t s = 0; s < segments_.size(); ++s) {
        const auto& seg = segments_[s];
        if (!(seg.width > 0.0)) throw std::invalid_argument("piecewise: segment width must be positive");
        if (std::isinf(seg.width) && s + 1 != segments_.size())
            throw std::invalid_argument("piecewise: only the last segment may be unbounded");
        if (const auto* cp = std::get_if<CpArc>(&seg.shape)) {
            if (!(cp->a > 0.0) || !(cp->b > 0.0))
                throw std::invalid_argument("piecewise: arc reserves must be positive");
        } else {
            const auto& lin = std::get<LinearArc>(seg.shape);
            if (!(lin.slope >= 0.0) || !std::isfinite(lin.slope))
                throw std::invalid_argument("piecewise: slope must be finite and >= 0");
            if (std::isinf(seg.width) && lin.slope > 0.0)
                throw std::invalid_argument("piecewise: unbounded linear tail");
        }
    }
    if (!std::isinf(segments_.back().width))
        segments_.push_back(AmmSegment{std::numeric_limits<double>::infinity(), LinearArc{0.0}});

    start_u_.resize(segments_.size());
    start_value_.resize(segments_.size());
    double u = 0.0, v = 0.0;
    for (size_t s = 0; s < segments_.size(); ++s) {
        start_u_[s] = u;
        start_value_[s] = v;
        const auto& seg = segments_[s];
        if (!std::isinf(seg.width)) {
            if (const auto* cp = std::get_if<CpArc>(&seg.shape))
                v += cp->b * seg.width / (cp->a + seg.width);
            else
                v += std::get<LinearArc>(seg.shape).slope * seg.width;
            u += seg.width;
        } else {
            if (const auto* cp = std::get_if<CpArc>(&seg.shape))
                v += cp->b;  // asymptote of the tail arc
        }
    }
    max_out_ = v;
}

int PiecewiseCurve::segment_at(double u) const {
    // right-continuous: an exact breakpoint belongs to the right segment
    auto it = std::upper_bound(start_u_.begin(), start_u_.end(), u);
    return (int)(it - start_u_.begin()) - 1;
}

double PiecewiseCurve::out_for_in(double in) const {
    if (in < 0.0) throw std::domain_error("out_for_in: negative in-amount");
    const double u = keep_ * in;
    const int s = segment_at(u);
    const double local = u - start_u_[s];
    if (const auto* cp = std::get_if<CpArc>(&segments_[s].shape))
        return start_value_[s] + cp->b * local / (cp->a + local);
    return start_value_[s] + std::get<LinearArc>(segments_[s].shape).slope * local;
}

double PiecewiseCurve::marginal_rate(double in) const {
    if (in < 0.0) throw std::domain_error("marginal_rate: negative in-amount");
    const double u = keep_ * in;
    const int s = segment_at(u);
    const double local = u - start_u_[s];
    if (const auto* cp = std::get_if<CpArc>(&segments_[s].shape)) {
        const double d = cp->a + local;
        return keep_ * cp->a * cp->b / (d * d);
    }
    return keep_ * std::get<LinearArc>(segments_[s].shape).slope;
}

double PiecewiseCurve::in_to_reach_rate(double rate) const {
    if (!(rate > 0.0)) throw std::domain_error("in_to_reach_rate: rate must be positive");
    if (rate >= spot_rate()) return 0.0;
    const double rp = rate / keep_;  // target in pre-fee space
    for (size_t s = 0; s < segments_.size(); ++s) {
        double d_start, d_end;
        if (const auto* cp = std::get_if<CpArc>(&segments_[s].shape)) {
            d_start = cp->b / cp->a;
            if (std::isinf(segments_[s].width)) {
                d_end = 0.0;
            } else {
                const double d = cp->a + segments_[s].width;
                d_end = cp->a * cp->b / (d * d);
            }
        } else {
            d_start = d_end = std::get<LinearArc>(segments_[s].shape).slope;
        }
        if (rp >= d_start) return start_u_[s] / keep_;  // rate met at the breakpoint
        if (rp > d_end) {
            const auto& cp = std::get<CpArc>(segments_[s].shape);
            const double local = std::sqrt(cp.a * cp.b / rp) - cp.a;
            return (start_u_[s] + local) / keep_;
        }
    }
    // unreachable: the appended plateau has d_start = 0 < rate
    throw std::runtime_error("in_to_reach_rate: segment walk fell through");
}

SupplyFunction virtual_agent_supply(const Amm& amm, int n) {
    if (!amm.curve) throw std::invalid_argument("virtual_agent_supply: missing curve");
    if (amm.in_token == amm.out_token)
        throw std::invalid_argument("virtual_agent_supply: in and out tokens must differ");
    const double spot = amm.curve->spot_rate();
    if (!(spot > 0.0) || !std::isfinite(spot))
        throw std::invalid_argument("virtual_agent_supply: spot rate must be finite and positive");
    PairCurve pair;
    pair.g = [curve = amm.curve](double r) { return out_supply(*curve, r); };
    pair.g_at_inf = 0.0;
    pair.rg_at_zero = 0.0;
    pair.sup_g = amm.curve->max_out();
    pair.sup_neg_rg = 0.0;
    auto atom = std::make_shared<TwoTokenAtom>(n, amm.out_token, amm.in_token, std::move(pair));
    return SupplyFunction(n, {std::move(atom)});
}

SupplyFunction system_supply(const AmmSystem& sys, int n) {
    std::vector<std::shared_ptr<const SupplyAtom>> parts;
    parts.reserve(sys.amms.size());
    for (const auto& amm : sys.amms) {
        auto agent = virtual_agent_supply(amm, n);
        parts.push_back(agent.parts().front());
    }
    return SupplyFunction(n, std::move(parts));
}

std::vector<double> in_amounts(const AmmSystem& sys, std::span<const double> p) {
    if (!is_interior(p)) throw std::domain_error("in_amounts: price must be strictly positive");
    std::vector<double> x;
    x.reserve(sys.amms.size());
    for (const auto& amm : sys.amms)
        x.push_back(amm.curve->in_to_reach_rate(p[amm.in_token] / p[amm.out_token]));
    return x;
}

std::pair<Amm, Amm> split_bidirectional_pool(double reserve_a, double reserve_b,
                                             double fee_keep, int token_a, int token_b) {
    if (token_a == token_b) throw std::invalid_argument("pool: tokens must differ");
    auto fwd = std::make_shared<ConstantProductCurve>(reserve_a, reserve_b, fee_keep);
    auto bwd = std::make_shared<ConstantProductCurve>(reserve_b, reserve_a, fee_keep);
    // spot_fwd * spot_bwd = keep^2 <= 1: the two directions cannot both be
    // active at any one price
    return {Amm{token_a, token_b, std::move(fwd)}, Amm{token_b, token_a, std::move(bwd)}};
}

AmmValidationReport validate_amm(const AmmCurve& amm, std::span<const double> grid) {
    AmmValidationReport report;
    auto fail = [&report](const std::string& msg) {
        if (report.ok) {
            report.ok = false;
            report.first_violation = msg;
        }
    };
    std::vector<double> xs(grid.begin(), grid.end());
    std::sort(xs.begin(), xs.end());
    if (xs.empty() || xs.front() < 0.0) {
        fail("grid must be nonempty and nonnegative");
        return report;
    }

    const double M = amm.max_out();
    const double spot = amm.spot_rate();
    if (!(spot > 0.0) || !std::isfinite(spot)) fail("spot rate not finite and positive");
    if (std::abs(amm.out_for_in(0.0)) > 1e-12) fail("f(0) != 0");

    double prev_f = amm.out_for_in(xs[0]);
    double prev_d = amm.marginal_rate(xs[0]);
    for (size_t i = 1; i < xs.size() && report.ok; ++i) {
        const double f = amm.out_for_in(xs[i]);
        const double d = amm.marginal_rate(xs[i]);
        std::ostringstream os;
        if (f + 1e-12 * (1.0 + std::abs(prev_f)) < prev_f) {
            os << "not increasing at x = " << xs[i];
            fail(os.str());
        } else if (f > M * (1.0 + 1e-12) + 1e-12) {
            os << "exceeds max_out at x = " << xs[i];
            fail(os.str());
        } else if (d > prev_d * (1.0 + 1e-12) + 1e-15) {
            os << "marginal rate increases at x = " << xs[i];
            fail(os.str());
        }
        prev_f = f;
        prev_d = d;
    }
    // chord test, strict below the plateau
    const double plateau = M - 1e-12 * M;
    for (size_t i = 0; i + 1 < xs.size() && report.ok; ++i) {
        const double x1 = xs[i], x3 = xs[i + 1];
        if (x3 - x1 < 1e-12 * (1.0 + x3)) continue;
        const double f1 = amm.out_for_in(x1), f3 = amm.out_for_in(x3);
        const double fm = amm.out_for_in(0.5 * (x1 + x3));
        const double mean = 0.5 * (f1 + f3);
        std::ostringstream os;
        if (fm < mean - 1e-12 * (1.0 + std::abs(mean))) {
            os << "convex chord on [" << x1 << ", " << x3 << "]";
            fail(os.str());
        } else if (f1 < plateau && f3 < plateau && !(fm > mean)) {
            os << "not strictly concave on [" << x1 << ", " << x3 << "]";
            fail(os.str());
        }
    }
    return report;
}

}  // namespace walraswap
