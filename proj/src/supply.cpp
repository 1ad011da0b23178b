#include "walraswap/supply.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace walraswap {

bool is_interior(std::span<const double> p) {
    if (p.empty()) return false;
    for (double x : p)
        if (!(x > 0.0) || !std::isfinite(x)) return false;
    return true;
}

bool is_boundary_point(std::span<const double> p) {
    bool any_zero = false, any_pos = false;
    for (double x : p) {
        if (x < 0.0 || !std::isfinite(x)) return false;
        if (x == 0.0) any_zero = true;
        if (x > 0.0) any_pos = true;
    }
    return any_zero && any_pos;
}

std::vector<double> normalize_sum1(std::span<const double> p) {
    double s = 0.0;
    for (double x : p) s += x;
    if (!(s > 0.0)) throw std::domain_error("normalize_sum1: nonpositive coordinate sum");
    std::vector<double> out(p.begin(), p.end());
    for (double& x : out) x /= s;
    return out;
}

TwoTokenAtom::TwoTokenAtom(int n, int first, int second, PairCurve curve)
    : n_(n), first_(first), second_(second), curve_(std::move(curve)) {
    if (n < 2) throw std::invalid_argument("TwoTokenAtom: need n >= 2");
    if (first < 0 || first >= n || second < 0 || second >= n || first == second)
        throw std::invalid_argument("TwoTokenAtom: bad token pair");
    if (!curve_.g) throw std::invalid_argument("TwoTokenAtom: missing curve");
    if (!std::isfinite(curve_.g_at_inf) || !std::isfinite(curve_.rg_at_zero) ||
        !std::isfinite(curve_.sup_g) || !std::isfinite(curve_.sup_neg_rg))
        throw std::invalid_argument("TwoTokenAtom: non-finite curve data");
    if (curve_.g_at_inf < 0.0)
        throw std::invalid_argument("TwoTokenAtom: lim_inf g must be >= 0");
    if (curve_.rg_at_zero > 0.0)
        throw std::invalid_argument("TwoTokenAtom: lim_0 r*g must be <= 0");
}

void TwoTokenAtom::add_amounts(std::span<const double> p, std::span<double> out) const {
    const double r = p[first_] / p[second_];
    const double v = curve_.g(r);
    out[first_] += v;
    out[second_] -= r * v;
}

void TwoTokenAtom::add_values(std::span<const double> p, std::span<double> out) const {
    const double a = p[first_];
    const double b = p[second_];
    double v;
    if (a > 0.0 && b > 0.0) {
        v = a * curve_.g(a / b);
    } else if (a > 0.0) {
        v = a * curve_.g_at_inf;
    } else if (b > 0.0) {
        v = b * curve_.rg_at_zero;
    } else {
        return;  // pair fully depressed; the limit is 0
    }
    out[first_] += v;
    out[second_] -= v;
}

void TwoTokenAtom::add_upper_bounds(std::span<double> out) const {
    out[first_] += curve_.sup_g;
    out[second_] += curve_.sup_neg_rg;
}

void TwoTokenAtom::mark_support(std::vector<char>& mask) const {
    mask[first_] = 1;
    mask[second_] = 1;
}

SupplyFunction::SupplyFunction(int n, std::vector<std::shared_ptr<const SupplyAtom>> parts)
    : n_(n), parts_(std::move(parts)) {
    if (n < 2) throw std::invalid_argument("SupplyFunction: need n >= 2");
    upper_bounds_.assign(n, 0.0);
    std::vector<char> mask(n, 0);
    for (const auto& part : parts_) {
        if (!part) throw std::invalid_argument("SupplyFunction: null part");
        if (part->tokens() != n)
            throw std::invalid_argument("SupplyFunction: part token count mismatch");
        part->add_upper_bounds(upper_bounds_);
        part->mark_support(mask);
    }
    for (int i = 0; i < n; ++i)
        if (mask[i]) support_.push_back(i);
}

SupplyFunction SupplyFunction::zero(int n) { return SupplyFunction(n, {}); }

std::vector<double> SupplyFunction::evaluate(std::span<const double> p) const {
    if ((int)p.size() != n_) throw std::invalid_argument("evaluate: price size mismatch");
    if (!is_interior(p)) throw std::domain_error("evaluate: price must be strictly positive");
    std::vector<double> out(n_, 0.0);
    for (const auto& part : parts_) part->add_amounts(p, out);
    for (double x : out)
        if (!std::isfinite(x)) throw std::runtime_error("evaluate: non-finite supply amount");
    return out;
}

std::vector<double> SupplyFunction::value_form(std::span<const double> p) const {
    if ((int)p.size() != n_) throw std::invalid_argument("value_form: price size mismatch");
    bool any_pos = false;
    for (double x : p) {
        if (x < 0.0 || !std::isfinite(x)) throw std::domain_error("value_form: negative price");
        if (x > 0.0) any_pos = true;
    }
    if (!any_pos) throw std::domain_error("value_form: undefined at the origin");
    std::vector<double> out(n_, 0.0);
    for (const auto& part : parts_) part->add_values(p, out);
    for (double x : out)
        if (!std::isfinite(x)) throw std::runtime_error("value_form: non-finite supply value");
    return out;
}

SupplyFunction sum(const SupplyFunction& a, const SupplyFunction& b) {
    if (a.tokens() != b.tokens()) throw std::invalid_argument("sum: token universes differ");
    std::vector<std::shared_ptr<const SupplyAtom>> parts = a.parts();
    parts.insert(parts.end(), b.parts().begin(), b.parts().end());
    return SupplyFunction(a.tokens(), std::move(parts));
}

namespace {

class EmbedAtom final : public SupplyAtom {
public:
    EmbedAtom(std::shared_ptr<const SupplyAtom> inner, std::vector<int> sigma, int n)
        : inner_(std::move(inner)), sigma_(std::move(sigma)), n_(n) {}

    int tokens() const override { return n_; }

    void add_amounts(std::span<const double> p, std::span<double> out) const override {
        const int m = (int)sigma_.size();
        std::vector<double> ps(m), tmp(m, 0.0);
        for (int j = 0; j < m; ++j) ps[j] = p[sigma_[j]];
        inner_->add_amounts(ps, tmp);
        for (int j = 0; j < m; ++j) out[sigma_[j]] += tmp[j];
    }

    void add_values(std::span<const double> p, std::span<double> out) const override {
        const int m = (int)sigma_.size();
        std::vector<double> ps(m);
        bool any_pos = false;
        for (int j = 0; j < m; ++j) {
            ps[j] = p[sigma_[j]];
            any_pos = any_pos || ps[j] > 0.0;
        }
        // psi is homogeneous of degree 1, so it vanishes in the limit where
        // every operated price goes to zero
        if (!any_pos) return;
        std::vector<double> tmp(m, 0.0);
        inner_->add_values(ps, tmp);
        for (int j = 0; j < m; ++j) out[sigma_[j]] += tmp[j];
    }

    void add_upper_bounds(std::span<double> out) const override {
        const int m = (int)sigma_.size();
        std::vector<double> tmp(m, 0.0);
        inner_->add_upper_bounds(tmp);
        for (int j = 0; j < m; ++j) out[sigma_[j]] += tmp[j];
    }

    void mark_support(std::vector<char>& mask) const override {
        const int m = (int)sigma_.size();
        std::vector<char> inner_mask(m, 0);
        inner_->mark_support(inner_mask);
        for (int j = 0; j < m; ++j)
            if (inner_mask[j]) mask[sigma_[j]] = 1;
    }

private:
    std::shared_ptr<const SupplyAtom> inner_;
    std::vector<int> sigma_;
    int n_;
};

class RestrictAtom final : public SupplyAtom {
public:
    RestrictAtom(std::shared_ptr<const SupplyAtom> inner, std::vector<int> kept)
        : inner_(std::move(inner)), kept_(std::move(kept)) {}

    int tokens() const override { return (int)kept_.size(); }

    // phat carries 1.0 off the kept set; the inner function does not depend
    // on those coordinates, so any positive filler works
    void add_amounts(std::span<const double> p, std::span<double> out) const override {
        const int nb = inner_->tokens();
        const int m = (int)kept_.size();
        std::vector<double> phat(nb, 1.0), tmp(nb, 0.0);
        for (int j = 0; j < m; ++j) phat[kept_[j]] = p[j];
        inner_->add_amounts(phat, tmp);
        for (int j = 0; j < m; ++j) out[j] += tmp[kept_[j]];
    }

    void add_values(std::span<const double> p, std::span<double> out) const override {
        const int nb = inner_->tokens();
        const int m = (int)kept_.size();
        std::vector<double> phat(nb, 1.0), tmp(nb, 0.0);
        for (int j = 0; j < m; ++j) phat[kept_[j]] = p[j];
        inner_->add_values(phat, tmp);
        for (int j = 0; j < m; ++j) out[j] += tmp[kept_[j]];
    }

    void add_upper_bounds(std::span<double> out) const override {
        const int nb = inner_->tokens();
        std::vector<double> tmp(nb, 0.0);
        inner_->add_upper_bounds(tmp);
        for (size_t j = 0; j < kept_.size(); ++j) out[j] += tmp[kept_[j]];
    }

    void mark_support(std::vector<char>& mask) const override {
        const int nb = inner_->tokens();
        std::vector<char> inner_mask(nb, 0);
        inner_->mark_support(inner_mask);
        for (size_t j = 0; j < kept_.size(); ++j)
            if (inner_mask[kept_[j]]) mask[j] = 1;
    }

private:
    std::shared_ptr<const SupplyAtom> inner_;
    std::vector<int> kept_;
};

}  // namespace

SupplyFunction extend_support(const SupplyFunction& phi, std::span<const int> sigma, int n) {
    const int m = phi.tokens();
    if ((int)sigma.size() != m) throw std::invalid_argument("extend_support: sigma size mismatch");
    if (m > n) throw std::invalid_argument("extend_support: target universe too small");
    std::vector<char> used(n, 0);
    for (int g : sigma) {
        if (g < 0 || g >= n) throw std::invalid_argument("extend_support: index out of range");
        if (used[g]) throw std::invalid_argument("extend_support: sigma not injective");
        used[g] = 1;
    }
    std::vector<int> sig(sigma.begin(), sigma.end());
    std::vector<std::shared_ptr<const SupplyAtom>> parts;
    parts.reserve(phi.parts().size());
    for (const auto& part : phi.parts())
        parts.push_back(std::make_shared<EmbedAtom>(part, sig, n));
    return SupplyFunction(n, std::move(parts));
}

SupplyFunction restrict_support(const SupplyFunction& phi, std::span<const int> kept) {
    const int n = phi.tokens();
    const int m = (int)kept.size();
    if (m < 2) throw std::invalid_argument("restrict_support: need at least two tokens");
    std::vector<char> in_set(n, 0);
    for (int i : kept) {
        if (i < 0 || i >= n) throw std::invalid_argument("restrict_support: index out of range");
        in_set[i] = 1;
    }
    // sample a few interior points to confirm phi vanishes off the kept set
    std::mt19937_64 rng(0x5eedf00dULL);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int trial = 0; trial < 8; ++trial) {
        std::vector<double> p(n);
        for (double& x : p) x = std::pow(10.0, dist(rng));
        auto amounts = phi.evaluate(p);
        for (int i = 0; i < n; ++i)
            if (!in_set[i] && std::abs(amounts[i]) > 1e-12)
                throw std::invalid_argument("restrict_support: function not supported at the given set");
    }
    std::vector<int> kv(kept.begin(), kept.end());
    std::vector<std::shared_ptr<const SupplyAtom>> parts;
    parts.reserve(phi.parts().size());
    for (const auto& part : phi.parts())
        parts.push_back(std::make_shared<RestrictAtom>(part, kv));
    return SupplyFunction(m, std::move(parts));
}

namespace {

// Halton low-discrepancy sequence, one van der Corput stream per dimension.
double van_der_corput(unsigned idx, unsigned base) {
    double q = 0.0, bk = 1.0 / base;
    while (idx > 0) {
        q += (idx % base) * bk;
        idx /= base;
        bk /= base;
    }
    return q;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

SampleGrid make_sample_grid(int n, int interior_count, int per_face, unsigned seed) {
    SampleGrid grid;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logp(-3.0, 3.0);
    grid.interior.reserve(interior_count);
    for (int k = 0; k < interior_count; ++k) {
        std::vector<double> p(n);
        for (double& x : p) x = std::pow(10.0, logp(rng));
        grid.interior.push_back(std::move(p));
    }
    for (int face = 0; face < n; ++face) {
        for (int k = 0; k < per_face; ++k) {
            std::vector<double> p(n, 0.0);
            int dim = 0;
            for (int i = 0; i < n; ++i) {
                if (i == face) continue;
                // spread the free coordinates over several magnitudes
                double u = van_der_corput(k + 1, kPrimes[dim % 12]);
                p[i] = std::pow(10.0, -2.0 + 4.0 * u);
                ++dim;
            }
            grid.boundary.push_back(std::move(p));
        }
    }
    return grid;
}

}  // namespace walraswap
