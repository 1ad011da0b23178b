#include "walraswap/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace walraswap {

namespace {

constexpr double kLambdas[] = {1e-6, 1.0, 1e6};

[[noreturn]] void scan_failed() {
    throw std::runtime_error("scan: evaluation failed on a sample");
}

}  // namespace

double homogeneity_error_scan(const SupplyFunction& phi,
                              const std::vector<std::vector<double>>& samples, Exec exec) {
    const long count = (long)samples.size();
    double worst = 0.0;
    std::atomic<bool> failed{false};
#pragma omp parallel for reduction(max : worst) schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const auto& p = samples[k];
            const auto base = phi.evaluate(p);
            double base_inf = 0.0;
            for (double x : base) base_inf = std::max(base_inf, std::abs(x));
            std::vector<double> q(p.size());
            for (double lambda : kLambdas) {
                for (size_t i = 0; i < p.size(); ++i) q[i] = lambda * p[i];
                const auto scaled = phi.evaluate(q);
                double diff = 0.0;
                for (size_t i = 0; i < base.size(); ++i)
                    diff = std::max(diff, std::abs(scaled[i] - base[i]));
                worst = std::max(worst, diff / (1.0 + base_inf));
            }
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return worst;
}

double walras_error_scan(const SupplyFunction& phi,
                         const std::vector<std::vector<double>>& samples, Exec exec) {
    const long count = (long)samples.size();
    double worst = 0.0;
    std::atomic<bool> failed{false};
#pragma omp parallel for reduction(max : worst) schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const auto& p = samples[k];
            const auto amounts = phi.evaluate(p);
            double dot = 0.0, scale = 0.0;
            for (size_t i = 0; i < p.size(); ++i) {
                dot += p[i] * amounts[i];
                scale += std::abs(p[i] * amounts[i]);
            }
            if (scale > 0.0) worst = std::max(worst, std::abs(dot) / scale);
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return worst;
}

double bounds_excess_scan(const SupplyFunction& phi,
                          const std::vector<std::vector<double>>& samples, Exec exec) {
    const long count = (long)samples.size();
    const auto& bounds = phi.upper_bounds();
    double worst = -std::numeric_limits<double>::infinity();
    std::atomic<bool> failed{false};
#pragma omp parallel for reduction(max : worst) schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const auto amounts = phi.evaluate(samples[k]);
            for (size_t i = 0; i < amounts.size(); ++i)
                worst = std::max(worst, amounts[i] - bounds[i]);
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return worst;
}

double psi_sum_error_scan(const SupplyFunction& phi,
                          const std::vector<std::vector<double>>& samples, Exec exec) {
    const long count = (long)samples.size();
    double worst = 0.0;
    std::atomic<bool> failed{false};
#pragma omp parallel for reduction(max : worst) schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const auto values = phi.value_form(samples[k]);
            double s = 0.0;
            for (double v : values) s += v;
            worst = std::max(worst, std::abs(s));
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return worst;
}

double face_psi_max_scan(const SupplyFunction& phi,
                         const std::vector<std::vector<double>>& samples, Exec exec) {
    const long count = (long)samples.size();
    double worst = -std::numeric_limits<double>::infinity();
    std::atomic<bool> failed{false};
#pragma omp parallel for reduction(max : worst) schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const auto& p = samples[k];
            const auto values = phi.value_form(p);
            for (size_t i = 0; i < p.size(); ++i)
                if (p[i] == 0.0) worst = std::max(worst, values[i]);
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return worst;
}

std::vector<double> rate_reach_grid(const AmmCurve& amm, std::span<const double> rates, Exec exec) {
    std::vector<double> out(rates.size());
    const long count = (long)rates.size();
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            out[k] = amm.in_to_reach_rate(rates[k]);
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return out;
}

double rate_value_slack_scan(const AmmCurve& amm, std::span<const double> rates, Exec exec) {
    const long count = (long)rates.size();
    double worst = -std::numeric_limits<double>::infinity();
    std::atomic<bool> failed{false};
#pragma omp parallel for reduction(max : worst) schedule(static) if (exec == Exec::parallel)
    for (long k = 0; k < count; ++k) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            const double r = rates[k];
            const double h = amm.in_to_reach_rate(r);
            worst = std::max(worst, r * h - amm.out_for_in(h));
        } catch (...) {
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) scan_failed();
    return worst;
}

GridMax objective_grid_max(const AmmCurve& amm, double rate_in, double rate_out,
                           double x_max, int steps, Exec exec) {
    if (steps < 1 || !(x_max > 0.0))
        throw std::invalid_argument("objective_grid_max: bad grid");
    const double dx = x_max / steps;
    double best_value = -std::numeric_limits<double>::infinity();
    long best_k = 0;
    std::atomic<bool> failed{false};
#pragma omp parallel if (exec == Exec::parallel)
    {
        double local_best = -std::numeric_limits<double>::infinity();
        long local_k = 0;
#pragma omp for schedule(static) nowait
        for (long k = 0; k <= steps; ++k) {
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                const double x = k * dx;
                const double v = -rate_in * x + rate_out * amm.out_for_in(x);
                if (v > local_best) {
                    local_best = v;
                    local_k = k;
                }
            } catch (...) {
                failed.store(true, std::memory_order_relaxed);
            }
        }
#pragma omp critical
        {
            // ties resolve to the smallest grid index for determinism
            if (local_best > best_value ||
                (local_best == best_value && local_k < best_k)) {
                best_value = local_best;
                best_k = local_k;
            }
        }
    }
    if (failed.load()) scan_failed();
    return GridMax{best_value, best_k * dx};
}

// --- admissibility / strictness scans (declared in supply.hpp) ---

AdmissibilityReport check_admissibility(const SupplyFunction& phi, const SampleGrid& grid,
                                        const CheckTolerances& tol) {
    AdmissibilityReport report;
    auto fail = [&report](const std::string& msg) {
        if (report.ok) {
            report.ok = false;
            report.first_violation = msg;
        }
    };
    if (grid.interior.empty()) {
        fail("empty interior grid");
        return report;
    }
    try {
        report.homogeneity_err = homogeneity_error_scan(phi, grid.interior, Exec::parallel);
        if (report.homogeneity_err > tol.homogeneity_rel) fail("homogeneity violated");

        report.walras_err = walras_error_scan(phi, grid.interior, Exec::parallel);
        if (report.ok && report.walras_err > tol.psi_abs) {
            // locate the offending token for the report
            for (const auto& p : grid.interior) {
                const auto amounts = phi.evaluate(p);
                double dot = 0.0, scale = 0.0;
                for (size_t i = 0; i < p.size(); ++i) {
                    dot += p[i] * amounts[i];
                    scale += std::abs(p[i] * amounts[i]);
                }
                if (scale > 0.0 && std::abs(dot) / scale > tol.psi_abs) {
                    size_t worst_i = 0;
                    for (size_t i = 1; i < amounts.size(); ++i)
                        if (std::abs(p[i] * amounts[i]) > std::abs(p[worst_i] * amounts[worst_i]))
                            worst_i = i;
                    std::ostringstream os;
                    os << "Walras's law violated (largest value at token " << worst_i + 1 << ")";
                    fail(os.str());
                    break;
                }
            }
        }

        report.bounds_excess = bounds_excess_scan(phi, grid.interior, Exec::parallel);
        if (report.ok && report.bounds_excess > tol.psi_abs) fail("upper bound exceeded");

        if (!grid.boundary.empty()) {
            report.psi_sum_err = psi_sum_error_scan(phi, grid.boundary, Exec::parallel);
            if (report.ok && report.psi_sum_err > tol.psi_abs) fail("psi does not sum to zero");

            // continuity probe: the value form approached from the interior
            // must converge to its boundary value
            const int n = phi.tokens();
            double worst_gap = 0.0;
            bool conv_ok = true;
            for (const auto& pb : grid.boundary) {
                const auto psi0 = phi.value_form(pb);
                double scale = 0.0;
                for (double v : psi0) scale = std::max(scale, std::abs(v));
                auto gap_at = [&](double eps) {
                    std::vector<double> pe(n);
                    for (int i = 0; i < n; ++i) pe[i] = (1.0 - eps) * pb[i] + eps;
                    const auto psie = phi.value_form(pe);
                    double g = 0.0;
                    for (int i = 0; i < n; ++i) g = std::max(g, std::abs(psie[i] - psi0[i]));
                    return g;
                };
                const double g6 = gap_at(1e-6);
                const double g8 = gap_at(1e-8);
                worst_gap = std::max(worst_gap, g8);
                if (g8 > 0.05 * g6 + tol.psi_abs * (1.0 + scale)) conv_ok = false;
            }
            report.boundary_gap = worst_gap;
            if (report.ok && !conv_ok) fail("psi boundary extension not continuous");
        }
    } catch (const std::exception& e) {
        fail(std::string("evaluation failed: ") + e.what());
    }
    return report;
}

StrictnessReport check_strictness(const SupplyFunction& phi,
                                  const std::vector<std::vector<double>>& boundary_samples,
                                  const CheckTolerances& tol) {
    StrictnessReport report;
    for (const auto& p : boundary_samples) {
        const auto values = phi.value_form(p);
        for (size_t i = 0; i < p.size(); ++i) {
            if (p[i] == 0.0 && !(values[i] < -tol.strict_margin)) {
                report.strict_ok = false;
                report.witnesses.push_back({(int)i, p, values[i]});
            }
        }
    }
    return report;
}

StrictnessReport check_strictness(const SupplyFunction& phi, const CheckTolerances& tol) {
    const auto grid = make_sample_grid(phi.tokens(), 0, 32, 12345u);
    return check_strictness(phi, grid.boundary, tol);
}

}  // namespace walraswap
