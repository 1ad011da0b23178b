// Data-parallel sampling kernels. Every kernel has a serial reference path
// and an OpenMP path selected by Exec; the two must produce identical
// results (reductions are min/max only, so there is no floating-point
// reassociation across threads).
#pragma once

#include "walraswap/amm.hpp"
#include "walraswap/supply.hpp"

#include <span>
#include <vector>

namespace walraswap {

enum class Exec { serial, parallel };

// max over samples of |phi(lambda p) - phi(p)|_inf / (1 + |phi(p)|_inf),
// lambda in {1e-6, 1, 1e6}
double homogeneity_error_scan(const SupplyFunction& phi,
                              const std::vector<std::vector<double>>& samples, Exec exec);

// max over samples of |p . phi(p)| / max(sum_i |p_i phi_i|, tiny)
double walras_error_scan(const SupplyFunction& phi,
                         const std::vector<std::vector<double>>& samples, Exec exec);

// max over samples and coordinates of phi_i(p) - upper_bound_i
double bounds_excess_scan(const SupplyFunction& phi,
                          const std::vector<std::vector<double>>& samples, Exec exec);

// max over boundary samples of |sum_i psi_i(p)|
double psi_sum_error_scan(const SupplyFunction& phi,
                          const std::vector<std::vector<double>>& samples, Exec exec);

// max over boundary samples with p_i = 0 of psi_i(p)  (<= 0 for admissible
// functions, < 0 everywhere for strict ones)
double face_psi_max_scan(const SupplyFunction& phi,
                         const std::vector<std::vector<double>>& samples, Exec exec);

// in_to_reach_rate over a rate grid
std::vector<double> rate_reach_grid(const AmmCurve& amm, std::span<const double> rates, Exec exec);

// worst (most positive) Prop-V style slack r*h(r) - f(h(r)) over a rate grid
double rate_value_slack_scan(const AmmCurve& amm, std::span<const double> rates, Exec exec);

// maximize gamma(x) = -rate_in * x + rate_out * f(x) over a uniform grid on
// [0, x_max]
struct GridMax {
    double best_value = 0.0;
    double best_x = 0.0;
};
GridMax objective_grid_max(const AmmCurve& amm, double rate_in, double rate_out,
                           double x_max, int steps, Exec exec);

}  // namespace walraswap
