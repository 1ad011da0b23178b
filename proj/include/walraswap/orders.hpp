// Continuous limit orders on a token pair, expressed as admissible supply
// functions. A sell order supplies its full size above the rate band
// [r1, r2] and nothing below; a buy order is stated in buy-token amounts and
// converted through the involution h(r) = -(1/r) g(1/r) so that both kinds
// reduce to the same curve form.
#pragma once

#include "walraswap/supply.hpp"

namespace walraswap {

// Sells `amount` of sell_token against buy_token once the rate
// r = p_sell / p_buy clears the band; linear fill inside [r1, r2].
struct LimitSellOrder {
    int sell_token = 0;
    int buy_token = 1;
    double amount = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
};

// Buys `amount` of buy_token, paying with pay_token. Full size at rates
// r = p_buy / p_pay at or below r1, nothing at or above r2.
struct LimitBuyOrder {
    int buy_token = 0;
    int pay_token = 1;
    double amount = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
};

// Curve of the supplied first-token amount against the pair exchange rate.
// Continuous, nonnegative, bounded, with a finite limit at infinity.
struct OrderCurve {
    std::function<double(double)> g;
    double sup_g = 0.0;
    double g_at_inf = 0.0;
};

OrderCurve sell_curve(const LimitSellOrder& order);
OrderCurve buy_curve(const LimitBuyOrder& order);

// h(r) = -(1/r) u(1/r); applying it twice returns u pointwise.
std::function<double(double)> involute(std::function<double(double)> u);

// Two-token supply phi_first = g(p_first/p_second), phi_second = -r g(r),
// embedded in an n-token universe with the analytic boundary values.
SupplyFunction order_to_supply(const OrderCurve& curve, int first, int second, int n);

// Convenience builders: validated order -> embedded supply function.
SupplyFunction sell_order_supply(const LimitSellOrder& order, int n);
SupplyFunction buy_order_supply(const LimitBuyOrder& order, int n);

}  // namespace walraswap
