#include "walraswap/orders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace walraswap {

namespace {

void validate_band(double amount, double r1, double r2, const char* what) {
    if (!(amount > 0.0) || !std::isfinite(amount))
        throw std::invalid_argument(std::string(what) + ": amount must be positive");
    if (!(0.0 < r1) || !(r1 < r2) || !std::isfinite(r2))
        throw std::invalid_argument(std::string(what) + ": need 0 < r1 < r2");
}

}  // namespace

OrderCurve sell_curve(const LimitSellOrder& order) {
    validate_band(order.amount, order.r1, order.r2, "sell order");
    if (order.sell_token == order.buy_token)
        throw std::invalid_argument("sell order: tokens must differ");
    const double amount = order.amount, r1 = order.r1, r2 = order.r2;
    OrderCurve curve;
    curve.g = [amount, r1, r2](double r) {
        if (r <= r1) return 0.0;
        if (r >= r2) return amount;
        return amount * (r - r1) / (r2 - r1);
    };
    curve.sup_g = amount;
    curve.g_at_inf = amount;
    return curve;
}

OrderCurve buy_curve(const LimitBuyOrder& order) {
    validate_band(order.amount, order.r1, order.r2, "buy order");
    if (order.buy_token == order.pay_token)
        throw std::invalid_argument("buy order: tokens must differ");
    const double amount = order.amount, r1 = order.r1, r2 = order.r2;
    // hbar(r) = -amount below r1, 0 above r2, linear in between
    auto hbar = [amount, r1, r2](double r) {
        if (r <= r1) return -amount;
        if (r >= r2) return 0.0;
        return -amount * (r2 - r) / (r2 - r1);
    };
    OrderCurve curve;
    curve.g = [hbar](double r) {
        if (r <= 0.0) return 0.0;
        return -hbar(1.0 / r) / r;
    };
    // g(1/u) = -u*hbar(u) = u*amount on [0, r1], then u*amount*(r2-u)/(r2-r1);
    // candidates for the sup: u = r1 and the parabola vertex u = r2/2
    double sup = r1 * amount;
    const double vertex = r2 / 2.0;
    if (vertex > r1 && vertex < r2)
        sup = std::max(sup, amount * vertex * (r2 - vertex) / (r2 - r1));
    curve.sup_g = sup;
    curve.g_at_inf = 0.0;
    return curve;
}

std::function<double(double)> involute(std::function<double(double)> u) {
    return [u = std::move(u)](double r) { return -u(1.0 / r) / r; };
}

SupplyFunction order_to_supply(const OrderCurve& curve, int first, int second, int n) {
    if (!curve.g) throw std::invalid_argument("order_to_supply: missing curve");
    if (!(curve.g_at_inf >= 0.0) || !std::isfinite(curve.g_at_inf) || !std::isfinite(curve.sup_g))
        throw std::invalid_argument("order_to_supply: curve limit at infinity must be finite and >= 0");
    PairCurve pair;
    pair.g = curve.g;
    pair.g_at_inf = curve.g_at_inf;
    pair.rg_at_zero = 0.0;   // order curves vanish near r = 0
    pair.sup_g = curve.sup_g;
    pair.sup_neg_rg = 0.0;   // second coordinate -r g(r) <= 0
    auto atom = std::make_shared<TwoTokenAtom>(n, first, second, std::move(pair));
    return SupplyFunction(n, {std::move(atom)});
}

SupplyFunction sell_order_supply(const LimitSellOrder& order, int n) {
    return order_to_supply(sell_curve(order), order.sell_token, order.buy_token, n);
}

SupplyFunction buy_order_supply(const LimitBuyOrder& order, int n) {
    // first = pay token: the curve g supplies what the order pays, and the
    // second coordinate -r g(r) equals hbar at the buy token's rate
    return order_to_supply(buy_curve(order), order.pay_token, order.buy_token, n);
}

}  // namespace walraswap
