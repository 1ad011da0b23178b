#include "walraswap/batch_io.hpp"

#include "walraswap/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

namespace walraswap {

using nlohmann::json;

std::string fnv1a64_hex(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << h;
    return os.str();
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw BatchError(msg); }

// numbers may arrive as JSON numbers or as decimal strings
double num_field(const json& j, const std::string& field, const std::string& where) {
    if (!j.contains(field)) fail(where + ": missing field '" + field + "'");
    const auto& v = j.at(field);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        try {
            size_t pos = 0;
            const double x = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return x;
        } catch (const std::exception&) {
            fail(where + ": field '" + field + "' is not a number: \"" + s + "\"");
        }
    }
    fail(where + ": field '" + field + "' must be a number or decimal string");
}

double num_or(const json& j, const std::string& field, double fallback, const std::string& where) {
    if (!j.contains(field)) return fallback;
    return num_field(j, field, where);
}

std::string str_field(const json& j, const std::string& field, const std::string& where) {
    if (!j.contains(field) || !j.at(field).is_string())
        fail(where + ": missing string field '" + field + "'");
    return j.at(field).get<std::string>();
}

int token_index(const std::vector<std::string>& tokens, const std::string& symbol,
                const std::string& where) {
    auto it = std::find(tokens.begin(), tokens.end(), symbol);
    if (it == tokens.end()) fail(where + ": unknown token symbol \"" + symbol + "\"");
    return (int)(it - tokens.begin());
}

Strategy parse_strategy(const std::string& s) {
    if (s == "auto") return Strategy::auto_pick;
    if (s == "bisection2") return Strategy::bisection2;
    if (s == "rho_iteration") return Strategy::rho_iteration;
    if (s == "simplicial") return Strategy::simplicial;
    fail("config: unknown strategy \"" + s + "\"");
}

std::shared_ptr<const PiecewiseCurve> parse_piecewise(const json& j, double keep,
                                                      const std::string& where) {
    if (!j.is_array() || j.empty()) fail(where + ": segments must be a nonempty array");
    std::vector<AmmSegment> segments;
    for (size_t s = 0; s < j.size(); ++s) {
        std::ostringstream os;
        os << where << " segment " << s + 1;
        const auto& seg = j[s];
        const std::string kind = str_field(seg, "kind", os.str());
        const double width =
            num_or(seg, "width", std::numeric_limits<double>::infinity(), os.str());
        if (kind == "cpamm") {
            segments.push_back(
                AmmSegment{width, CpArc{num_field(seg, "a", os.str()),
                                        num_field(seg, "b", os.str())}});
        } else if (kind == "linear") {
            segments.push_back(AmmSegment{width, LinearArc{num_field(seg, "slope", os.str())}});
        } else {
            fail(os.str() + ": unknown segment kind \"" + kind + "\"");
        }
    }
    try {
        return std::make_shared<PiecewiseCurve>(std::move(segments), keep);
    } catch (const std::exception& e) {
        fail(where + ": " + e.what());
    }
}

void check_curve(const AmmCurve& curve, const std::string& where) {
    // grid scaled to where the curve actually bends
    const double scale = std::max(curve.in_to_reach_rate(curve.spot_rate() / 16.0), 1.0);
    std::vector<double> grid;
    for (int i = 0; i <= 64; ++i) grid.push_back(scale * i / 16.0);
    const auto report = validate_amm(curve, grid);
    if (!report.ok) fail(where + ": invalid AMM curve: " + report.first_violation);
}

json token_map(const std::vector<std::string>& tokens, std::span<const double> values) {
    json out = json::object();
    for (size_t i = 0; i < tokens.size(); ++i) out[tokens[i]] = values[i];
    return out;
}

}  // namespace

ParsedBatch parse_batch_text(const std::string& text) {
    ParsedBatch batch;
    batch.digest = fnv1a64_hex(text);

    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(std::string("malformed JSON: ") + e.what());
    }
    if (!root.is_object()) fail("batch: top level must be an object");
    if (root.value("schema", "") != "walraswap_batch_v1")
        fail("batch: schema must be \"walraswap_batch_v1\"");

    if (!root.contains("tokens") || !root.at("tokens").is_array())
        fail("batch: missing tokens array");
    for (const auto& t : root.at("tokens")) {
        if (!t.is_string()) fail("batch: token symbols must be strings");
        batch.tokens.push_back(t.get<std::string>());
    }
    const int n = (int)batch.tokens.size();
    if (n < 2) fail("batch: need at least two tokens");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (batch.tokens[i] == batch.tokens[j])
                fail("batch: duplicate token symbol \"" + batch.tokens[i] + "\"");

    std::vector<OrderSpec> orders;
    if (root.contains("orders")) {
        const auto& arr = root.at("orders");
        if (!arr.is_array()) fail("batch: orders must be an array");
        for (size_t k = 0; k < arr.size(); ++k) {
            std::ostringstream os;
            os << "order " << k + 1;
            const std::string where = os.str();
            const auto& o = arr[k];
            if (o.value("fill", "partial") == "all_or_nothing")
                fail(where + ": all-or-nothing orders are not supported (continuous fills only)");
            const std::string kind = str_field(o, "kind", where);
            const double amount = num_field(o, "amount", where);
            if (!(amount > 0.0)) fail(where + ": amount must be positive");
            double r1, r2;
            if (o.contains("r1") || o.contains("r2")) {
                r1 = num_field(o, "r1", where);
                r2 = num_field(o, "r2", where);
            } else {
                const double limit = num_field(o, "limit_price", where);
                const double band = num_or(o, "band_fraction", 1e-3, where);
                if (!(limit > 0.0)) fail(where + ": limit_price must be positive");
                if (!(band > 0.0) || band >= 2.0) fail(where + ": band_fraction out of range");
                r1 = limit * (1.0 - band / 2.0);
                r2 = limit * (1.0 + band / 2.0);
            }
            try {
                if (kind == "sell") {
                    LimitSellOrder order{token_index(batch.tokens, str_field(o, "sell_token", where), where),
                                         token_index(batch.tokens, str_field(o, "buy_token", where), where),
                                         amount, r1, r2};
                    orders.push_back(make_sell(order, n));
                } else if (kind == "buy") {
                    LimitBuyOrder order{token_index(batch.tokens, str_field(o, "buy_token", where), where),
                                        token_index(batch.tokens, str_field(o, "pay_token", where), where),
                                        amount, r1, r2};
                    orders.push_back(make_buy(order, n));
                } else {
                    fail(where + ": kind must be \"sell\" or \"buy\"");
                }
            } catch (const BatchError&) {
                throw;
            } catch (const std::exception& e) {
                fail(where + ": " + e.what());
            }
        }
    }

    AmmSystem amms;
    if (root.contains("pools")) {
        const auto& arr = root.at("pools");
        if (!arr.is_array()) fail("batch: pools must be an array");
        for (size_t k = 0; k < arr.size(); ++k) {
            std::ostringstream os;
            os << "pool " << k + 1;
            const std::string where = os.str();
            const auto& pj = arr[k];
            const std::string kind = pj.value("kind", "constant_product");
            const int ta = token_index(batch.tokens, str_field(pj, "token_a", where), where);
            const int tb = token_index(batch.tokens, str_field(pj, "token_b", where), where);
            const double fee_bps = num_or(pj, "fee_bps", 0.0, where);
            if (!(fee_bps >= 0.0) || fee_bps >= 10000.0)
                fail(where + ": fee_bps must lie in [0, 10000)");
            const double keep = 1.0 - fee_bps / 10000.0;
            PoolRef ref;
            if (kind == "constant_product") {
                const double ra = num_field(pj, "reserve_a", where);
                const double rb = num_field(pj, "reserve_b", where);
                try {
                    auto [fwd, bwd] = split_bidirectional_pool(ra, rb, keep, ta, tb);
                    ref.amm_ab = (int)amms.amms.size();
                    amms.amms.push_back(std::move(fwd));
                    ref.amm_ba = (int)amms.amms.size();
                    amms.amms.push_back(std::move(bwd));
                } catch (const std::exception& e) {
                    fail(where + ": " + e.what());
                }
            } else if (kind == "piecewise") {
                if (!pj.contains("segments_ab") || !pj.contains("segments_ba"))
                    fail(where + ": piecewise pools need segments_ab and segments_ba");
                auto fwd = parse_piecewise(pj.at("segments_ab"), keep, where + " (a->b)");
                auto bwd = parse_piecewise(pj.at("segments_ba"), keep, where + " (b->a)");
                check_curve(*fwd, where + " (a->b)");
                check_curve(*bwd, where + " (b->a)");
                ref.amm_ab = (int)amms.amms.size();
                amms.amms.push_back(Amm{ta, tb, std::move(fwd)});
                ref.amm_ba = (int)amms.amms.size();
                amms.amms.push_back(Amm{tb, ta, std::move(bwd)});
            } else {
                fail(where + ": unknown pool kind \"" + kind + "\"");
            }
            batch.pools.push_back(ref);
        }
    }

    if (root.contains("config")) {
        const auto& c = root.at("config");
        if (c.contains("strategy"))
            batch.options.solver.strategy = parse_strategy(str_field(c, "strategy", "config"));
        batch.options.solver.residual_tol =
            num_or(c, "residual_tol", batch.options.solver.residual_tol, "config");
        batch.options.solver.max_iterations =
            (int)num_or(c, "max_iterations", batch.options.solver.max_iterations, "config");
        batch.options.solver.damping = num_or(c, "damping", batch.options.solver.damping, "config");
        batch.options.solver.mesh_depth =
            (int)num_or(c, "mesh_depth", batch.options.solver.mesh_depth, "config");
        if (c.contains("hub_token"))
            batch.options.solver.hub_token =
                token_index(batch.tokens, str_field(c, "hub_token", "config"), "config");
        if (c.contains("use_decomposition"))
            batch.options.solver.use_decomposition = c.at("use_decomposition").get<bool>();
        if (c.contains("polish")) batch.options.solver.polish = c.at("polish").get<bool>();
        if (c.contains("strict_required"))
            batch.options.strict_required = c.at("strict_required").get<bool>();
        batch.options.surplus_tol = num_or(c, "surplus_tol", batch.options.surplus_tol, "config");
        batch.options.seed = (unsigned)num_or(c, "seed", batch.options.seed, "config");
    }

    if (root.contains("warm_start")) {
        const auto& w = root.at("warm_start");
        if (!w.is_array() || (int)w.size() != n)
            fail("warm_start: need one positive price per token");
        std::vector<double> warm(n);
        for (int i = 0; i < n; ++i) {
            warm[i] = w[i].is_string() ? std::stod(w[i].get<std::string>()) : w[i].get<double>();
            if (!(warm[i] > 0.0)) fail("warm_start: prices must be positive");
        }
        batch.options.solver.warm_start = std::move(warm);
    }

    try {
        batch.problem = EquilibriumProblem::build(n, std::move(orders), std::move(amms));
    } catch (const std::exception& e) {
        fail(std::string("batch: ") + e.what());
    }

    const auto grid = make_sample_grid(n, 0, 32, batch.options.seed);
    batch.strictness = check_strictness(batch.problem.aggregate, grid.boundary);
    batch.sell_cover_ok = batch.problem.sell_cover(&batch.uncovered_tokens);
    if (batch.options.strict_required && (!batch.sell_cover_ok || !batch.strictness.strict_ok)) {
        std::ostringstream os;
        os << "strict supply required, but the batch has no sell order buying token(s)";
        for (int t : batch.uncovered_tokens) os << " " << batch.tokens[t];
        if (batch.uncovered_tokens.empty()) os << " (sampled boundary violation)";
        fail(os.str());
    }
    return batch;
}

ParsedBatch parse_batch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open batch file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_batch_text(buffer.str());
}

ClearRun run_clear(const ParsedBatch& batch) {
    ClearRun run;
    run.result = solve(batch.problem, batch.options.solver);
    if (!run.result.ok()) {
        run.status = "NO_EQUILIBRIUM";
        run.exit_code = 2;
        return run;
    }
    run.outcome = settle(batch.problem, run.result, batch.options.solver.residual_tol,
                         batch.options.surplus_tol);
    run.status = run.outcome->certified ? "CERTIFIED" : "FAILED";
    run.exit_code = run.outcome->certified ? 0 : 3;
    return run;
}

namespace {

json strictness_json(const ParsedBatch& batch) {
    json s;
    s["sampled_ok"] = batch.strictness.strict_ok;
    s["sell_cover_ok"] = batch.sell_cover_ok;
    json uncovered = json::array();
    for (int t : batch.uncovered_tokens) uncovered.push_back(batch.tokens[t]);
    s["uncovered_tokens"] = uncovered;
    json witnesses = json::array();
    for (const auto& w : batch.strictness.witnesses) {
        json wj;
        wj["face_token"] = batch.tokens[w.face_token];
        wj["point"] = w.point;
        wj["psi"] = w.psi_value;
        witnesses.push_back(wj);
    }
    s["witnesses"] = witnesses;
    return s;
}

json solver_json(const ParsedBatch& batch, const EquilibriumResult& result) {
    json s;
    s["strategy"] = to_string(result.strategy_used);
    s["status"] = to_string(result.status);
    s["iterations"] = result.iterations;
    s["parallel_subsolves"] = result.parallel_subsolves;
    if (!result.message.empty()) s["message"] = result.message;
    json subs = json::array();
    for (const auto& rec : result.subproblem_trace) {
        json r;
        json toks = json::array();
        for (int t : rec.tokens) toks.push_back(batch.tokens[t]);
        r["tokens"] = toks;
        r["strategy"] = to_string(rec.strategy_used);
        r["status"] = to_string(rec.status);
        r["residual"] = rec.residual;
        r["iterations"] = rec.iterations;
        subs.push_back(r);
    }
    s["subproblems"] = subs;
    return s;
}

}  // namespace

std::string render_report(const ParsedBatch& batch, const ClearRun& run) {
    json report;
    report["schema"] = "walraswap_report_v1";
    report["input_digest"] = batch.digest;
    report["status"] = run.status;
    report["residual_tol"] = batch.options.solver.residual_tol;
    report["surplus_tol"] = batch.options.surplus_tol;
    report["solver"] = solver_json(batch, run.result);
    report["strictness"] = strictness_json(batch);

    if (run.outcome) {
        const auto& outcome = *run.outcome;
        json prices;
        prices["normalized"] = token_map(batch.tokens, outcome.price);
        std::vector<double> rates(outcome.price.size());
        for (size_t i = 0; i < rates.size(); ++i) rates[i] = outcome.price[i] / outcome.price[0];
        prices["rates_vs_first"] = token_map(batch.tokens, rates);
        report["prices"] = prices;
        report["residual"] = outcome.residual;

        json fills = json::array();
        for (size_t k = 0; k < outcome.order_fills.size(); ++k) {
            json f;
            f["order"] = k;
            f["kind"] = batch.problem.orders[k].kind == OrderSpec::Kind::sell ? "sell" : "buy";
            f["amounts"] = token_map(batch.tokens, outcome.order_fills[k]);
            fills.push_back(f);
        }
        report["fills"] = fills;

        json legs = json::array();
        for (size_t k = 0; k < batch.pools.size(); ++k) {
            const auto& ref = batch.pools[k];
            const auto& ab = outcome.amm_legs[ref.amm_ab];
            const auto& ba = outcome.amm_legs[ref.amm_ba];
            json leg;
            leg["pool"] = k;
            if (ab.first > 0.0) {
                leg["direction"] = "a_to_b";
                leg["in"] = ab.first;
                leg["out"] = ab.second;
            } else if (ba.first > 0.0) {
                leg["direction"] = "b_to_a";
                leg["in"] = ba.first;
                leg["out"] = ba.second;
            } else {
                leg["direction"] = "none";
                leg["in"] = 0.0;
                leg["out"] = 0.0;
            }
            legs.push_back(leg);
        }
        report["pool_legs"] = legs;

        report["surplus"] = token_map(batch.tokens, outcome.surplus);
        if (!outcome.surplus_theorem.empty())
            report["surplus_theorem"] = token_map(batch.tokens, outcome.surplus_theorem);
        report["total_value"] = outcome.total_value;
        if (!outcome.certified) report["failure_reason"] = outcome.failure_reason;
    } else {
        // solver diagnostics only; best-effort price helps debugging
        if (!run.result.price.empty()) {
            report["best_price"] = token_map(batch.tokens, run.result.price);
            report["best_residual"] = run.result.residual;
        }
    }
    return report.dump(2) + "\n";
}

std::string render_summary(const ParsedBatch& batch, const ClearRun& run) {
    std::ostringstream os;
    os << "status: " << run.status << "\n";
    if (run.outcome) {
        const auto& outcome = *run.outcome;
        os << "residual: " << outcome.residual << "\n";
        os << "prices (normalized / rate vs " << batch.tokens[0] << "):\n";
        for (size_t i = 0; i < batch.tokens.size(); ++i)
            os << "  " << batch.tokens[i] << "  " << outcome.price[i] << "  "
               << outcome.price[i] / outcome.price[0] << "\n";
        os << "surplus:\n";
        for (size_t i = 0; i < batch.tokens.size(); ++i)
            os << "  " << batch.tokens[i] << "  " << outcome.surplus[i] << "\n";
        os << "total value: " << outcome.total_value << "\n";
        if (!outcome.certified) os << "failure: " << outcome.failure_reason << "\n";
    } else {
        os << "solver: " << to_string(run.result.status);
        if (!run.result.message.empty()) os << " (" << run.result.message << ")";
        os << "\n";
        if (!batch.strictness.strict_ok && !batch.strictness.witnesses.empty()) {
            const auto& w = batch.strictness.witnesses.front();
            os << "strictness violated on face " << batch.tokens[w.face_token]
               << " (psi = " << w.psi_value << ")\n";
        }
    }
    return os.str();
}

int verify_report_files(const std::string& batch_path, const std::string& report_path,
                        std::string* message) {
    auto said = [&message](const std::string& m) {
        if (message) *message = m;
        return 1;
    };
    ParsedBatch batch;
    try {
        batch = parse_batch(batch_path);
    } catch (const std::exception& e) {
        return said(std::string("batch: ") + e.what());
    }
    json report;
    try {
        std::ifstream in(report_path, std::ios::binary);
        if (!in) return said("cannot open report file: " + report_path);
        report = json::parse(in);
    } catch (const std::exception& e) {
        return said(std::string("report: ") + e.what());
    }

    if (report.value("schema", "") != "walraswap_report_v1")
        return said("report: wrong schema");
    if (report.value("input_digest", "") != batch.digest)
        return said("digest mismatch: report was produced from a different batch");

    const std::string status = report.value("status", "");
    if (status != "CERTIFIED") {
        if (message) *message = "no certificates to verify (status " + status + ")";
        return 0;
    }

    const double residual_tol = report.value("residual_tol", 1e-8);
    const double surplus_tol = report.value("surplus_tol", 1e-8);

    if (!report.contains("prices")) return said("report: missing prices");
    std::vector<double> p(batch.tokens.size());
    try {
        const auto& norm = report.at("prices").at("normalized");
        for (size_t i = 0; i < batch.tokens.size(); ++i)
            p[i] = norm.at(batch.tokens[i]).get<double>();
    } catch (const std::exception& e) {
        return said(std::string("report prices: ") + e.what());
    }
    if (!is_interior(p)) return said("report prices are not strictly positive");

    const double res = residual_at(batch.problem.aggregate, p);
    if (res > residual_tol) {
        std::ostringstream os;
        os << "residual check failed: " << res << " > " << residual_tol;
        return said(os.str());
    }

    const auto x = in_amounts(batch.problem.amms, p);
    const auto s_def = compute_surplus(batch.problem, p, x);
    const auto s_thm = surplus_via_theorem(batch.problem, p, residual_tol);

    for (size_t i = 0; i < s_def.size(); ++i) {
        if (s_def[i] < -surplus_tol) {
            std::ostringstream os;
            os << "surplus of " << batch.tokens[i] << " is negative: " << s_def[i];
            return said(os.str());
        }
        const double reported = report.at("surplus").at(batch.tokens[i]).get<double>();
        if (std::abs(reported - s_def[i]) > 1e-9 * (1.0 + std::abs(s_def[i])))
            return said("reported surplus of " + batch.tokens[i] + " does not re-derive");
    }
    double bound_scale = 0.0;
    for (double m : upper_bounds(batch.problem)) bound_scale = std::max(bound_scale, m);
    const double agree_tol =
        std::max(surplus_tol, 10.0 * res * (double)batch.tokens.size() * bound_scale);
    for (size_t i = 0; i < s_def.size(); ++i)
        if (std::abs(s_def[i] - s_thm[i]) > agree_tol)
            return said("surplus paths disagree at " + batch.tokens[i]);

    double x_scale = 1.0;
    for (double v : x) x_scale = std::max(x_scale, v);
    const auto opt = verify_optimality(batch.problem, p, x, 1e-6 * x_scale);
    if (!opt.ok) return said("optimality check failed: " + opt.detail);

    if (message) *message = "all certificates re-verify";
    return 0;
}

}  // namespace walraswap
