#include "lem/primary_market.hpp"

#include <algorithm>
#include <cmath>

namespace lem::pm {

using convex::LinearExpr;
using convex::Objective;
using convex::Sense;

namespace {

bool ordered(const Interval& i) { return i.lo <= i.hi; }

std::string tag(const char* what, int id) { return std::string(what) + "." + std::to_string(id); }

}  // namespace

void validate(const SmoBid& b) {
    auto within = [](double v, const Interval& i) { return i.lo - 1e-12 <= v && v <= i.hi + 1e-12; };
    const bool ok = ordered(b.PG) && ordered(b.QG) && ordered(b.PL) && ordered(b.QL) && within(b.PG0, b.PG) &&
                    within(b.QG0, b.QG) && within(b.PL0, b.PL) && within(b.QL0, b.QL) && b.alpha_P > 0.0 &&
                    b.alpha_Q > 0.0 && b.beta_P > 0.0 && b.beta_Q > 0.0;
    if (!ok) throw std::invalid_argument("invalid SMO bid for node " + std::to_string(b.node));
}

const NodeResult& PmClearing::node(int id) const {
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeResult& n) { return n.id == id; });
    if (it == nodes.end()) throw std::out_of_range("no clearing result for node " + std::to_string(id));
    return *it;
}

OpfModel assemble_opf(const grid::RadialNetwork& net, std::span<const SmoBid> bids, Lmp lambda, double xi) {
    if (!(xi >= 0.0)) throw std::invalid_argument("loss weight must be nonnegative");
    std::map<int, const SmoBid*> by_node;
    for (const auto& b : bids) {
        if (!net.contains(b.node)) throw MissingBid("bid for node " + std::to_string(b.node) + " not in the feeder");
        if (b.node == net.slack_id()) throw std::invalid_argument("the PCC does not bid");
        if (std::abs(b.s_base_mva - net.s_base_mva()) > 1e-12 * net.s_base_mva()) {
            throw InconsistentBase("bid for node " + std::to_string(b.node) + " uses a different power base");
        }
        validate(b);
        if (!by_node.emplace(b.node, &b).second) {
            throw std::invalid_argument("duplicate bid for node " + std::to_string(b.node));
        }
    }

    OpfModel m;
    m.kw_per_pu = net.kw_per_pu();
    auto& p = m.program;
    Objective obj;

    for (const auto& n : net.nodes()) {
        NodeVars nv;
        nv.id = n.id;
        nv.v = p.add_variable(tag("v", n.id), n.v_min_sq, n.v_max_sq);
        if (n.kind == grid::NodeKind::slack) {
            // The PCC carries its net import on the G side so a negative
            // wholesale price cannot make G and L grow together.
            const auto& bd = n.bounds;
            nv.PG = p.add_variable(tag("PG", n.id), bd.pg.lo - bd.pl.hi, bd.pg.hi - bd.pl.lo);
            nv.QG = p.add_variable(tag("QG", n.id), bd.qg.lo - bd.ql.hi, bd.qg.hi - bd.ql.lo);
            nv.PL = p.add_variable(tag("PL", n.id), 0.0, 0.0);
            nv.QL = p.add_variable(tag("QL", n.id), 0.0, 0.0);
            obj.add_linear(LinearExpr(nv.PG) * (lambda.P * m.kw_per_pu));
            obj.add_linear(LinearExpr(nv.QG) * (lambda.Q * m.kw_per_pu));
        } else {
            auto it = by_node.find(n.id);
            if (it == by_node.end()) throw MissingBid("no bid for SMO node " + std::to_string(n.id));
            const SmoBid& b = *it->second;
            nv.PG = p.add_variable(tag("PG", n.id), b.PG.lo, b.PG.hi);
            nv.QG = p.add_variable(tag("QG", n.id), b.QG.lo, b.QG.hi);
            nv.PL = p.add_variable(tag("PL", n.id), b.PL.lo, b.PL.hi);
            nv.QL = p.add_variable(tag("QL", n.id), b.QL.lo, b.QL.hi);
            obj.add_square(b.alpha_P, LinearExpr(nv.PG));
            obj.add_square(b.alpha_Q, LinearExpr(nv.QG));
            obj.add_square(b.beta_P, LinearExpr(nv.PL).add_constant(-b.PL0));
            obj.add_square(b.beta_Q, LinearExpr(nv.QL).add_constant(-b.QL0));
        }
        m.nodes.push_back(nv);
    }

    for (const auto& ln : net.lines()) {
        LineVars lv;
        lv.from = ln.from;
        lv.to = ln.to;
        const std::string id = std::to_string(ln.from) + "-" + std::to_string(ln.to);
        lv.P = p.add_variable("P." + id);
        lv.Q = p.add_variable("Q." + id);
        lv.l = p.add_variable("l." + id, 0.0, convex::kInf);
        const auto& vf = m.nodes[net.index_of(ln.from)].v;
        const auto& vt = m.nodes[net.index_of(ln.to)].v;
        // v_to = v_from - 2 (r P + x Q) + (r^2 + x^2) l
        lv.drop = p.add_constraint("drop." + id,
                                   LinearExpr(vt)
                                       .add(vf, -1.0)
                                       .add(lv.P, 2.0 * ln.r)
                                       .add(lv.Q, 2.0 * ln.x)
                                       .add(lv.l, -(ln.r * ln.r + ln.x * ln.x)),
                                   Sense::equal, 0.0);
        lv.relaxation = p.add_rotated_cone("relax." + id, {LinearExpr(lv.P), LinearExpr(lv.Q)}, LinearExpr(vt),
                                           LinearExpr(lv.l));
        if (std::isfinite(ln.s_max)) {
            lv.thermal = p.add_soc("thermal." + id, {LinearExpr(lv.P), LinearExpr(lv.Q)}, LinearExpr(ln.s_max));
        }
        if (xi > 0.0 && ln.r > 0.0) obj.add_linear(LinearExpr(lv.l) * (xi * ln.r));
        m.lines.push_back(lv);
    }

    // Balance: PG - PL + inflow - r l - outflow = 0.
    for (std::size_t i = 0; i < net.nodes().size(); ++i) {
        const auto& n = net.nodes()[i];
        auto& nv = m.nodes[i];
        LinearExpr bp = LinearExpr(nv.PG).add(nv.PL, -1.0);
        LinearExpr bq = LinearExpr(nv.QG).add(nv.QL, -1.0);
        if (auto par = net.parent_line(n.id)) {
            const auto& ln = net.lines()[*par];
            const auto& lv = m.lines[*par];
            bp.add(lv.P, 1.0).add(lv.l, -ln.r);
            bq.add(lv.Q, 1.0).add(lv.l, -ln.x);
        }
        for (std::size_t c : net.child_lines(n.id)) {
            bp.add(m.lines[c].P, -1.0);
            bq.add(m.lines[c].Q, -1.0);
        }
        nv.balance_P = p.add_constraint(tag("balance.P", n.id), bp, Sense::equal, 0.0);
        nv.balance_Q = p.add_constraint(tag("balance.Q", n.id), bq, Sense::equal, 0.0);
    }
    p.set_objective(std::move(obj));
    return m;
}

PmClearing extract(const grid::RadialNetwork& net, const OpfModel& m, const convex::Solution& sol) {
    PmClearing c;
    c.objective = sol.objective;
    c.kkt_residual = sol.kkt_residual;
    c.iterations = sol.iterations;
    for (const auto& nv : m.nodes) {
        NodeResult r;
        r.id = nv.id;
        r.PG = sol.value(nv.PG);
        r.QG = sol.value(nv.QG);
        r.PL = sol.value(nv.PL);
        r.QL = sol.value(nv.QL);
        r.P_net = r.PG - r.PL;
        r.Q_net = r.QG - r.QL;
        r.v_sq = sol.value(nv.v);
        r.dlmp_P = sol.dual(nv.balance_P) / m.kw_per_pu;
        r.dlmp_Q = sol.dual(nv.balance_Q) / m.kw_per_pu;
        if (nv.id == net.slack_id()) {
            c.P_pcc = r.P_net;
            c.Q_pcc = r.Q_net;
        }
        c.nodes.push_back(r);
    }
    for (std::size_t k = 0; k < m.lines.size(); ++k) {
        const auto& lv = m.lines[k];
        const auto& ln = net.lines()[k];
        LineResult r;
        r.from = lv.from;
        r.to = lv.to;
        r.P = sol.value(lv.P);
        r.Q = sol.value(lv.Q);
        r.l = sol.value(lv.l);
        r.socp_gap = sol.value(m.nodes[net.index_of(lv.to)].v) * r.l - (r.P * r.P + r.Q * r.Q);
        c.losses_P += ln.r * r.l;
        c.losses_Q += ln.x * r.l;
        c.lines.push_back(r);
    }
    return c;
}

PmClearing clear_pm(const grid::RadialNetwork& net, std::span<const SmoBid> bids, Lmp lambda, double xi,
                    const convex::Tolerances& tol) {
    const OpfModel m = assemble_opf(net, bids, lambda, xi);
    const convex::Solution sol = convex::solve(m.program, tol);
    switch (sol.status) {
        case convex::SolveStatus::optimal:
        case convex::SolveStatus::reduced_accuracy: break;
        case convex::SolveStatus::infeasible: {
            std::vector<std::string> names;
            for (auto id : sol.infeasibility_set) names.push_back(m.program.constraint_name(id));
            throw Infeasible(std::move(names), "primary market infeasible: " + sol.diagnostics);
        }
        default:
            throw SolverFailure(std::string("primary market solve failed: ") + convex::to_string(sol.status) +
                                (sol.diagnostics.empty() ? "" : ": " + sol.diagnostics));
    }
    PmClearing c = extract(net, m, sol);
    c.reduced_accuracy = sol.status == convex::SolveStatus::reduced_accuracy;
    return c;
}

ExactnessReport check_socp_exactness(const PmClearing& clearing, double flag_above) {
    ExactnessReport r;
    for (std::size_t k = 0; k < clearing.lines.size(); ++k) {
        const auto& ln = clearing.lines[k];
        const double g = clearing.node(ln.to).v_sq * ln.l - (ln.P * ln.P + ln.Q * ln.Q);
        r.gaps.push_back(g);
        if (g > flag_above) r.flagged.push_back(k);
        if (k == 0 || g > r.max_gap) r.max_gap = g;
        if (k == 0 || g < r.min_gap) r.min_gap = g;
    }
    return r;
}

double injection_weighted_tariff(std::span<const TariffSample> window) {
    double num = 0.0, den = 0.0;
    for (const auto& s : window) {
        num += s.mu * s.P_abs;
        den += s.P_abs;
    }
    if (window.empty() || !(den > 0.0)) throw EmptyWindow("no injection in the tariff window");
    return num / den;
}

double update_alpha(AlphaState& state, std::span<const TariffSample> window) {
    try {
        state.alpha_var = injection_weighted_tariff(window);
    } catch (const EmptyWindow&) {
        // carried over
    }
    state.history.push_back(state.alpha_var);
    return state.alpha_fixed + state.alpha_var;
}

}  // namespace lem::pm
