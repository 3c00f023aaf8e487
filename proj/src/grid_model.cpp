#include "lem/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace lem::grid {

double to_per_unit(double value, double base) {
    if (base == 0.0) throw GridError(GridError::Code::zero_base, "per-unit conversion with zero base");
    return value / base;
}

double to_physical(double per_unit, double base) {
    if (base == 0.0) throw GridError(GridError::Code::zero_base, "per-unit conversion with zero base");
    return per_unit * base;
}

double impedance_base_ohm(double kv, double mva) {
    if (!(kv > 0.0) || !(mva > 0.0)) {
        throw GridError(GridError::Code::non_positive_base, "impedance base needs positive kV and MVA");
    }
    return kv * kv / mva;
}

namespace {

Interval interval_to_pu(const Interval& kw, double kw_base) {
    return {kw.lo / kw_base, kw.hi / kw_base};
}

void check_interval(const Interval& iv, int node, const char* what) {
    if (std::isnan(iv.lo) || std::isnan(iv.hi) || iv.lo > iv.hi) {
        std::ostringstream msg;
        msg << "node " << node << ": " << what << " bounds out of order";
        throw GridError(GridError::Code::invalid_node, msg.str());
    }
}

}  // namespace

RadialNetwork build_feeder(const FeederSpec& spec) {
    if (!(spec.s_base_mva > 0.0)) {
        throw GridError(GridError::Code::non_positive_base, "s_base must be positive");
    }
    RadialNetwork net;
    net.s_base_mva_ = spec.s_base_mva;
    const double kw_base = spec.s_base_mva * 1000.0;

    std::vector<NodeRecord> records = spec.nodes;
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].id == records[i - 1].id) {
            throw GridError(GridError::Code::duplicate_node, "duplicate node id " + std::to_string(records[i].id));
        }
    }

    int slack_count = 0;
    for (const auto& rec : records) {
        if (!(rec.kv_base > 0.0)) {
            throw GridError(GridError::Code::non_positive_base,
                            "node " + std::to_string(rec.id) + " has non-positive kV base");
        }
        Node n;
        n.id = rec.id;
        n.kind = rec.kind;
        n.kv_base = rec.kv_base;
        n.v_min_sq = std::pow(rec.v_min_kv / rec.kv_base, 2);
        n.v_max_sq = std::pow(rec.v_max_kv / rec.kv_base, 2);
        if (!(n.v_min_sq > 0.0) || n.v_min_sq > n.v_max_sq) {
            throw GridError(GridError::Code::invalid_node, "node " + std::to_string(rec.id) + ": bad voltage bounds");
        }
        check_interval(rec.bounds_kw.pg, rec.id, "pg");
        check_interval(rec.bounds_kw.qg, rec.id, "qg");
        check_interval(rec.bounds_kw.pl, rec.id, "pl");
        check_interval(rec.bounds_kw.ql, rec.id, "ql");
        n.bounds.pg = interval_to_pu(rec.bounds_kw.pg, kw_base);
        n.bounds.qg = interval_to_pu(rec.bounds_kw.qg, kw_base);
        n.bounds.pl = interval_to_pu(rec.bounds_kw.pl, kw_base);
        n.bounds.ql = interval_to_pu(rec.bounds_kw.ql, kw_base);
        if (n.kind == NodeKind::slack) {
            ++slack_count;
            net.slack_index_ = net.nodes_.size();
        }
        net.nodes_.push_back(n);
    }
    if (slack_count == 0) throw GridError(GridError::Code::no_slack, "feeder has no slack node");
    if (slack_count > 1) throw GridError(GridError::Code::multiple_slack, "feeder has more than one slack node");

    const std::size_t n_nodes = net.nodes_.size();
    // Undirected adjacency: (neighbor index, line record index).
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n_nodes);
    for (std::size_t k = 0; k < spec.lines.size(); ++k) {
        const auto& ln = spec.lines[k];
        if (!net.contains(ln.from) || !net.contains(ln.to)) {
            throw GridError(GridError::Code::unknown_node, "line " + std::to_string(ln.from) + "->" +
                                                               std::to_string(ln.to) + " references unknown node");
        }
        if (ln.from == ln.to) throw GridError(GridError::Code::cycle_detected, "self-loop line");
        adj[net.index_of(ln.from)].push_back({net.index_of(ln.to), k});
        adj[net.index_of(ln.to)].push_back({net.index_of(ln.from), k});
    }

    net.parent_line_.assign(n_nodes, std::nullopt);
    net.child_lines_.assign(n_nodes, {});
    net.depth_.assign(n_nodes, -1);
    std::vector<std::size_t> parent_record(n_nodes, spec.lines.size());

    std::deque<std::size_t> queue{net.slack_index_};
    net.depth_[net.slack_index_] = 0;
    std::vector<std::size_t> order;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        order.push_back(u);
        auto nbrs = adj[u];
        std::sort(nbrs.begin(), nbrs.end());
        for (const auto& [v, k] : nbrs) {
            if (k == parent_record[u]) continue;
            if (net.depth_[v] >= 0) {
                throw GridError(GridError::Code::cycle_detected,
                                "cycle through nodes " + std::to_string(net.nodes_[u].id) + " and " +
                                    std::to_string(net.nodes_[v].id));
            }
            net.depth_[v] = net.depth_[u] + 1;
            parent_record[v] = k;
            queue.push_back(v);
        }
    }
    if (order.size() != n_nodes) {
        for (std::size_t i = 0; i < n_nodes; ++i) {
            if (net.depth_[i] < 0) {
                throw GridError(GridError::Code::disconnected,
                                "node " + std::to_string(net.nodes_[i].id) + " is not reachable from the slack");
            }
        }
    }
    if (spec.lines.size() != n_nodes - 1) {
        throw GridError(GridError::Code::cycle_detected, "line count does not match a spanning tree");
    }

    for (std::size_t pos = 1; pos < order.size(); ++pos) {
        const std::size_t v = order[pos];
        const auto& rec = spec.lines[parent_record[v]];
        const Node& child = net.nodes_[v];
        const int parent_id = rec.from == child.id ? rec.to : rec.from;
        const double zb = impedance_base_ohm(child.kv_base, spec.s_base_mva);
        if (!(rec.r_ohm >= 0.0) || !std::isfinite(rec.x_ohm)) {
            throw GridError(GridError::Code::invalid_line, "line into node " + std::to_string(child.id) +
                                                               " has invalid impedance");
        }
        if (!rec.s_max_kva || !(*rec.s_max_kva > 0.0)) {
            throw GridError(GridError::Code::invalid_line, "line into node " + std::to_string(child.id) +
                                                               " has no positive rating");
        }
        Line line;
        line.from = parent_id;
        line.to = child.id;
        line.r = rec.r_ohm / zb;
        line.x = rec.x_ohm / zb;
        line.s_max = *rec.s_max_kva / kw_base;
        const std::size_t li = net.lines_.size();
        net.lines_.push_back(line);
        net.parent_line_[v] = li;
        net.child_lines_[net.index_of(parent_id)].push_back(li);
    }
    for (auto& kids : net.child_lines_) {
        std::sort(kids.begin(), kids.end(),
                  [&](std::size_t a, std::size_t b) { return net.lines_[a].to < net.lines_[b].to; });
    }
    net.bfs_order_.clear();
    for (std::size_t idx : order) net.bfs_order_.push_back(net.nodes_[idx].id);
    return net;
}

bool RadialNetwork::contains(int id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const Node& n, int v) { return n.id < v; });
    return it != nodes_.end() && it->id == id;
}

std::size_t RadialNetwork::index_of(int id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const Node& n, int v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id) {
        throw GridError(GridError::Code::unknown_node, "unknown node " + std::to_string(id));
    }
    return static_cast<std::size_t>(it - nodes_.begin());
}

std::optional<std::size_t> RadialNetwork::parent_line(int id) const { return parent_line_[index_of(id)]; }

const std::vector<std::size_t>& RadialNetwork::child_lines(int id) const { return child_lines_[index_of(id)]; }

int RadialNetwork::depth(int id) const { return depth_[index_of(id)]; }

std::vector<double> RadialNetwork::voltage_levels() const {
    std::set<double> kv;
    for (const auto& n : nodes_) kv.insert(n.kv_base);
    return {kv.begin(), kv.end()};
}

std::vector<int> downstream_children(const RadialNetwork& net, int node) {
    std::vector<int> out;
    for (std::size_t li : net.child_lines(node)) out.push_back(net.lines()[li].to);
    std::sort(out.begin(), out.end());
    return out;
}

void assign_default_line_limits(FeederSpec& spec, const std::vector<std::pair<int, double>>& peak_flow_kva,
                                double factor, double floor_kva) {
    std::map<int, double> peak(peak_flow_kva.begin(), peak_flow_kva.end());
    for (auto& ln : spec.lines) {
        if (ln.s_max_kva) continue;
        auto it = peak.find(ln.to);
        const double p = it == peak.end() ? 0.0 : it->second;
        ln.s_max_kva = std::max(factor * p, floor_kva);
    }
}

}  // namespace lem::grid
