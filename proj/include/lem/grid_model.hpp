// Radial distribution feeder model in per-unit.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lem::grid {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

class GridError : public std::runtime_error {
  public:
    enum class Code {
        cycle_detected,
        disconnected,
        multiple_slack,
        no_slack,
        non_positive_base,
        zero_base,
        unknown_node,
        duplicate_node,
        invalid_node,
        invalid_line,
        parse_error,
    };
    GridError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const noexcept { return code_; }

  private:
    Code code_;
};

enum class NodeKind { slack, smo };

struct Interval {
    double lo = -kUnbounded;
    double hi = kUnbounded;
    bool contains(double v) const { return v >= lo && v <= hi; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Real/reactive generation and load limits of a node.
struct PowerBounds {
    Interval pg{0.0, kUnbounded};
    Interval qg{-kUnbounded, kUnbounded};
    Interval pl{0.0, kUnbounded};
    Interval ql{-kUnbounded, kUnbounded};
    friend bool operator==(const PowerBounds&, const PowerBounds&) = default;
};

struct Node {
    int id = 0;
    NodeKind kind = NodeKind::smo;
    double kv_base = 0.0;
    double v_min_sq = 0.95 * 0.95;
    double v_max_sq = 1.05 * 1.05;
    PowerBounds bounds;  // per unit
};

struct Line {
    int from = 0;
    int to = 0;
    double r = 0.0;      // per unit
    double x = 0.0;      // per unit
    double s_max = 0.0;  // per unit
};

// Physical-unit description, as read from a feeder file.
struct NodeRecord {
    int id = 0;
    NodeKind kind = NodeKind::smo;
    double kv_base = 4.16;
    double v_min_kv = 0.95 * 4.16;
    double v_max_kv = 1.05 * 4.16;
    PowerBounds bounds_kw;  // kW / kvar
};

struct LineRecord {
    int from = 0;
    int to = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    std::optional<double> s_max_kva;
};

struct FeederSpec {
    double s_base_mva = 1.0;
    std::vector<NodeRecord> nodes;
    std::vector<LineRecord> lines;
};

class RadialNetwork {
  public:
    RadialNetwork() = default;

    double s_base_mva() const noexcept { return s_base_mva_; }
    /// kW (or kvar) represented by 1 pu.
    double kw_per_pu() const noexcept { return s_base_mva_ * 1000.0; }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<Line>& lines() const noexcept { return lines_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    int slack_id() const noexcept { return nodes_[slack_index_].id; }
    std::size_t slack_index() const noexcept { return slack_index_; }

    bool contains(int id) const;
    std::size_t index_of(int id) const;  // throws unknown_node
    const Node& node(int id) const { return nodes_[index_of(id)]; }

    /// Index into lines() of the line feeding this node; empty for the slack.
    std::optional<std::size_t> parent_line(int id) const;
    /// Line indices leaving this node, ordered by child id.
    const std::vector<std::size_t>& child_lines(int id) const;
    int depth(int id) const;
    /// Node ids in breadth-first order from the slack, children sorted.
    const std::vector<int>& bfs_order() const noexcept { return bfs_order_; }
    /// Distinct kV bases in ascending order.
    std::vector<double> voltage_levels() const;

  private:
    friend RadialNetwork build_feeder(const FeederSpec& spec);

    double s_base_mva_ = 1.0;
    std::vector<Node> nodes_;  // sorted by id
    std::vector<Line> lines_;  // sorted by (depth of to, to)
    std::size_t slack_index_ = 0;
    std::vector<std::optional<std::size_t>> parent_line_;
    std::vector<std::vector<std::size_t>> child_lines_;
    std::vector<int> depth_;
    std::vector<int> bfs_order_;
};

/// Validates topology and converts physical data to per unit. Lines are
/// re-oriented away from the slack when listed the other way round.
RadialNetwork build_feeder(const FeederSpec& spec);

double to_per_unit(double value, double base);
double to_physical(double per_unit, double base);
/// Z_base = kV^2 / MVA.
double impedance_base_ohm(double kv, double mva);

/// Children of a node, sorted by id.
std::vector<int> downstream_children(const RadialNetwork& net, int node);

/// Sets unspecified line ratings to factor x the peak apparent power carried
/// by the line. peak_flow_kva maps the receiving node id of a line to that
/// line's peak |S|.
void assign_default_line_limits(FeederSpec& spec, const std::vector<std::pair<int, double>>& peak_flow_kva,
                                double factor = 2.0, double floor_kva = 10.0);

/// Text format, one record per line:
///   base,<s_base_mva>
///   node,<id>,<slack|smo>,<kv_base>,<v_min_kv>,<v_max_kv>,<pg_lo>,<pg_hi>,<qg_lo>,<qg_hi>,<pl_lo>,<pl_hi>,<ql_lo>,<ql_hi>
///   line,<from>,<to>,<r_ohm>,<x_ohm>,<s_max_kva|->
/// Power limits in kW/kvar, "inf"/"-inf" allowed. '#' starts a comment.
FeederSpec read_feeder(std::istream& in);
FeederSpec read_feeder_file(const std::string& path);
void write_feeder(std::ostream& out, const FeederSpec& spec);
void write_feeder_file(const std::string& path, const FeederSpec& spec);

}  // namespace lem::grid
