#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lem/grid_model.hpp"

namespace lem::grid {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    return out;
}

[[noreturn]] void parse_fail(int line_no, const std::string& what) {
    throw GridError(GridError::Code::parse_error, "feeder line " + std::to_string(line_no) + ": " + what);
}

double parse_number(const std::string& s, int line_no) {
    if (s == "inf" || s == "+inf") return kUnbounded;
    if (s == "-inf") return -kUnbounded;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) parse_fail(line_no, "bad number '" + s + "'");
    return v;
}

int parse_int(const std::string& s, int line_no) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) parse_fail(line_no, "bad integer '" + s + "'");
    return v;
}

std::string fmt_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

FeederSpec read_feeder(std::istream& in) {
    FeederSpec spec;
    bool have_base = false;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_fields(raw);
        if (f[0] == "base") {
            if (f.size() != 2) parse_fail(line_no, "base record needs 1 field");
            spec.s_base_mva = parse_number(f[1], line_no);
            have_base = true;
        } else if (f[0] == "node") {
            if (f.size() != 14) parse_fail(line_no, "node record needs 13 fields");
            NodeRecord n;
            n.id = parse_int(f[1], line_no);
            if (f[2] == "slack") {
                n.kind = NodeKind::slack;
            } else if (f[2] == "smo") {
                n.kind = NodeKind::smo;
            } else {
                parse_fail(line_no, "unknown node kind '" + f[2] + "'");
            }
            n.kv_base = parse_number(f[3], line_no);
            n.v_min_kv = parse_number(f[4], line_no);
            n.v_max_kv = parse_number(f[5], line_no);
            n.bounds_kw.pg = {parse_number(f[6], line_no), parse_number(f[7], line_no)};
            n.bounds_kw.qg = {parse_number(f[8], line_no), parse_number(f[9], line_no)};
            n.bounds_kw.pl = {parse_number(f[10], line_no), parse_number(f[11], line_no)};
            n.bounds_kw.ql = {parse_number(f[12], line_no), parse_number(f[13], line_no)};
            spec.nodes.push_back(n);
        } else if (f[0] == "line") {
            if (f.size() != 6) parse_fail(line_no, "line record needs 5 fields");
            LineRecord l;
            l.from = parse_int(f[1], line_no);
            l.to = parse_int(f[2], line_no);
            l.r_ohm = parse_number(f[3], line_no);
            l.x_ohm = parse_number(f[4], line_no);
            if (f[5] != "-") l.s_max_kva = parse_number(f[5], line_no);
            spec.lines.push_back(l);
        } else {
            parse_fail(line_no, "unknown record '" + f[0] + "'");
        }
    }
    if (!have_base) throw GridError(GridError::Code::parse_error, "feeder file has no base record");
    return spec;
}

FeederSpec read_feeder_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw GridError(GridError::Code::parse_error, "cannot open feeder file " + path);
    return read_feeder(in);
}

void write_feeder(std::ostream& out, const FeederSpec& spec) {
    out << "# node,id,kind,kv_base,v_min_kv,v_max_kv,pg_lo,pg_hi,qg_lo,qg_hi,pl_lo,pl_hi,ql_lo,ql_hi\n";
    out << "# line,from,to,r_ohm,x_ohm,s_max_kva\n";
    out << "base," << fmt_number(spec.s_base_mva) << '\n';
    for (const auto& n : spec.nodes) {
        out << "node," << n.id << ',' << (n.kind == NodeKind::slack ? "slack" : "smo") << ','
            << fmt_number(n.kv_base) << ',' << fmt_number(n.v_min_kv) << ',' << fmt_number(n.v_max_kv);
        for (const Interval* iv : {&n.bounds_kw.pg, &n.bounds_kw.qg, &n.bounds_kw.pl, &n.bounds_kw.ql}) {
            out << ',' << fmt_number(iv->lo) << ',' << fmt_number(iv->hi);
        }
        out << '\n';
    }
    for (const auto& l : spec.lines) {
        out << "line," << l.from << ',' << l.to << ',' << fmt_number(l.r_ohm) << ',' << fmt_number(l.x_ohm) << ','
            << (l.s_max_kva ? fmt_number(*l.s_max_kva) : std::string("-")) << '\n';
    }
}

void write_feeder_file(const std::string& path, const FeederSpec& spec) {
    std::ofstream out(path);
    if (!out) throw GridError(GridError::Code::parse_error, "cannot write feeder file " + path);
    write_feeder(out, spec);
}

}  // namespace lem::grid
