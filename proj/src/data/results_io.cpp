#include "lem/data/results_io.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "csv.hpp"

namespace lem::data {

namespace {

template <class R, class T>
struct Field {
    const char* name;
    T R::*member;
};

template <class R, class T>
constexpr Field<R, T> field(const char* name, T R::*m) {
    return {name, m};
}

template <class R>
struct Schema;

template <>
struct Schema<SmRecord> {
    static constexpr auto fields =
        std::make_tuple(field("t", &SmRecord::t), field("smo", &SmRecord::smo), field("dca", &SmRecord::dca),
                        field("P_star", &SmRecord::P_star), field("dP", &SmRecord::dP),
                        field("Q_star", &SmRecord::Q_star), field("dQ", &SmRecord::dQ),
                        field("mu_P", &SmRecord::mu_P), field("mu_Q", &SmRecord::mu_Q),
                        field("score", &SmRecord::score));
};

template <>
struct Schema<PmRecord> {
    static constexpr auto fields = std::make_tuple(
        field("t", &PmRecord::t), field("node", &PmRecord::node), field("P_net", &PmRecord::P_net),
        field("Q_net", &PmRecord::Q_net), field("v_sq", &PmRecord::v_sq), field("dlmp_P", &PmRecord::dlmp_P),
        field("dlmp_Q", &PmRecord::dlmp_Q));
};

template <>
struct Schema<LineFlowRecord> {
    static constexpr auto fields = std::make_tuple(
        field("t", &LineFlowRecord::t), field("from", &LineFlowRecord::from), field("to", &LineFlowRecord::to),
        field("P", &LineFlowRecord::P), field("Q", &LineFlowRecord::Q), field("l", &LineFlowRecord::l),
        field("socp_gap", &LineFlowRecord::socp_gap));
};

template <>
struct Schema<FlexRecord> {
    static constexpr auto fields =
        std::make_tuple(field("t", &FlexRecord::t), field("node", &FlexRecord::node),
                        field("P_lo", &FlexRecord::P_lo), field("P_hi", &FlexRecord::P_hi),
                        field("P_cleared", &FlexRecord::P_cleared));
};

template <class R>
std::string header() {
    std::string h;
    std::apply([&](const auto&... f) { ((h += (h.empty() ? "" : ","), h += f.name), ...); }, Schema<R>::fields);
    return h;
}

template <class R>
void write_rows(std::ostream& out, const std::vector<R>& rows) {
    std::string buf = header<R>() + "\n";
    for (const auto& r : rows) {
        bool first = true;
        std::apply(
            [&](const auto&... f) {
                ((buf += (first ? "" : ","), first = false, csv::put(buf, r.*(f.member))), ...);
            },
            Schema<R>::fields);
        buf += '\n';
    }
    out << buf;
    if (!out) throw IoFailure("write failed");
}

template <class R>
std::vector<R> read_rows(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoFailure("missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header<R>()) throw IoFailure("unexpected header '" + line + "', expected '" + header<R>() + "'");
    constexpr std::size_t width = std::tuple_size_v<decltype(Schema<R>::fields)>;
    std::vector<R> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != width) throw IoFailure("line " + std::to_string(line_no) + ": wrong field count");
        R r{};
        std::size_t i = 0;
        bool ok = true;
        std::apply([&](const auto&... fd) { ((ok = ok && csv::parse(f[i++], r.*(fd.member))), ...); },
                   Schema<R>::fields);
        if (!ok) throw IoFailure("line " + std::to_string(line_no) + ": bad value");
        rows.push_back(r);
    }
    return rows;
}

const char* const kSmFile = "sm_clearings.csv";
const char* const kPmFile = "pm_clearings.csv";
const char* const kLinesFile = "lines.csv";
const char* const kFlexFile = "flex_ranges.csv";

template <class R>
void write_file(const std::filesystem::path& path, const std::vector<R>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write '" + path.string() + "'");
    write_rows(out, rows);
}

template <class R>
std::vector<R> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot read '" + path.string() + "'");
    return read_rows<R>(in);
}

}  // namespace

void write_sm(std::ostream& out, const std::vector<SmRecord>& rows) { write_rows(out, rows); }
void write_pm(std::ostream& out, const std::vector<PmRecord>& rows) { write_rows(out, rows); }
void write_lines(std::ostream& out, const std::vector<LineFlowRecord>& rows) { write_rows(out, rows); }
void write_flex(std::ostream& out, const std::vector<FlexRecord>& rows) { write_rows(out, rows); }

std::vector<SmRecord> read_sm(std::istream& in) { return read_rows<SmRecord>(in); }
std::vector<PmRecord> read_pm(std::istream& in) { return read_rows<PmRecord>(in); }
std::vector<LineFlowRecord> read_lines(std::istream& in) { return read_rows<LineFlowRecord>(in); }
std::vector<FlexRecord> read_flex(std::istream& in) { return read_rows<FlexRecord>(in); }

void export_results(const RunResults& results, const std::string& dir) {
    const std::filesystem::path d(dir);
    std::error_code ec;
    std::filesystem::create_directories(d, ec);
    if (ec) throw IoFailure("cannot create '" + dir + "': " + ec.message());
    write_file(d / kSmFile, results.sm);
    write_file(d / kPmFile, results.pm);
    write_file(d / kLinesFile, results.lines);
    write_file(d / kFlexFile, results.flex);
}

RunResults import_results(const std::string& dir) {
    const std::filesystem::path d(dir);
    RunResults r;
    r.sm = read_file<SmRecord>(d / kSmFile);
    r.pm = read_file<PmRecord>(d / kPmFile);
    r.lines = read_file<LineFlowRecord>(d / kLinesFile);
    r.flex = read_file<FlexRecord>(d / kFlexFile);
    return r;
}

}  // namespace lem::data
