#include "lem/data/profiles.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "csv.hpp"

namespace lem::data {

namespace {

using namespace std::chrono;

[[noreturn]] void bad_time(const std::string& text) {
    throw std::invalid_argument("bad ISO 8601 timestamp '" + text + "'");
}

int digits(const std::string& s, std::size_t pos, std::size_t n, const std::string& text) {
    if (pos + n > s.size()) bad_time(text);
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') bad_time(text);
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

// Column positions resolved from the header by name.
std::vector<std::size_t> columns(std::istream& in, const std::vector<std::string>& wanted, std::string& line) {
    if (!std::getline(in, line)) throw SchemaMismatch("empty file, expected a header");
    const auto fields = csv::split(line);
    std::vector<std::size_t> pos;
    for (const auto& w : wanted) {
        auto it = std::find(fields.begin(), fields.end(), w);
        if (it == fields.end()) throw SchemaMismatch("missing column '" + w + "'");
        pos.push_back(static_cast<std::size_t>(it - fields.begin()));
    }
    return pos;
}

template <class T>
T field(const std::vector<std::string_view>& f, std::size_t i, int line_no) {
    T v{};
    if (i >= f.size() || !csv::parse(f[i], v)) {
        throw SchemaMismatch("line " + std::to_string(line_no) + ": bad or missing value in column " +
                             std::to_string(i + 1));
    }
    return v;
}

// Checks a strictly increasing, gap-free clock for one series.
void check_clock(const std::vector<Timestamp>& ts, int cadence_s, const std::string& who) {
    for (std::size_t k = 1; k < ts.size(); ++k) {
        if (ts[k] <= ts[k - 1]) {
            throw NonMonotoneTimestamps(who + ": timestamp " + format_iso8601(ts[k]) + " does not follow " +
                                        format_iso8601(ts[k - 1]));
        }
        if (ts[k] - ts[k - 1] != cadence_s) {
            const Timestamp missing = ts[k - 1] + cadence_s;
            throw GapInSeries(missing, who + ": missing " + format_iso8601(missing));
        }
    }
}

std::ifstream open(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return in;
}

}  // namespace

Timestamp parse_iso8601(const std::string& text) {
    std::string s = text;
    if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
    if (s.size() != 16 && s.size() != 19) bad_time(text);
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') bad_time(text);
    if (s.size() == 19 && s[16] != ':') bad_time(text);
    const year_month_day ymd{year{digits(s, 0, 4, text)}, month{static_cast<unsigned>(digits(s, 5, 2, text))},
                             day{static_cast<unsigned>(digits(s, 8, 2, text))}};
    if (!ymd.ok()) bad_time(text);
    const int h = digits(s, 11, 2, text), m = digits(s, 14, 2, text);
    const int sec = s.size() == 19 ? digits(s, 17, 2, text) : 0;
    if (h > 23 || m > 59 || sec > 59) bad_time(text);
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + h * 3600 + m * 60 + sec;
}

std::string format_iso8601(Timestamp t) {
    const auto d = static_cast<long>(t >= 0 ? t / 86400 : (t - 86399) / 86400);
    const Timestamp rem = t - static_cast<Timestamp>(d) * 86400;
    const year_month_day ymd{sys_days{days{d}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

ProfileSeries read_profiles(std::istream& in, int cadence_s) {
    std::string line;
    const auto col = columns(in, {"node_id", "timestamp_iso8601", "P_kW", "Q_kvar"}, line);
    std::map<int, std::vector<Timestamp>> stamps;
    ProfileSeries out;
    out.cadence_s = cadence_s;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split(line);
        const int node = field<int>(f, col[0], line_no);
        if (col[1] >= f.size()) throw SchemaMismatch("line " + std::to_string(line_no) + ": missing timestamp");
        stamps[node].push_back(parse_iso8601(std::string(f[col[1]])));
        out.nodes[node].push_back({field<double>(f, col[2], line_no), field<double>(f, col[3], line_no)});
    }
    if (stamps.empty()) return out;
    for (const auto& [node, ts] : stamps) check_clock(ts, cadence_s, "node " + std::to_string(node));
    out.start = stamps.begin()->second.front();
    const std::size_t len = stamps.begin()->second.size();
    for (const auto& [node, ts] : stamps) {
        if (ts.front() != out.start || ts.size() != len) {
            const Timestamp first_missing = ts.front() != out.start ? out.start : ts.back() + cadence_s;
            throw GapInSeries(first_missing, "node " + std::to_string(node) + " does not cover the common span");
        }
    }
    return out;
}

ProfileSeries load_profiles(const std::string& path, int cadence_s) {
    auto in = open(path);
    return read_profiles(in, cadence_s);
}

void write_profiles(std::ostream& out, const ProfileSeries& series) {
    std::string buf = "node_id,timestamp_iso8601,P_kW,Q_kvar\n";
    for (const auto& [node, rows] : series.nodes) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            csv::put(buf, node);
            buf += ',';
            buf += format_iso8601(series.start + static_cast<Timestamp>(k) * series.cadence_s);
            buf += ',';
            csv::put(buf, rows[k].P_kw);
            buf += ',';
            csv::put(buf, rows[k].Q_kvar);
            buf += '\n';
        }
    }
    out << buf;
}

LmpSeries read_lmps(std::istream& in, int cadence_s) {
    std::string line;
    const auto col = columns(in, {"timestamp_iso8601", "lmp_usd_per_kwh"}, line);
    std::vector<Timestamp> ts;
    LmpSeries out;
    out.cadence_s = cadence_s;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = csv::split(line);
        if (col[0] >= f.size()) throw SchemaMismatch("line " + std::to_string(line_no) + ": missing timestamp");
        ts.push_back(parse_iso8601(std::string(f[col[0]])));
        const double p = field<double>(f, col[1], line_no);
        if (!std::isfinite(p)) throw SchemaMismatch("line " + std::to_string(line_no) + ": price is not finite");
        out.usd_per_kwh.push_back(p);
    }
    check_clock(ts, cadence_s, "price series");
    if (!ts.empty()) out.start = ts.front();
    return out;
}

LmpSeries load_lmps(const std::string& path, int cadence_s) {
    auto in = open(path);
    return read_lmps(in, cadence_s);
}

void write_lmps(std::ostream& out, const LmpSeries& series) {
    std::string buf = "timestamp_iso8601,lmp_usd_per_kwh\n";
    for (std::size_t k = 0; k < series.usd_per_kwh.size(); ++k) {
        buf += format_iso8601(series.start + static_cast<Timestamp>(k) * series.cadence_s);
        buf += ',';
        csv::put(buf, series.usd_per_kwh[k]);
        buf += '\n';
    }
    out << buf;
}

}  // namespace lem::data
