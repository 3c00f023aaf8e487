// Run results and their CSV files.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace lem::data {

class IoFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// One DCA in one secondary clearing; kW, kvar, $/kWh.
struct SmRecord {
    int t = 0;  // minute
    int smo = 0;
    int dca = 0;
    double P_star = 0.0, dP = 0.0, Q_star = 0.0, dQ = 0.0;
    double mu_P = 0.0, mu_Q = 0.0;
    double score = 1.0;
    friend bool operator==(const SmRecord&, const SmRecord&) = default;
};

/// One node in one primary clearing; pu and $/kWh.
struct PmRecord {
    int t = 0;
    int node = 0;
    double P_net = 0.0, Q_net = 0.0, v_sq = 0.0;
    double dlmp_P = 0.0, dlmp_Q = 0.0;
    friend bool operator==(const PmRecord&, const PmRecord&) = default;
};

struct LineFlowRecord {
    int t = 0;
    int from = 0, to = 0;
    double P = 0.0, Q = 0.0, l = 0.0;
    double socp_gap = 0.0;
    friend bool operator==(const LineFlowRecord&, const LineFlowRecord&) = default;
};

/// Net real-power range a node offered to the primary market, pu.
struct FlexRecord {
    int t = 0;
    int node = 0;
    double P_lo = 0.0, P_hi = 0.0;
    double P_cleared = 0.0;
    friend bool operator==(const FlexRecord&, const FlexRecord&) = default;
};

struct RunResults {
    std::vector<SmRecord> sm;
    std::vector<PmRecord> pm;
    std::vector<LineFlowRecord> lines;
    std::vector<FlexRecord> flex;
    friend bool operator==(const RunResults&, const RunResults&) = default;
};

void write_sm(std::ostream& out, const std::vector<SmRecord>& rows);
void write_pm(std::ostream& out, const std::vector<PmRecord>& rows);
void write_lines(std::ostream& out, const std::vector<LineFlowRecord>& rows);
void write_flex(std::ostream& out, const std::vector<FlexRecord>& rows);

std::vector<SmRecord> read_sm(std::istream& in);
std::vector<PmRecord> read_pm(std::istream& in);
std::vector<LineFlowRecord> read_lines(std::istream& in);
std::vector<FlexRecord> read_flex(std::istream& in);

/// sm_clearings.csv, pm_clearings.csv, lines.csv and flex_ranges.csv in dir,
/// which is created when missing.
void export_results(const RunResults& results, const std::string& dir);
RunResults import_results(const std::string& dir);

}  // namespace lem::data
