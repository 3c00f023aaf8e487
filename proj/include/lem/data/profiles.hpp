// Minute-level injection profiles and wholesale price series.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lem::data {

/// Seconds since 1970-01-01T00:00:00 UTC.
using Timestamp = std::int64_t;

/// Parses YYYY-MM-DDTHH:MM[:SS][Z].
Timestamp parse_iso8601(const std::string& text);
/// Formats as YYYY-MM-DDTHH:MM:SS.
std::string format_iso8601(Timestamp t);

class SchemaMismatch : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NonMonotoneTimestamps : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class GapInSeries : public std::runtime_error {
  public:
    GapInSeries(Timestamp missing, const std::string& what) : std::runtime_error(what), missing_(missing) {}
    Timestamp missing() const noexcept { return missing_; }

  private:
    Timestamp missing_;
};

struct Injection {
    double P_kw = 0.0;    // generation positive
    double Q_kvar = 0.0;
};

/// Per-node injections on a shared uniform clock.
struct ProfileSeries {
    Timestamp start = 0;
    int cadence_s = 60;
    std::map<int, std::vector<Injection>> nodes;

    std::size_t length() const { return nodes.empty() ? 0 : nodes.begin()->second.size(); }
    const Injection& at(int node, std::size_t step) const { return nodes.at(node).at(step); }
};

/// Schema: node_id,timestamp_iso8601,P_kW,Q_kvar.
ProfileSeries read_profiles(std::istream& in, int cadence_s = 60);
ProfileSeries load_profiles(const std::string& path, int cadence_s = 60);
void write_profiles(std::ostream& out, const ProfileSeries& series);

/// Wholesale real-power price; the reactive price is a tenth of it.
struct LmpSeries {
    Timestamp start = 0;
    int cadence_s = 300;
    std::vector<double> usd_per_kwh;

    std::size_t length() const { return usd_per_kwh.size(); }
};

/// Schema: timestamp_iso8601,lmp_usd_per_kwh.
LmpSeries read_lmps(std::istream& in, int cadence_s = 300);
LmpSeries load_lmps(const std::string& path, int cadence_s = 300);
void write_lmps(std::ostream& out, const LmpSeries& series);

}  // namespace lem::data
