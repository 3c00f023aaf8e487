// Price and energy metrics of finished runs.
#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>

#include "lem/data/results_io.hpp"

namespace lem::data {

class IncompatibleHorizons : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// sum(v w) / sum(w); throws on empty input or zero total weight.
double weighted_mean(std::span<const double> values, std::span<const double> weights);

struct MetricsOptions {
    int slack_id = 0;
    double kw_per_pu = 1000.0;
    double dt_p_hours = 5.0 / 60.0;
    double flat_rate = 0.129;  // $/kWh retail comparator without a local market
};

struct ModeMetrics {
    double avg_dlmp = 0.0;    // |P_net|-weighted over SMO nodes, $/kWh
    double avg_retail = 0.0;  // mean DCA tariff; the d-LMP when no SM ran
    double losses_kwh = 0.0;
    double import_kwh = 0.0;  // energy drawn at the PCC
    std::size_t pm_clearings = 0;
    std::size_t sm_clearings = 0;
};

ModeMetrics compute_metrics(const RunResults& run, const MetricsOptions& opt);

struct MetricsTable {
    ModeMetrics with_smo;
    ModeMetrics without_smo;
    double flat_rate = 0.129;
};

/// Both runs must cover the same primary clearing times.
MetricsTable report_metrics(const RunResults& with_smo, const RunResults& without_smo, const MetricsOptions& opt);

void write_metrics(std::ostream& out, const MetricsTable& table);

}  // namespace lem::data
