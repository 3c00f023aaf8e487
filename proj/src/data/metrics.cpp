#include "lem/data/metrics.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "csv.hpp"

namespace lem::data {

double weighted_mean(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) throw std::invalid_argument("values and weights differ in length");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        num += values[i] * weights[i];
        den += weights[i];
    }
    if (values.empty() || den == 0.0) throw std::invalid_argument("weighted mean of nothing");
    return num / den;
}

ModeMetrics compute_metrics(const RunResults& run, const MetricsOptions& opt) {
    ModeMetrics m;
    std::vector<double> prices, weights;
    std::set<int> times;
    for (const auto& r : run.pm) {
        times.insert(r.t);
        const double kwh = r.P_net * opt.kw_per_pu * opt.dt_p_hours;
        m.losses_kwh += kwh;  // net injections over all nodes sum to the losses
        if (r.node == opt.slack_id) {
            m.import_kwh += kwh;
            continue;
        }
        prices.push_back(r.dlmp_P);
        weights.push_back(std::abs(r.P_net));
    }
    m.pm_clearings = times.size();
    if (!prices.empty()) {
        double wsum = 0.0;
        for (double w : weights) wsum += w;
        if (wsum > 0.0) {
            m.avg_dlmp = weighted_mean(prices, weights);
        } else {
            std::vector<double> ones(prices.size(), 1.0);
            m.avg_dlmp = weighted_mean(prices, ones);
        }
    }
    std::set<int> sm_times;
    double mu_sum = 0.0;
    for (const auto& r : run.sm) {
        sm_times.insert(r.t);
        mu_sum += r.mu_P;
    }
    m.sm_clearings = sm_times.size();
    m.avg_retail = run.sm.empty() ? m.avg_dlmp : mu_sum / static_cast<double>(run.sm.size());
    return m;
}

MetricsTable report_metrics(const RunResults& with_smo, const RunResults& without_smo, const MetricsOptions& opt) {
    std::set<int> a, b;
    for (const auto& r : with_smo.pm) a.insert(r.t);
    for (const auto& r : without_smo.pm) b.insert(r.t);
    if (a != b) throw IncompatibleHorizons("runs cover different primary clearing times");
    return {compute_metrics(with_smo, opt), compute_metrics(without_smo, opt), opt.flat_rate};
}

void write_metrics(std::ostream& out, const MetricsTable& t) {
    std::string buf = "mode,avg_dlmp_usd_per_kwh,avg_retail_usd_per_kwh,losses_kwh,import_kwh,pm_clearings,sm_clearings\n";
    auto row = [&](const char* name, const ModeMetrics& m) {
        buf += name;
        for (double v : {m.avg_dlmp, m.avg_retail, m.losses_kwh, m.import_kwh}) {
            buf += ',';
            csv::put(buf, v);
        }
        buf += ',';
        csv::put(buf, static_cast<std::int64_t>(m.pm_clearings));
        buf += ',';
        csv::put(buf, static_cast<std::int64_t>(m.sm_clearings));
        buf += '\n';
    };
    row("sm_pm", t.with_smo);
    row("pm_only", t.without_smo);
    buf += "no_lem,,";
    csv::put(buf, t.flat_rate);
    buf += ",,,0,0\n";
    out << buf;
}

}  // namespace lem::data
