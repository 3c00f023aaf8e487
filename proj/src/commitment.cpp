#include "lem/commitment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lem::commitment {

double raw_error(double actual, double setpoint, double half_width) {
    if (half_width < 0.0) throw std::invalid_argument("half_width must be nonnegative");
    const double hi = setpoint + half_width;
    const double lo = setpoint - half_width;
    if (actual > hi) return actual - hi;
    if (actual < lo) return lo - actual;
    return std::max(actual - hi, lo - actual);
}

CommitmentLedger::CommitmentLedger(std::vector<int> dca_ids) : ids_(std::move(dca_ids)), scores_(ids_.size(), 1.0) {}

double CommitmentLedger::score(int dca_id) const {
    auto it = std::find(ids_.begin(), ids_.end(), dca_id);
    if (it == ids_.end()) throw std::out_of_range("unknown DCA " + std::to_string(dca_id));
    return scores_[static_cast<std::size_t>(it - ids_.begin())];
}

std::vector<double> normalized_errors(std::span<const double> raw, std::span<const double> setpoints,
                                      const ScoreGuards& guards) {
    if (raw.size() != setpoints.size()) throw std::invalid_argument("error and setpoint counts differ");
    const double small = guards.small_setpoint_pu * guards.kw_per_pu;
    const double floor = guards.setpoint_floor_pu * guards.kw_per_pu;
    std::vector<double> e(raw.size());
    double norm2 = 0.0;
    for (std::size_t j = 0; j < raw.size(); ++j) {
        double denom = std::abs(setpoints[j]);
        if (denom < small) denom = std::max(denom, floor);
        e[j] = raw[j] / denom;
        norm2 += e[j] * e[j];
    }
    // Only an exactly zero vector is left unnormalized; any fixed threshold
    // would make the direction depend on the error scale.
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0)) {
        std::fill(e.begin(), e.end(), 0.0);
    } else {
        for (double& v : e) v /= norm;
    }
    return e;
}

CommitmentLedger update_scores(CommitmentLedger ledger, std::span<const Schedule> clearings,
                               std::span<const Response> actuals, const ScoreGuards& guards) {
    const std::size_t n = ledger.ids_.size();
    if (clearings.size() != n || actuals.size() != n) {
        throw std::invalid_argument("every DCA in the ledger needs a clearing and an actual");
    }
    StepErrors step;
    step.raw_P.resize(n);
    step.raw_Q.resize(n);
    std::vector<double> sp_P(n), sp_Q(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (clearings[j].dca_id != ledger.ids_[j]) throw std::invalid_argument("clearing order differs from ledger");
        step.raw_P[j] = raw_error(actuals[j].P, clearings[j].P_star, clearings[j].dP);
        step.raw_Q[j] = raw_error(actuals[j].Q, clearings[j].Q_star, clearings[j].dQ);
        sp_P[j] = clearings[j].P_star;
        sp_Q[j] = clearings[j].Q_star;
    }
    step.norm_P = normalized_errors(step.raw_P, sp_P, guards);
    step.norm_Q = normalized_errors(step.raw_Q, sp_Q, guards);
    for (std::size_t j = 0; j < n; ++j) {
        const double c = ledger.scores_[j] - 0.5 * (step.norm_P[j] + step.norm_Q[j]);
        ledger.scores_[j] = std::clamp(c, 0.0, 1.0);
    }
    if (ledger.keep_history_) {
        ledger.history_.push_back(std::move(step));
    } else {
        ledger.history_.clear();
    }
    return ledger;
}

namespace {

double respond(std::mt19937_64& rng, bool follow, double sp, double hw, const DcaBehaviour& b) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    if (follow) return sp + b.noise_scale * u(rng) * hw;
    // A collapsed band still gets a visible violation.
    const double reach = hw > 0.0 ? hw : 0.05 * std::abs(sp);
    const double side = u(rng) < 0.0 ? -1.0 : 1.0;
    return sp + side * (hw + b.overshoot_scale * reach);
}

}  // namespace

std::vector<Response> simulate_response(const ResponseModel& model, std::span<const Schedule> clearing,
                                        std::uint64_t step, int smo) {
    if (model.dcas.size() != clearing.size()) throw std::invalid_argument("response model does not match clearing");
    std::vector<Response> out(clearing.size());
    for (std::size_t j = 0; j < clearing.size(); ++j) {
        const auto& b = model.dcas[j];
        if (!(b.follow_prob >= 0.0 && b.follow_prob <= 1.0) || b.overshoot_scale < 0.0 || b.noise_scale < 0.0) {
            throw std::invalid_argument("invalid response parameters");
        }
        std::seed_seq seq{static_cast<std::uint32_t>(model.seed), static_cast<std::uint32_t>(model.seed >> 32),
                          static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                          static_cast<std::uint32_t>(smo), static_cast<std::uint32_t>(clearing[j].dca_id)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const bool follow = u01(rng) < b.follow_prob;
        const auto& c = clearing[j];
        out[j].P = respond(rng, follow, c.P_star, c.dP, b);
        out[j].Q = respond(rng, follow, c.Q_star, c.dQ, b);
    }
    return out;
}

}  // namespace lem::commitment
