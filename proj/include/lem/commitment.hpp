// Commitment scores of DCAs and a stochastic model of their actual response.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace lem::commitment {

/// Cleared schedule of one DCA, kW / kvar.
struct Schedule {
    int dca_id = 0;
    double P_star = 0.0;
    double dP = 0.0;
    double Q_star = 0.0;
    double dQ = 0.0;
};

struct Response {
    double P = 0.0;
    double Q = 0.0;
};

/// Positive when outside [setpoint - half_width, setpoint + half_width] by
/// that distance; inside the band it is max(actual - hi, lo - actual) <= 0.
double raw_error(double actual, double setpoint, double half_width);

struct StepErrors {
    std::vector<double> raw_P, raw_Q;
    std::vector<double> norm_P, norm_Q;
};

struct ScoreGuards {
    double kw_per_pu = 1000.0;
    double small_setpoint_pu = 1e-6;
    double setpoint_floor_pu = 1e-3;
};

class CommitmentLedger {
  public:
    CommitmentLedger() = default;
    /// Every DCA starts with score 1.
    explicit CommitmentLedger(std::vector<int> dca_ids);

    const std::vector<int>& dca_ids() const noexcept { return ids_; }
    const std::vector<double>& scores() const noexcept { return scores_; }
    double score(int dca_id) const;
    const std::vector<StepErrors>& history() const noexcept { return history_; }

    /// Keeps the step record only when enabled (long runs store only scores).
    void set_keep_history(bool keep) noexcept { keep_history_ = keep; }

    friend CommitmentLedger update_scores(CommitmentLedger ledger, std::span<const Schedule> clearings,
                                          std::span<const Response> actuals, const ScoreGuards& guards);

  private:
    std::vector<int> ids_;
    std::vector<double> scores_;
    std::vector<StepErrors> history_;
    bool keep_history_ = true;
};

/// Normalizes errors by |setpoint| then by the L2 norm over DCAs and moves
/// every score by minus the mean of the P and Q parts, clamped to [0, 1].
/// Clearings must list the ledger's DCAs in the ledger's order.
CommitmentLedger update_scores(CommitmentLedger ledger, std::span<const Schedule> clearings,
                               std::span<const Response> actuals, const ScoreGuards& guards = {});

/// The per-step normalized error vector: e_j / max(|sp_j|, floor), then
/// divided by its L2 norm (all zeros when the norm vanishes).
std::vector<double> normalized_errors(std::span<const double> raw, std::span<const double> setpoints,
                                      const ScoreGuards& guards = {});

struct DcaBehaviour {
    double follow_prob = 1.0;
    double overshoot_scale = 0.5;
    double noise_scale = 0.0;
};

struct ResponseModel {
    std::vector<DcaBehaviour> dcas;  // aligned with the clearing order
    std::uint64_t seed = 0;
};

/// Actual injections given the clearing. Deterministic in (seed, step, smo).
std::vector<Response> simulate_response(const ResponseModel& model, std::span<const Schedule> clearing,
                                        std::uint64_t step, int smo = 0);

}  // namespace lem::commitment
