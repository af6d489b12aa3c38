#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "qnest/problem.hpp"

namespace qnest {

enum class MlmcRegime { beta_gt_gamma, beta_eq_gamma, beta_lt_gamma };

struct MlmcSchedule {
    int top_level = 0;
    std::vector<std::uint64_t> replications;  // N_0 .. N_L
    MlmcRegime regime = MlmcRegime::beta_eq_gamma;
    double planned_cost = 0.0;  // sum N_l * C_l with C_l = cost_const * 2^(gamma l)
};

// Chooses L so the bias budget bias_const * 2^(-alpha L) <= eps / sqrt(2) and
// allocates N_l proportional to sqrt(V_l / C_l), normalized so the variance
// budget sum V_l / N_l <= eps^2 / 2, with V_l = var_const * 2^(-beta l) and
// C_l = cost_const * 2^(gamma l).
MlmcSchedule plan_schedule(double alpha, double beta, double gamma, double eps,
                           double bias_const, double var_const, double cost_const);

struct EstimateResult {
    double value = 0.0;
    CostLedger ledger;
};

// Plain nested Monte Carlo: m outer draws, n conditional draws each.
EstimateResult nested_mc_estimate(const NestedProblem& p, std::uint64_t m, std::uint64_t n,
                                  RngStream& rng);

// One draw of the antithetic level sampler. Level 0 is a single plain draw;
// level l >= 1 draws 2^l conditional samples, splits them by generation
// order into odd/even halves and returns the fine-minus-coarse difference.
std::pair<double, CostLedger> classical_level_sample(const NestedProblem& p, int level,
                                                     RngStream& rng);

// Constants the scheduler runs on. The bias constant is the a-priori
// K*sqrt(V) bound; the variance and cost constants come from a pilot run,
// since the a-priori variance bounds can be loose by orders of magnitude.
struct CalibrationConstants {
    double bias_const = 1.0;
    double var_const = 1.0;
    double cost_const = 2.0;
    CostLedger pilot_cost;
};

CalibrationConstants calibrate_classical(const NestedProblem& p, RngStream& rng,
                                         int pilot_levels = 3, int replicates = 1000);

// Full MLMC estimator at accuracy eps with the (0.5, 1, 1) rate triple.
// Passing a precomputed calibration shares the pilot across runs; otherwise
// an internal pilot runs and is charged to the returned ledger.
EstimateResult classical_mlmc_estimate(const NestedProblem& p, double eps, RngStream& rng,
                                       const CalibrationConstants* calibration = nullptr);

using LevelSampler = std::function<std::pair<double, CostLedger>(int level, RngStream&)>;

LevelSampler make_classical_level_sampler(const NestedProblem& p);

struct SequenceParams {
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double gamma_hat = 0.0;
    bool alpha_degenerate = false;
    bool beta_degenerate = false;
    bool gamma_degenerate = false;
};

// Fits log2 of |E[Delta_l]|, Var[Delta_l] and per-draw cost against l over
// levels 1..max_level. A statistic that is identically zero is reported
// degenerate rather than guessed.
SequenceParams estimate_sequence_params(const LevelSampler& sampler, int max_level,
                                        int replicates, RngStream& rng);

}  // namespace qnest
