#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qnest/classical.hpp"
#include "qnest/mean_oracle.hpp"
#include "qnest/problem.hpp"
#include "qnest/stats.hpp"

namespace qnest {

struct LevelOutput {
    int level = 0;
    double delta = 0.0;
    CostLedger ledger;
};

// Projection onto [lo, hi]. Since the true conditional mean lies in the clip
// interval, clipping never increases an estimate's error.
inline double clip_to(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Deterministic charged cost of one call, used as the per-query price when an
// outer oracle estimates over these samplers.
std::uint64_t b_level_charge(const NestedProblem& p, int level);
std::uint64_t a_level_charge(const NestedProblem& p, int level);

// Estimates the conditional mean at x with accuracy 2^-(l+1)/K and failure
// probability 2^-(2l+1)/(4 K^2 V), clips it into the valid inner range, and
// returns g(x, <clipped estimate>). A zero-variance integrand (V = 0) forces
// the conditional mean to 0, so the call short-circuits to g(x, 0) with no
// charged inner queries.
std::pair<double, CostLedger> b_level(const NestedProblem& p, double x, int level,
                                      const OracleMode& mode, RngStream& rng);

// Level sampler for the quantum sequence: level 0 evaluates b_level on a
// fresh X; level l >= 1 runs levels l and l-1 on the same x with independent
// inner randomness and returns the difference.
LevelOutput a_level(const NestedProblem& p, int level, const OracleMode& mode, RngStream& rng);

struct LevelDiagnostic {
    int level = 0;
    double estimate = 0.0;
    double eps_level = 0.0;
    double delta_level = 0.0;
};

// Estimates the nested expectation within eps with success probability 0.8:
// L = ceil(log2(2/eps)) levels, per-level accuracy eps/(2L+2) and failure
// schedule 0.1^(l+1).
EstimateResult q_nest_expect_08(const NestedProblem& p, double eps, const OracleMode& mode,
                                RngStream& rng, std::vector<LevelDiagnostic>* diagnostics = nullptr);

// ceil(ln(1/delta)/0.18), bumped to the next odd integer.
int median_repetitions(double delta);

// Median-of-repetitions wrapper: boosts the 0.8 success probability to
// 1 - delta for delta in (0, 0.5).
EstimateResult q_nest_expect(const NestedProblem& p, double eps, double delta,
                             const OracleMode& mode, RngStream& rng);

// Baseline: per-level quantum mean estimation applied to the classical
// antithetic level samplers, with L = ceil(2 log2(sqrt(2) K sqrt(V) / eps))
// reflecting the sequence's 0.5 bias rate and per-level deviation bound
// sqrt(2 K^2 V) * 2^(-l/2).
EstimateResult qa_mlmc_estimate(const NestedProblem& p, double eps, const OracleMode& mode,
                                RngStream& rng);

// Quantum A_l as a generic level sampler (for rate fitting).
LevelSampler make_quantum_level_sampler(const NestedProblem& p, OracleMode mode);

}  // namespace qnest
