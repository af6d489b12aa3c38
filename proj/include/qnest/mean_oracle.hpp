#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "qnest/cost_ledger.hpp"
#include "qnest/rng.hpp"

namespace qnest {

enum class OracleKind { surrogate, idealized, adversarial };

struct OracleMode {
    OracleKind kind = OracleKind::surrogate;
    double p_fail = 0.0;            // adversarial failure probability
    double corruption_scale = 0.0;  // adversarial offset added to the true mean

    static OracleMode Surrogate() { return {OracleKind::surrogate, 0.0, 0.0}; }
    static OracleMode Idealized() { return {OracleKind::idealized, 0.0, 0.0}; }
    static OracleMode Adversarial(double p_fail, double corruption) {
        return {OracleKind::adversarial, p_fail, corruption};
    }
};

const char* oracle_mode_name(const OracleMode& mode);
OracleMode oracle_mode_from_name(const std::string& name, double p_fail, double corruption);

// A randomized scalar procedure the oracle can query.
//
// draw() performs one classical execution, recording its real cost.
// charge_per_call is the deterministic per-query cost charged by the quantum
// cost model; for composite samplers it already folds in the charged cost of
// everything one query executes.
struct MeanSampler {
    std::function<double(RngStream&, CostLedger&)> draw;
    std::uint64_t charge_per_call = 1;
    std::optional<double> true_mean;  // required by idealized/adversarial modes
};

struct MeanEstimate {
    double value = 0.0;
    double target_eps = 0.0;
    double target_delta = 0.0;
    CostLedger ledger;
};

// Number of charged oracle queries: ceil(sigma/eps) * ceil(ln(1/delta) + 1),
// each factor at least 1. Depends only on the arguments, never on drawn
// values.
std::uint64_t quantum_query_count(double sigma_bound, double eps, double delta);

struct SurrogatePlan {
    std::uint64_t groups;     // ceil(24 ln(1/delta))
    std::uint64_t per_group;  // ceil(4 sigma^2 / eps^2)
};
SurrogatePlan surrogate_plan(double sigma_bound, double eps, double delta);

// Mean estimation with the quantum cost contract: the returned ledger charges
// quantum_charged = quantum_query_count(...) * sampler.charge_per_call in
// every mode.
//
// surrogate   - median of group means over real draws (Chebyshev gives each
//               group success >= 3/4; the median boosts it to 1 - delta).
//               Real draw costs land in the sampler counters and
//               classical_charged; nested analytic charges recorded by the
//               draws themselves are dropped, since charge_per_call already
//               accounts for them.
// idealized   - returns true_mean + uniform noise on [-eps, eps] with
//               probability 1 - delta, else true_mean +/- 1.1 eps.
// adversarial - fails with exactly p_fail, returning true_mean +
//               corruption_scale; otherwise as the idealized success branch.
MeanEstimate quantum_mean_estimate(const MeanSampler& sampler, double sigma_bound, double eps,
                                   double delta, const OracleMode& mode, RngStream& rng);

}  // namespace qnest
