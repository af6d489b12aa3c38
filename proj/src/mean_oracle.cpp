#include "qnest/mean_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnest/stats.hpp"

namespace qnest {

const char* oracle_mode_name(const OracleMode& mode) {
    switch (mode.kind) {
        case OracleKind::surrogate: return "surrogate";
        case OracleKind::idealized: return "idealized";
        case OracleKind::adversarial: return "adversarial";
    }
    return "?";
}

OracleMode oracle_mode_from_name(const std::string& name, double p_fail, double corruption) {
    if (name == "surrogate") return OracleMode::Surrogate();
    if (name == "idealized") return OracleMode::Idealized();
    if (name == "adversarial") return OracleMode::Adversarial(p_fail, corruption);
    throw std::invalid_argument("unknown oracle mode: " + name);
}

std::uint64_t quantum_query_count(double sigma_bound, double eps, double delta) {
    if (!(eps > 0.0)) throw std::invalid_argument("oracle: eps must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("oracle: delta must be in (0,1)");
    if (sigma_bound < 0.0) throw std::invalid_argument("oracle: sigma_bound must be nonnegative");
    auto at_least_one = [](double v) {
        return v < 1.0 ? std::uint64_t{1} : static_cast<std::uint64_t>(std::ceil(v));
    };
    return checked_mul(at_least_one(sigma_bound / eps), at_least_one(std::log(1.0 / delta) + 1.0));
}

SurrogatePlan surrogate_plan(double sigma_bound, double eps, double delta) {
    auto at_least_one = [](double v) {
        return v < 1.0 ? std::uint64_t{1} : static_cast<std::uint64_t>(std::ceil(v));
    };
    SurrogatePlan plan;
    plan.groups = at_least_one(24.0 * std::log(1.0 / delta));
    plan.per_group = at_least_one(4.0 * sigma_bound * sigma_bound / (eps * eps));
    return plan;
}

MeanEstimate quantum_mean_estimate(const MeanSampler& sampler, double sigma_bound, double eps,
                                   double delta, const OracleMode& mode, RngStream& rng) {
    MeanEstimate est;
    est.target_eps = eps;
    est.target_delta = delta;

    const std::uint64_t queries = quantum_query_count(sigma_bound, eps, delta);
    est.ledger.quantum_charged = checked_mul(queries, sampler.charge_per_call);

    switch (mode.kind) {
        case OracleKind::surrogate: {
            SurrogatePlan plan = surrogate_plan(sigma_bound, eps, delta);
            CostLedger scratch;
            std::vector<double> means;
            means.reserve(plan.groups);
            for (std::uint64_t gi = 0; gi < plan.groups; ++gi) {
                RunningStats group;
                for (std::uint64_t i = 0; i < plan.per_group; ++i)
                    group.add(sampler.draw(rng, scratch));
                means.push_back(group.mean());
            }
            est.value = median(means);
            // Keep the real sampling audit trail, drop nested analytic charges:
            // charge_per_call above already prices them.
            est.ledger.gen_x_calls = checked_add(est.ledger.gen_x_calls, scratch.gen_x_calls);
            est.ledger.gen_y_calls = checked_add(est.ledger.gen_y_calls, scratch.gen_y_calls);
            est.ledger.phi_evals = checked_add(est.ledger.phi_evals, scratch.phi_evals);
            est.ledger.g_evals = checked_add(est.ledger.g_evals, scratch.g_evals);
            est.ledger.classical_charged =
                checked_add(est.ledger.classical_charged,
                            checked_add(checked_mul(plan.groups, plan.per_group),
                                        scratch.classical_charged));
            break;
        }
        case OracleKind::idealized: {
            if (!sampler.true_mean)
                throw std::invalid_argument("idealized oracle requires a true-mean oracle");
            double mu = *sampler.true_mean;
            if (rng.uniform() < 1.0 - delta) {
                est.value = mu + rng.uniform(-eps, eps);
            } else {
                double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                est.value = mu + sign * 1.1 * eps;
            }
            break;
        }
        case OracleKind::adversarial: {
            if (!sampler.true_mean)
                throw std::invalid_argument("adversarial oracle requires a true-mean oracle");
            if (!(mode.p_fail >= 0.0 && mode.p_fail <= 1.0))
                throw std::invalid_argument("adversarial p_fail must be in [0,1]");
            double mu = *sampler.true_mean;
            if (rng.uniform() < mode.p_fail) {
                est.value = mu + mode.corruption_scale;
            } else {
                est.value = mu + rng.uniform(-eps, eps);
            }
            break;
        }
    }
    return est;
}

}  // namespace qnest
