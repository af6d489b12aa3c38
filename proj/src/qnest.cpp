#include "qnest/qnest.hpp"

#include <cmath>
#include <stdexcept>

namespace qnest {

namespace {

constexpr std::uint64_t kLevelTag = 0x51;
constexpr std::uint64_t kRepTag = 0x52;

double inner_eps(const NestedProblem& p, int level) {
    return std::exp2(-(level + 1)) / p.lipschitz_k;
}

double inner_delta(const NestedProblem& p, int level) {
    double raw = std::exp2(-(2 * level + 1)) /
                 (4.0 * p.lipschitz_k * p.lipschitz_k * p.second_moment_v);
    // When 4 K^2 V < 2^-(2l+1) the schedule asks for a failure probability
    // above 1. Capping at 1/2 keeps the oracle contract meaningful and only
    // tightens the error budget the level bounds rely on.
    return std::min(raw, 0.5);
}

}  // namespace

std::uint64_t b_level_charge(const NestedProblem& p, int level) {
    if (p.second_moment_v == 0.0) return 1;  // a single g evaluation
    const double sigma = std::sqrt(p.second_moment_v);
    const double delta = inner_delta(p, level) / p.dim;
    std::uint64_t per_coord =
        checked_mul(quantum_query_count(sigma, inner_eps(p, level), delta), 2);
    return checked_add(checked_mul(per_coord, static_cast<std::uint64_t>(p.dim)), 1);
}

std::uint64_t a_level_charge(const NestedProblem& p, int level) {
    std::uint64_t c = checked_add(1, b_level_charge(p, level));
    if (level >= 1) c = checked_add(c, b_level_charge(p, level - 1));
    return c;
}

std::pair<double, CostLedger> b_level(const NestedProblem& p, double x, int level,
                                      const OracleMode& mode, RngStream& rng) {
    if (level < 0) throw std::invalid_argument("b_level: negative level");
    CostLedger led;

    if (p.second_moment_v == 0.0) {
        // E[phi^2 | x] = 0 forces gamma(x) = 0; the clip region collapses to {0}.
        if (p.dim == 1) return {p.eval_g(x, 0.0, led), led};
        std::vector<double> zero(p.dim, 0.0);
        return {p.eval_g_vec(x, zero, led), led};
    }

    const double sigma = std::sqrt(p.second_moment_v);
    const double eps = inner_eps(p, level);
    const double delta = inner_delta(p, level) / p.dim;

    if (p.dim == 1) {
        MeanSampler sampler;
        sampler.draw = [&p, x](RngStream& r, CostLedger& l2) {
            double y = p.sample_y(x, r, l2);
            return p.eval_phi(x, y, l2);
        };
        sampler.charge_per_call = 2;  // one Gen_Y query plus one phi query
        if (p.conditional_mean) sampler.true_mean = p.conditional_mean(x);
        MeanEstimate est = quantum_mean_estimate(sampler, sigma, eps, delta, mode, rng);
        led += est.ledger;
        double phi_hat = clip_to(est.value, p.clip_lo, p.clip_hi);
        return {p.eval_g(x, phi_hat, led), led};
    }

    std::vector<double> gamma_hat(p.dim);
    std::vector<double> truth(p.dim);
    bool has_mean = static_cast<bool>(p.conditional_mean_vec);
    if (has_mean) p.conditional_mean_vec(x, truth);
    std::vector<double> buf(p.dim);
    for (int k = 0; k < p.dim; ++k) {
        MeanSampler sampler;
        sampler.draw = [&p, &buf, x, k](RngStream& r, CostLedger& l2) {
            double y = p.sample_y(x, r, l2);
            p.eval_phi_vec(x, y, buf, l2);
            return buf[k];
        };
        sampler.charge_per_call = 2;
        if (has_mean) sampler.true_mean = truth[k];
        MeanEstimate est = quantum_mean_estimate(sampler, sigma, eps, delta, mode, rng);
        led += est.ledger;
        gamma_hat[k] = clip_to(est.value, p.clip_lo, p.clip_hi);
    }
    return {p.eval_g_vec(x, gamma_hat, led), led};
}

LevelOutput a_level(const NestedProblem& p, int level, const OracleMode& mode, RngStream& rng) {
    if (level < 0) throw std::invalid_argument("a_level: negative level");
    LevelOutput out;
    out.level = level;
    double x = p.sample_x(rng, out.ledger);
    auto [fine, led_fine] = b_level(p, x, level, mode, rng);
    out.ledger += led_fine;
    if (level == 0) {
        out.delta = fine;
        return out;
    }
    auto [coarse, led_coarse] = b_level(p, x, level - 1, mode, rng);
    out.ledger += led_coarse;
    out.delta = fine - coarse;
    return out;
}

EstimateResult q_nest_expect_08(const NestedProblem& p, double eps, const OracleMode& mode,
                                RngStream& rng, std::vector<LevelDiagnostic>* diagnostics) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("q_nest_expect_08: eps in (0,1)");
    const int L = static_cast<int>(std::ceil(std::log2(2.0 / eps)));
    const double eps_level = eps / (2.0 * L + 2.0);

    EstimateResult out;
    for (int l = 0; l <= L; ++l) {
        const double delta_level = std::pow(0.1, l + 1);
        const double sigma = l == 0 ? std::sqrt(2.0 + 2.0 * p.outer_variance_s)
                                    : std::sqrt(10.0) * std::exp2(-l);
        MeanSampler sampler;
        sampler.draw = [&p, &mode, l](RngStream& r, CostLedger& led) {
            LevelOutput lo = a_level(p, l, mode, r);
            led += lo.ledger;
            return lo.delta;
        };
        sampler.charge_per_call = a_level_charge(p, l);
        if (p.ground_truth) sampler.true_mean = l == 0 ? p.ground_truth->value : 0.0;
        RngStream lrng = rng.child(kLevelTag, static_cast<std::uint64_t>(l));
        MeanEstimate est = quantum_mean_estimate(sampler, sigma, eps_level, delta_level, mode, lrng);
        out.value += est.value;
        out.ledger += est.ledger;
        if (diagnostics)
            diagnostics->push_back(LevelDiagnostic{l, est.value, eps_level, delta_level});
    }
    return out;
}

int median_repetitions(double delta) {
    if (!(delta > 0.0 && delta < 0.5))
        throw std::invalid_argument("median_repetitions: delta must lie in (0, 0.5)");
    int n = static_cast<int>(std::ceil(std::log(1.0 / delta) / 0.18));
    if (n < 1) n = 1;
    if (n % 2 == 0) ++n;
    return n;
}

EstimateResult q_nest_expect(const NestedProblem& p, double eps, double delta,
                             const OracleMode& mode, RngStream& rng) {
    const int reps = median_repetitions(delta);
    EstimateResult out;
    std::vector<double> values;
    values.reserve(reps);
    for (int r = 0; r < reps; ++r) {
        RngStream rrng = rng.child(kRepTag, static_cast<std::uint64_t>(r));
        EstimateResult one = q_nest_expect_08(p, eps, mode, rrng);
        values.push_back(one.value);
        out.ledger += one.ledger;
    }
    out.value = median(values);
    return out;
}

EstimateResult qa_mlmc_estimate(const NestedProblem& p, double eps, const OracleMode& mode,
                                RngStream& rng) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("qa_mlmc_estimate: eps in (0,1)");
    const double ksv = p.lipschitz_k * std::sqrt(p.second_moment_v);
    const double need = std::sqrt(2.0) * ksv / eps;
    const int L = need > 1.0 ? static_cast<int>(std::ceil(2.0 * std::log2(need))) : 0;
    const double eps_level = eps / (2.0 * L + 2.0);

    EstimateResult out;
    for (int l = 0; l <= L; ++l) {
        const double delta_level = std::pow(0.1, l + 1);
        const double sigma = std::sqrt(2.0) * ksv * std::exp2(-0.5 * l);
        MeanSampler sampler;
        sampler.draw = [&p, l](RngStream& r, CostLedger& led) {
            auto [v, dl] = classical_level_sample(p, l, r);
            led += dl;
            return v;
        };
        sampler.charge_per_call =
            l == 0 ? 4 : checked_add(std::uint64_t{1} << (l + 1), 4);
        if (p.ground_truth) sampler.true_mean = l == 0 ? p.ground_truth->value : 0.0;
        RngStream lrng = rng.child(kLevelTag, static_cast<std::uint64_t>(l));
        MeanEstimate est = quantum_mean_estimate(sampler, sigma, eps_level, delta_level, mode, lrng);
        out.value += est.value;
        out.ledger += est.ledger;
    }
    return out;
}

LevelSampler make_quantum_level_sampler(const NestedProblem& p, OracleMode mode) {
    return [p, mode](int level, RngStream& rng) {
        LevelOutput lo = a_level(p, level, mode, rng);
        return std::make_pair(lo.delta, lo.ledger);
    };
}

}  // namespace qnest
