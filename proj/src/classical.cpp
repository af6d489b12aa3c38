#include "qnest/classical.hpp"

#include <cmath>
#include <stdexcept>

#include "qnest/stats.hpp"

namespace qnest {

namespace {
constexpr std::uint64_t kPilotTag = 0x9a17;
constexpr std::uint64_t kLevelTag = 0x11;
}  // namespace

MlmcSchedule plan_schedule(double alpha, double beta, double gamma, double eps,
                           double bias_const, double var_const, double cost_const) {
    if (!(eps > 0.0 && eps < 1.0 / std::exp(1.0)))
        throw std::invalid_argument("plan_schedule: eps must lie in (0, 1/e)");
    if (!(alpha > 0.0) || alpha < 0.5 * std::max(beta, gamma) - 1e-12)
        throw std::invalid_argument("plan_schedule: requires alpha >= max(beta, gamma)/2");
    if (bias_const < 0.0 || var_const < 0.0 || !(cost_const > 0.0))
        throw std::invalid_argument("plan_schedule: bad constants");

    MlmcSchedule sched;
    sched.regime = beta > gamma   ? MlmcRegime::beta_gt_gamma
                   : beta < gamma ? MlmcRegime::beta_lt_gamma
                                  : MlmcRegime::beta_eq_gamma;

    double need = bias_const * std::sqrt(2.0) / eps;
    sched.top_level = need > 1.0 ? static_cast<int>(std::ceil(std::log2(need) / alpha)) : 0;

    const int L = sched.top_level;
    std::vector<double> vl(L + 1), cl(L + 1);
    double weight_sum = 0.0;
    for (int l = 0; l <= L; ++l) {
        vl[l] = var_const * std::exp2(-beta * l);
        cl[l] = cost_const * std::exp2(gamma * l);
        weight_sum += std::sqrt(vl[l] * cl[l]);
    }
    sched.replications.resize(L + 1);
    sched.planned_cost = 0.0;
    for (int l = 0; l <= L; ++l) {
        double ideal = vl[l] > 0.0
                           ? (2.0 / (eps * eps)) * std::sqrt(vl[l] / cl[l]) * weight_sum
                           : 0.0;
        sched.replications[l] = ideal < 1.0 ? 1 : static_cast<std::uint64_t>(std::ceil(ideal));
        sched.planned_cost += static_cast<double>(sched.replications[l]) * cl[l];
    }
    return sched;
}

EstimateResult nested_mc_estimate(const NestedProblem& p, std::uint64_t m, std::uint64_t n,
                                  RngStream& rng) {
    if (m < 1 || n < 1) throw std::invalid_argument("nested_mc: m, n must be positive");
    EstimateResult out;
    RunningStats outer;
    if (p.dim == 1) {
        for (std::uint64_t i = 0; i < m; ++i) {
            double x = p.sample_x(rng, out.ledger);
            RunningStats inner;
            for (std::uint64_t j = 0; j < n; ++j) {
                double y = p.sample_y(x, rng, out.ledger);
                inner.add(p.eval_phi(x, y, out.ledger));
            }
            outer.add(p.eval_g(x, inner.mean(), out.ledger));
        }
    } else {
        std::vector<RunningStats> inner(p.dim);
        std::vector<double> buf(p.dim), mean(p.dim);
        for (std::uint64_t i = 0; i < m; ++i) {
            double x = p.sample_x(rng, out.ledger);
            for (auto& s : inner) s = RunningStats{};
            for (std::uint64_t j = 0; j < n; ++j) {
                double y = p.sample_y(x, rng, out.ledger);
                p.eval_phi_vec(x, y, buf, out.ledger);
                for (int k = 0; k < p.dim; ++k) inner[k].add(buf[k]);
            }
            for (int k = 0; k < p.dim; ++k) mean[k] = inner[k].mean();
            outer.add(p.eval_g_vec(x, mean, out.ledger));
        }
    }
    out.value = outer.mean();
    return out;
}

std::pair<double, CostLedger> classical_level_sample(const NestedProblem& p, int level,
                                                     RngStream& rng) {
    if (level < 0) throw std::invalid_argument("classical_level_sample: negative level");
    CostLedger led;
    if (p.dim == 1) {
        double x = p.sample_x(rng, led);
        if (level == 0) {
            double y = p.sample_y(x, rng, led);
            double value = p.eval_g(x, p.eval_phi(x, y, led), led);
            return {value, led};
        }
        const std::uint64_t count = std::uint64_t{1} << level;
        double sum_odd = 0.0, sum_even = 0.0;
        for (std::uint64_t i = 1; i <= count; ++i) {
            double y = p.sample_y(x, rng, led);
            double v = p.eval_phi(x, y, led);
            if (i % 2 == 1) sum_odd += v; else sum_even += v;
        }
        // Power-of-two scalings keep the fine argument the exact average of
        // the two coarse arguments.
        double fine = std::ldexp(sum_even + sum_odd, -level);
        double coarse_e = std::ldexp(sum_even, -(level - 1));
        double coarse_o = std::ldexp(sum_odd, -(level - 1));
        double delta = p.eval_g(x, fine, led) -
                       0.5 * (p.eval_g(x, coarse_e, led) + p.eval_g(x, coarse_o, led));
        return {delta, led};
    }

    std::vector<double> buf(p.dim);
    double x = p.sample_x(rng, led);
    if (level == 0) {
        double y = p.sample_y(x, rng, led);
        p.eval_phi_vec(x, y, buf, led);
        return {p.eval_g_vec(x, buf, led), led};
    }
    const std::uint64_t count = std::uint64_t{1} << level;
    std::vector<double> sum_odd(p.dim, 0.0), sum_even(p.dim, 0.0);
    for (std::uint64_t i = 1; i <= count; ++i) {
        double y = p.sample_y(x, rng, led);
        p.eval_phi_vec(x, y, buf, led);
        auto& dst = (i % 2 == 1) ? sum_odd : sum_even;
        for (int k = 0; k < p.dim; ++k) dst[k] += buf[k];
    }
    std::vector<double> fine(p.dim), coarse_e(p.dim), coarse_o(p.dim);
    for (int k = 0; k < p.dim; ++k) {
        fine[k] = std::ldexp(sum_even[k] + sum_odd[k], -level);
        coarse_e[k] = std::ldexp(sum_even[k], -(level - 1));
        coarse_o[k] = std::ldexp(sum_odd[k], -(level - 1));
    }
    double delta = p.eval_g_vec(x, fine, led) -
                   0.5 * (p.eval_g_vec(x, coarse_e, led) + p.eval_g_vec(x, coarse_o, led));
    return {delta, led};
}

CalibrationConstants calibrate_classical(const NestedProblem& p, RngStream& rng,
                                         int pilot_levels, int replicates) {
    if (pilot_levels < 1 || replicates < 2)
        throw std::invalid_argument("calibrate_classical: bad pilot size");
    CalibrationConstants cal;
    cal.bias_const = p.lipschitz_k * std::sqrt(p.second_moment_v);

    double var0 = 0.0, var_scaled_max = 0.0, cost_rate = 2.0;
    for (int l = 0; l <= pilot_levels; ++l) {
        RngStream lrng = rng.child(kPilotTag, static_cast<std::uint64_t>(l));
        RunningStats stats;
        CostLedger led;
        for (int i = 0; i < replicates; ++i) {
            auto [v, dl] = classical_level_sample(p, l, lrng);
            stats.add(v);
            led += dl;
        }
        cal.pilot_cost += led;
        double per_draw_cost =
            static_cast<double>(led.classical_total()) / static_cast<double>(replicates);
        if (l == 0) {
            var0 = stats.variance();
        } else {
            var_scaled_max = std::max(var_scaled_max, stats.variance() * std::exp2(l));
            cost_rate = per_draw_cost / std::exp2(l);
        }
    }
    // Safety factor 2 on the extrapolated variance: pilot estimates are
    // noisy and under-allocation directly breaks the accuracy target.
    cal.var_const = std::max(var0, 2.0 * var_scaled_max);
    if (cal.var_const <= 0.0) cal.var_const = 0.0;
    cal.cost_const = cost_rate;
    return cal;
}

EstimateResult classical_mlmc_estimate(const NestedProblem& p, double eps, RngStream& rng,
                                       const CalibrationConstants* calibration) {
    EstimateResult out;
    CalibrationConstants local;
    if (calibration == nullptr) {
        local = calibrate_classical(p, rng);
        out.ledger += local.pilot_cost;
        calibration = &local;
    }
    MlmcSchedule sched = plan_schedule(0.5, 1.0, 1.0, eps, calibration->bias_const,
                                       calibration->var_const, calibration->cost_const);
    double total = 0.0;
    for (int l = 0; l <= sched.top_level; ++l) {
        RngStream lrng = rng.child(kLevelTag, static_cast<std::uint64_t>(l));
        RunningStats stats;
        for (std::uint64_t i = 0; i < sched.replications[l]; ++i) {
            auto [v, dl] = classical_level_sample(p, l, lrng);
            stats.add(v);
            out.ledger += dl;
        }
        total += stats.mean();
    }
    out.value = total;
    return out;
}

LevelSampler make_classical_level_sampler(const NestedProblem& p) {
    return [p](int level, RngStream& rng) { return classical_level_sample(p, level, rng); };
}

SequenceParams estimate_sequence_params(const LevelSampler& sampler, int max_level,
                                        int replicates, RngStream& rng) {
    if (max_level < 3) throw std::invalid_argument("estimate_sequence_params: max_level >= 3");
    if (replicates < 1000)
        throw std::invalid_argument("estimate_sequence_params: replicates >= 1000");

    std::vector<double> ls, log_mean, log_var, log_cost;
    bool mean_zero = false, var_zero = false, cost_zero = false;
    for (int l = 1; l <= max_level; ++l) {
        RngStream lrng = rng.child(kLevelTag, static_cast<std::uint64_t>(l));
        RunningStats stats;
        CostLedger led;
        for (int i = 0; i < replicates; ++i) {
            auto [v, dl] = sampler(l, lrng);
            stats.add(v);
            led += dl;
        }
        double cost = led.quantum_charged > 0
                          ? static_cast<double>(led.quantum_charged)
                          : static_cast<double>(led.classical_total());
        cost /= static_cast<double>(replicates);
        ls.push_back(static_cast<double>(l));
        if (std::abs(stats.mean()) == 0.0) mean_zero = true;
        else log_mean.push_back(std::log2(std::abs(stats.mean())));
        if (stats.variance() == 0.0) var_zero = true;
        else log_var.push_back(std::log2(stats.variance()));
        if (cost == 0.0) cost_zero = true;
        else log_cost.push_back(std::log2(cost));
    }

    SequenceParams out;
    out.alpha_degenerate = mean_zero;
    out.beta_degenerate = var_zero;
    out.gamma_degenerate = cost_zero;
    if (!mean_zero) out.alpha_hat = -ols_fit(ls, log_mean).slope;
    if (!var_zero) out.beta_hat = -ols_fit(ls, log_var).slope;
    if (!cost_zero) out.gamma_hat = ols_fit(ls, log_cost).slope;
    return out;
}

}  // namespace qnest
