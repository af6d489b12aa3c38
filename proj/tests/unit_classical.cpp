#include <cmath>
#include <vector>

#include "doctest.h"
#include "qnest/classical.hpp"
#include "qnest/problems.hpp"
#include "qnest/stats.hpp"

using namespace qnest;

namespace {

// Everything dyadic: phi values on a 1/4 grid, affine coefficients on a
// 2^-20 grid, so the antithetic difference cancels exactly in floating point.
NestedProblem dyadic_affine_problem(RngStream& coeff_rng) {
    double a = (double(coeff_rng.uniform_int(1 << 21)) - double(1 << 20)) * 0x1.0p-19;
    double b = (double(coeff_rng.uniform_int(1 << 21)) - double(1 << 20)) * 0x1.0p-19;
    NestedProblem p;
    p.name = "dyadic-affine";
    p.dim = 1;
    p.gen_x = [](RngStream& rng) { return double(rng.uniform_int(64)) * 0x1.0p-5; };
    p.gen_y = [](double, RngStream& rng) { return double(rng.uniform_int(9)) * 0.25; };
    p.phi = [](double, double y) { return y; };
    p.g = [a, b](double x, double z) { return a * z + b * x; };
    p.lipschitz_k = std::abs(a) > 0 ? std::abs(a) : 1.0;
    p.second_moment_v = 4.0;
    p.clip_lo = -2.0;
    p.clip_hi = 2.0;
    return p;
}

}  // namespace

TEST_CASE("nested mc returns a constant integrand exactly") {
    NestedProblem p = make_identity_problem({IdentityKind::point_mass, 3.0});
    RngStream rng(1);
    for (auto [m, n] : {std::pair<int, int>{1, 1}, {7, 3}, {33, 17}}) {
        EstimateResult res = nested_mc_estimate(p, m, n, rng);
        CHECK(res.value == 3.0);
    }
}

TEST_CASE("nested mc single-draw ledger") {
    NestedProblem p = problem_by_name("coc");
    RngStream rng(2);
    EstimateResult res = nested_mc_estimate(p, 1, 1, rng);
    CHECK(res.ledger.gen_x_calls == 1);
    CHECK(res.ledger.gen_y_calls == 1);
    CHECK(res.ledger.phi_evals == 1);
    CHECK(res.ledger.g_evals == 1);
    CHECK(res.ledger.quantum_charged == 0);
    CHECK_THROWS_AS(nested_mc_estimate(p, 0, 1, rng), std::invalid_argument);
}

TEST_CASE("nested mc error stays within the composite bound on the gaussian toy") {
    NestedProblem p = make_identity_problem({IdentityKind::gaussian});
    const double truth = p.ground_truth->value;
    const std::uint64_t m = 4096, n = 4096;
    const double bound =
        4.0 * std::sqrt(p.outer_variance_s / double(m) +
                        p.lipschitz_k * p.lipschitz_k * p.second_moment_v / double(n));
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed) {
        RngStream rng(seed);
        EstimateResult res = nested_mc_estimate(p, m, n, rng);
        if (std::abs(res.value - truth) <= bound) ++ok;
    }
    CHECK(ok >= 95);
}

TEST_CASE("antithetic cancellation is exact for affine g") {
    RngStream coeff(31);
    for (int trial = 0; trial < 20; ++trial) {
        NestedProblem p = dyadic_affine_problem(coeff);
        RngStream rng(trial);
        for (int l = 1; l <= 8; ++l)
            for (int rep = 0; rep < 25; ++rep) {
                auto [delta, led] = classical_level_sample(p, l, rng);
                REQUIRE(delta == 0.0);
            }
    }
}

TEST_CASE("level-0 draw consumes exactly one query of each kind") {
    NestedProblem p = problem_by_name("gauss-toy");
    RngStream rng(4);
    auto [delta, led] = classical_level_sample(p, 0, rng);
    CHECK(led.gen_x_calls == 1);
    CHECK(led.gen_y_calls == 1);
    CHECK(led.phi_evals == 1);
    CHECK(led.g_evals == 1);

    auto [d1, led1] = classical_level_sample(p, 3, rng);
    CHECK(led1.gen_x_calls == 1);
    CHECK(led1.gen_y_calls == 8);
    CHECK(led1.phi_evals == 8);
    CHECK(led1.g_evals == 3);
}

TEST_CASE("level-difference second moment decays at the 2^-l rate") {
    NestedProblem p = problem_by_name("gauss-toy");
    const double bound_const = 2.0 * p.lipschitz_k * p.lipschitz_k * p.second_moment_v;
    RngStream rng(5);
    for (int l = 1; l <= 6; ++l) {
        RngStream lrng = rng.child(l);
        RunningStats sq;
        for (int i = 0; i < 100000; ++i) {
            auto [delta, led] = classical_level_sample(p, l, lrng);
            sq.add(delta * delta);
        }
        CHECK(sq.mean() <= bound_const * std::exp2(-l) * 1.2);
    }
}

TEST_CASE("partial sums telescope to the plain average and the bias decays") {
    NestedProblem p = problem_by_name("gauss-toy");
    const int reps = 100000;
    const int l = 3;
    RngStream rng(6);

    RunningStats summed;
    for (int i = 0; i < reps; ++i) {
        double acc = 0.0;
        for (int k = 0; k <= l; ++k) {
            auto [delta, led] = classical_level_sample(p, k, rng);
            acc += delta;
        }
        summed.add(acc);
    }
    RunningStats direct;
    CostLedger led;
    RngStream rng2(7);
    for (int i = 0; i < reps; ++i) {
        double x = p.sample_x(rng2, led);
        RunningStats inner;
        for (int j = 0; j < (1 << l); ++j) {
            double y = p.sample_y(x, rng2, led);
            inner.add(p.eval_phi(x, y, led));
        }
        direct.add(p.eval_g(x, inner.mean(), led));
    }
    double gap = std::abs(summed.mean() - direct.mean());
    double se = std::sqrt(summed.std_error() * summed.std_error() +
                          direct.std_error() * direct.std_error());
    CHECK(gap <= 4.0 * se);

    // |E[sum_{k<=l} Delta_k] - truth| <= K sqrt(V) 2^{-l/2} * 1.5
    const double ksv = p.lipschitz_k * std::sqrt(p.second_moment_v);
    RngStream rng3(8);
    for (int lev = 1; lev <= 8; lev += 7) {
        RunningStats s;
        for (int i = 0; i < 30000; ++i) {
            double acc = 0.0;
            for (int k = 0; k <= lev; ++k) {
                auto [delta, dl] = classical_level_sample(p, k, rng3);
                acc += delta;
            }
            s.add(acc);
        }
        CHECK(std::abs(s.mean() - p.ground_truth->value) <=
              ksv * std::exp2(-0.5 * lev) * 1.5 + 4.0 * s.std_error());
    }
}

TEST_CASE("plan_schedule regimes and validation") {
    MlmcSchedule eq = plan_schedule(0.5, 1.0, 1.0, 0.01, 1.0, 1.0, 1.0);
    CHECK(eq.regime == MlmcRegime::beta_eq_gamma);
    MlmcSchedule gt = plan_schedule(1.0, 2.0, 1.0, 0.01, 1.0, 1.0, 1.0);
    CHECK(gt.regime == MlmcRegime::beta_gt_gamma);
    MlmcSchedule lt = plan_schedule(1.0, 1.0, 2.0, 0.01, 1.0, 1.0, 1.0);
    CHECK(lt.regime == MlmcRegime::beta_lt_gamma);
    for (auto& s : {eq, gt, lt}) {
        CHECK(s.top_level >= 0);
        for (auto n : s.replications) CHECK(n >= 1);
    }
    CHECK_THROWS_AS(plan_schedule(0.5, 1, 1, 0.5, 1, 1, 1), std::invalid_argument);  // eps >= 1/e
    CHECK_THROWS_AS(plan_schedule(0.5, 1, 1, -0.1, 1, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(plan_schedule(0.4, 1, 1, 0.01, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("planned cost quadruples when eps halves in the beta > gamma regime") {
    for (int k = 6; k <= 8; ++k) {
        double eps = std::exp2(-k);
        double c1 = plan_schedule(1.0, 2.0, 1.0, eps, 1.0, 1.0, 1.0).planned_cost;
        double c2 = plan_schedule(1.0, 2.0, 1.0, eps / 2.0, 1.0, 1.0, 1.0).planned_cost;
        CHECK(c2 / c1 == doctest::Approx(4.0).epsilon(0.05));
    }
}

TEST_CASE("planned cost follows eps^-2 log^2 in the beta = gamma regime") {
    for (int k = 4; k <= 7; ++k) {
        double eps = std::exp2(-k);
        MlmcSchedule s = plan_schedule(0.5, 1.0, 1.0, eps, 1.0, 1.0, 1.0);
        double expect = 2.0 * (s.top_level + 1) * (s.top_level + 1) / (eps * eps);
        CHECK(s.planned_cost / expect == doctest::Approx(1.0).epsilon(0.3));
    }
}

TEST_CASE("mlmc on a linear problem reduces to the level-0 mean") {
    NestedProblem p = make_identity_problem({IdentityKind::point_mass, 3.0});
    RngStream rng(9);
    EstimateResult res = classical_mlmc_estimate(p, 0.1, rng);
    CHECK(res.value == 3.0);  // all level differences vanish exactly
}

TEST_CASE("mlmc hits the coc accuracy target in at least 90 of 100 seeds") {
    NestedProblem p = problem_by_name("coc");
    RngStream cal_rng(1000);
    CalibrationConstants cal = calibrate_classical(p, cal_rng);
    const double eps = 0.05;
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed) {
        RngStream rng(seed);
        EstimateResult res = classical_mlmc_estimate(p, eps, rng, &cal);
        if (std::abs(res.value - p.ground_truth->value) <= eps) ++ok;
    }
    CHECK(ok >= 90);
}

TEST_CASE("mlmc executed cost roughly quadruples per halving below 2^-5") {
    NestedProblem p = problem_by_name("coc");
    RngStream cal_rng(1001);
    CalibrationConstants cal = calibrate_classical(p, cal_rng);
    std::vector<double> costs;
    for (int k = 5; k <= 7; ++k) {
        RngStream rng(50 + k);
        EstimateResult res = classical_mlmc_estimate(p, std::exp2(-k), rng, &cal);
        costs.push_back(double(res.ledger.classical_total()));
    }
    for (std::size_t i = 0; i + 1 < costs.size(); ++i) {
        double ratio = costs[i + 1] / costs[i];
        CHECK(ratio >= 3.4);
        CHECK(ratio <= 5.2);
    }
}

TEST_CASE("fitted sequence parameters match the classical rates") {
    NestedProblem p = problem_by_name("gauss-toy");
    LevelSampler sampler = make_classical_level_sampler(p);
    RngStream rng(12);
    SequenceParams par = estimate_sequence_params(sampler, 7, 10000, rng);
    CHECK(!par.alpha_degenerate);
    CHECK(!par.beta_degenerate);
    CHECK(!par.gamma_degenerate);
    CHECK(std::abs(par.alpha_hat - 0.5) <= 0.3);
    CHECK(std::abs(par.beta_hat - 1.0) <= 0.3);
    CHECK(std::abs(par.gamma_hat - 1.0) <= 0.3);
}

TEST_CASE("deterministic power-law sampler fits alpha exactly and flags beta") {
    LevelSampler sampler = [](int level, RngStream&) {
        CostLedger led;
        led.phi_evals = std::uint64_t{1} << level;
        return std::make_pair(std::ldexp(1.0, -level), led);
    };
    RngStream rng(13);
    SequenceParams par = estimate_sequence_params(sampler, 6, 1000, rng);
    CHECK(par.alpha_hat == 1.0);
    CHECK(par.beta_degenerate);
    CHECK(par.gamma_hat == 1.0);
    CHECK_THROWS_AS(estimate_sequence_params(sampler, 2, 1000, rng), std::invalid_argument);
    CHECK_THROWS_AS(estimate_sequence_params(sampler, 6, 10, rng), std::invalid_argument);
}

TEST_CASE("same seed gives bit-identical value and ledger") {
    NestedProblem p = problem_by_name("coc");
    RngStream r1(77), r2(77);
    EstimateResult a = classical_mlmc_estimate(p, 0.05, r1);
    EstimateResult b = classical_mlmc_estimate(p, 0.05, r2);
    CHECK(a.value == b.value);
    CHECK(a.ledger == b.ledger);
}
