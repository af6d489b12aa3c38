#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "qnest/cost_ledger.hpp"
#include "qnest/rng.hpp"

namespace qnest {

struct GroundTruth {
    double value = 0.0;
    double resolution = 0.0;  // grid step for quadrature, 0 for exact provenance
    std::string provenance;   // "closed-form", "quadrature", "enumeration"
};

// A nested-expectation problem: estimate E_X[ g(X, E_{Y|X}[phi(X,Y)]) ].
//
// gen_x/gen_y are the callers' only source of randomness; a problem holds no
// hidden RNG state and is safe to share across workers. phi may be
// vector-valued (dim > 1); the scalar members are the fast path for dim == 1.
struct NestedProblem {
    std::string name;
    int dim = 1;

    std::function<double(RngStream&)> gen_x;
    std::function<double(double, RngStream&)> gen_y;

    std::function<double(double, double)> phi;  // dim == 1
    std::function<double(double, double)> g;    // dim == 1
    std::function<void(double, double, std::span<double>)> phi_vec;   // dim > 1
    std::function<double(double, std::span<const double>)> g_vec;     // dim > 1

    double lipschitz_k = 1.0;      // K: |g(x,z1)-g(x,z2)| <= K|z1-z2|
    double second_moment_v = 0.0;  // V: E[phi(x,Y)^2 | X=x] <= V for all x
    double outer_variance_s = 0.0; // S: Var_X[g(X, gamma(X))] <= S

    // Valid range of inner values. Conditional-mean estimates are clipped to
    // it, and Lipschitz spot checks draw z from it. Defaults to
    // [-sqrt(V), sqrt(V)]; problems whose g has a smaller domain (log) narrow it.
    double clip_lo = 0.0;
    double clip_hi = 0.0;

    std::function<double(double)> conditional_mean;  // gamma(x); empty if not analytic
    std::function<void(double, std::span<double>)> conditional_mean_vec;
    std::optional<GroundTruth> ground_truth;

    // Second EVPPI term max_k E[f_k], reported alongside the nested first term.
    std::optional<double> evppi_second_term;

    bool has_conditional_mean() const {
        return dim == 1 ? static_cast<bool>(conditional_mean)
                        : static_cast<bool>(conditional_mean_vec);
    }

    double sample_x(RngStream& rng, CostLedger& led) const {
        led.gen_x_calls = checked_add(led.gen_x_calls, 1);
        return gen_x(rng);
    }
    double sample_y(double x, RngStream& rng, CostLedger& led) const {
        led.gen_y_calls = checked_add(led.gen_y_calls, 1);
        return gen_y(x, rng);
    }
    double eval_phi(double x, double y, CostLedger& led) const {
        led.phi_evals = checked_add(led.phi_evals, 1);
        return phi(x, y);
    }
    // One query evaluates the whole vector integrand.
    void eval_phi_vec(double x, double y, std::span<double> out, CostLedger& led) const {
        led.phi_evals = checked_add(led.phi_evals, 1);
        phi_vec(x, y, out);
    }
    double eval_g(double x, double z, CostLedger& led) const {
        led.g_evals = checked_add(led.g_evals, 1);
        return g(x, z);
    }
    double eval_g_vec(double x, std::span<const double> z, CostLedger& led) const {
        led.g_evals = checked_add(led.g_evals, 1);
        return g_vec(x, z);
    }
};

}  // namespace qnest
