#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qnest/problem.hpp"

namespace qnest {

enum class IdentityKind { point_mass, uniform01, gaussian };

struct IdentitySpec {
    IdentityKind kind = IdentityKind::gaussian;
    double point_value = 3.0;  // point_mass only
};

// g(x,z) = z: the nested expectation collapses to E[phi].
NestedProblem make_identity_problem(const IdentitySpec& spec);

// Kinked toy with the conditional mean pinned at the kink: X ~ N(0,1),
// Y|X=x ~ N(x,1), phi(x,y) = y - x, g(x,z) = max(z,0). gamma(x) = 0 for all
// x and the true value is 0, so the classical antithetic sampler attains its
// generic rates instead of over-achieving them.
NestedProblem make_gauss_toy();

struct CocJointSpec {
    double x_lo = 0.0;
    double x_hi = 2.0;
    bool y_copies_x = false;  // deterministic Y = x
    double y_width = 2.0;     // otherwise Y | X=x ~ uniform[x, x + y_width]
};

// Call-on-a-call option: phi(x,y) = max(y-k, 0), g(x,z) = max(z-k, 0),
// supports confined to [-a, b].
NestedProblem make_coc_option(double a, double b, double strike_k, const CocJointSpec& joint);

// Bayesian design toy, first term of the expected information loss:
// phi(x,y) = P(X=x|Y=y) from a column-stochastic table with entries in
// [floor_c, 1], g(x,z) = log z. Y is uniform on its support.
// table[x][y] = P(X=x | Y=y); for each y the column over x sums to 1.
NestedProblem make_bayes_design_toy(int num_x, int num_y,
                                    const std::vector<std::vector<double>>& table,
                                    double floor_c);

// Discrete EVPPI first term: phi = (f_1..f_d), g(x,z) = max_k z_k, with X and
// Y uniform on {0..num_x-1} x {0..num_y-1}. payoff[k][x][y] = f_k(x,y).
NestedProblem make_evppi_discrete(int d, int num_x,
                                  const std::vector<std::vector<std::vector<double>>>& payoff,
                                  double bound_v);

// CLI-addressable constructors with canonical parameters.
NestedProblem problem_by_name(const std::string& name);
const std::vector<std::string>& problem_names();

// Ground-truth sidecar: "<value> <resolution> <provenance>" in dir/<name>.truth.
void write_truth_sidecar(const NestedProblem& p, const std::string& dir);
std::optional<GroundTruth> read_truth_sidecar(const std::string& name, const std::string& dir);

// Composite Simpson rule on [lo, hi] with n intervals (n made even).
double simpson(const std::function<double(double)>& f, double lo, double hi, int n);

}  // namespace qnest
