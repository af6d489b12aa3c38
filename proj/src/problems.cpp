#include "qnest/problems.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace qnest {

double simpson(const std::function<double(double)>& f, double lo, double hi, int n) {
    if (n < 2) n = 2;
    if (n % 2 == 1) ++n;
    const double h = (hi - lo) / n;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) acc += f(lo + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

namespace {

double truncated_normal(double mean, double lo, double hi, RngStream& rng) {
    double z = mean + rng.normal();
    while (z < lo || z > hi) z = mean + rng.normal();
    return z;
}

// Density of N(0,1) truncated to [-3, 3].
double trunc3_density(double x) {
    static const double norm = std::erf(3.0 / std::sqrt(2.0));
    return std::exp(-0.5 * x * x) / (std::sqrt(2.0 * 3.14159265358979323846) * norm);
}

// gamma(x) = E[max(Y - k, 0)] for Y ~ uniform[x, x + w].
double coc_uniform_gamma(double x, double w, double k) {
    if (x >= k) return x + 0.5 * w - k;
    if (x + w <= k) return 0.0;
    double t = x + w - k;
    return t * t / (2.0 * w);
}

}  // namespace

NestedProblem make_identity_problem(const IdentitySpec& spec) {
    NestedProblem p;
    p.dim = 1;
    p.g = [](double, double z) { return z; };
    p.lipschitz_k = 1.0;

    switch (spec.kind) {
        case IdentityKind::point_mass: {
            double c = spec.point_value;
            p.name = "identity-point";
            p.gen_x = [](RngStream&) { return 0.0; };
            p.gen_y = [c](double, RngStream&) { return c; };
            p.phi = [](double, double y) { return y; };
            p.second_moment_v = c * c;
            p.outer_variance_s = 0.0;
            p.conditional_mean = [c](double) { return c; };
            p.ground_truth = GroundTruth{c, 0.0, "closed-form"};
            break;
        }
        case IdentityKind::uniform01: {
            p.name = "identity-uniform01";
            p.gen_x = [](RngStream&) { return 0.0; };
            p.gen_y = [](double, RngStream& rng) {
                return rng.uniform() < 0.5 ? 0.0 : 1.0;
            };
            p.phi = [](double, double y) { return y; };
            p.second_moment_v = 1.0;
            p.outer_variance_s = 0.0;
            p.conditional_mean = [](double) { return 0.5; };
            p.ground_truth = GroundTruth{0.5, 0.0, "closed-form"};
            break;
        }
        case IdentityKind::gaussian: {
            p.name = "identity";
            p.gen_x = [](RngStream& rng) { return truncated_normal(0.0, -3.0, 3.0, rng); };
            p.gen_y = [](double x, RngStream& rng) { return x + rng.normal(); };
            p.phi = [](double, double y) { return y; };
            // sup_x E[Y^2 | x] = x^2 + 1 <= 10 on the truncated support
            p.second_moment_v = 10.0;
            p.outer_variance_s = 1.0;  // Var[X] < 1 after truncation
            p.conditional_mean = [](double x) { return x; };
            const int n = 1 << 14;
            double mu = simpson([](double x) { return x * trunc3_density(x); }, -3.0, 3.0, n);
            p.ground_truth = GroundTruth{mu, 6.0 / n, "quadrature"};
            break;
        }
    }
    p.clip_lo = -std::sqrt(p.second_moment_v);
    p.clip_hi = std::sqrt(p.second_moment_v);
    return p;
}

NestedProblem make_gauss_toy() {
    NestedProblem p;
    p.name = "gauss-toy";
    p.dim = 1;
    p.gen_x = [](RngStream& rng) { return rng.normal(); };
    p.gen_y = [](double x, RngStream& rng) { return x + rng.normal(); };
    p.phi = [](double x, double y) { return y - x; };
    p.g = [](double, double z) { return z > 0.0 ? z : 0.0; };
    p.lipschitz_k = 1.0;
    p.second_moment_v = 1.0;   // E[(Y-x)^2 | x] = 1 exactly
    p.outer_variance_s = 0.0;  // g(x, gamma(x)) = 0 identically
    p.clip_lo = -1.0;
    p.clip_hi = 1.0;
    p.conditional_mean = [](double) { return 0.0; };
    p.ground_truth = GroundTruth{0.0, 0.0, "closed-form"};
    return p;
}

NestedProblem make_coc_option(double a, double b, double strike_k, const CocJointSpec& joint) {
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("coc: a, b must be nonnegative");
    if (strike_k <= 0.0) throw std::invalid_argument("coc: strike must be positive");
    const double lo = -a, hi = b;
    if (joint.x_lo < lo || joint.x_hi > hi || joint.x_lo > joint.x_hi)
        throw std::invalid_argument("coc: X support not confined to [-a, b]");
    if (joint.y_copies_x) {
        // Y = x stays inside the X support.
    } else {
        if (joint.y_width <= 0.0) throw std::invalid_argument("coc: y_width must be positive");
        if (joint.x_lo < lo || joint.x_hi + joint.y_width > hi)
            throw std::invalid_argument("coc: Y support not confined to [-a, b]");
    }

    NestedProblem p;
    p.name = "coc";
    p.dim = 1;
    const double k = strike_k;
    p.gen_x = [joint](RngStream& rng) { return rng.uniform(joint.x_lo, joint.x_hi); };
    if (joint.y_copies_x) {
        p.gen_y = [](double x, RngStream&) { return x; };
        p.conditional_mean = [k](double x) { return x > k ? x - k : 0.0; };
    } else {
        const double w = joint.y_width;
        p.gen_y = [w](double x, RngStream& rng) { return rng.uniform(x, x + w); };
        p.conditional_mean = [w, k](double x) { return coc_uniform_gamma(x, w, k); };
    }
    p.phi = [k](double, double y) { return y > k ? y - k : 0.0; };
    p.g = [k](double, double z) { return z > k ? z - k : 0.0; };
    p.lipschitz_k = 1.0;
    const double bound = std::max(b - k, a + k);
    p.second_moment_v = bound * bound;
    p.outer_variance_s = bound * bound;
    p.clip_lo = -bound;
    p.clip_hi = bound;

    // Outer 1-D quadrature over the inner conditional-mean quadrature; the
    // result is cached per parameter set since the tensor grid is not free.
    static std::mutex cache_mutex;
    static std::map<std::tuple<double, double, double, double, double, bool, double>, GroundTruth>
        cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto key = std::make_tuple(a, b, k, joint.x_lo, joint.x_hi, joint.y_copies_x, joint.y_width);
    auto it = cache.find(key);
    if (it == cache.end()) {
        const int n_outer = 1 << 13, n_inner = 1 << 12;
        auto gamma_quad = [&](double x) -> double {
            if (joint.y_copies_x) return std::max(x - k, 0.0);
            return simpson([&](double y) { return std::max(y - k, 0.0) / joint.y_width; },
                           x, x + joint.y_width, n_inner);
        };
        double span = joint.x_hi - joint.x_lo;
        double mu = span == 0.0
                        ? std::max(gamma_quad(joint.x_lo) - k, 0.0)
                        : simpson([&](double x) { return std::max(gamma_quad(x) - k, 0.0) / span; },
                                  joint.x_lo, joint.x_hi, n_outer);
        it = cache.emplace(key, GroundTruth{mu, span / n_outer, "quadrature"}).first;
    }
    p.ground_truth = it->second;
    return p;
}

NestedProblem make_bayes_design_toy(int num_x, int num_y,
                                    const std::vector<std::vector<double>>& table,
                                    double floor_c) {
    if (num_x < 1 || num_y < 1) throw std::invalid_argument("bayes: empty support");
    if (floor_c <= 0.0 || floor_c >= 1.0)
        throw std::invalid_argument("bayes: floor_c must lie in (0,1)");
    if (static_cast<int>(table.size()) != num_x)
        throw std::invalid_argument("bayes: table must have num_x rows");
    for (const auto& row : table) {
        if (static_cast<int>(row.size()) != num_y)
            throw std::invalid_argument("bayes: table rows must have num_y entries");
        for (double v : row)
            if (v < floor_c || v > 1.0)
                throw std::invalid_argument("bayes: table entry outside [floor_c, 1]");
    }
    for (int y = 0; y < num_y; ++y) {
        double col = 0.0;
        for (int x = 0; x < num_x; ++x) col += table[x][y];
        if (std::abs(col - 1.0) > 1e-9)
            throw std::invalid_argument("bayes: conditionals P(X|Y=y) must sum to 1");
    }

    // Marginals: Y uniform; P(x) = sum_y P(x|y) / num_y. The inner expectation
    // runs over the Y marginal, so gamma(x) = P(X = x).
    std::vector<double> px(num_x, 0.0), cum(num_x, 0.0);
    for (int x = 0; x < num_x; ++x) {
        for (int y = 0; y < num_y; ++y) px[x] += table[x][y];
        px[x] /= num_y;
    }
    double run = 0.0;
    for (int x = 0; x < num_x; ++x) { run += px[x]; cum[x] = run; }
    double truth = 0.0;
    for (int x = 0; x < num_x; ++x) truth += px[x] * std::log(px[x]);

    NestedProblem p;
    p.name = "bayes";
    p.dim = 1;
    p.gen_x = [cum, num_x](RngStream& rng) {
        double u = rng.uniform();
        for (int x = 0; x < num_x; ++x)
            if (u < cum[x]) return static_cast<double>(x);
        return static_cast<double>(num_x - 1);
    };
    p.gen_y = [num_y](double, RngStream& rng) {
        return static_cast<double>(rng.uniform_int(num_y));
    };
    p.phi = [table](double x, double y) {
        return table[static_cast<int>(x)][static_cast<int>(y)];
    };
    p.g = [](double, double z) { return std::log(z); };
    p.lipschitz_k = 1.0 / floor_c;
    p.second_moment_v = 1.0;
    p.outer_variance_s = std::log(floor_c) * std::log(floor_c);
    // log is only 1/c-Lipschitz on [c, 1]; inner values live there by design.
    p.clip_lo = floor_c;
    p.clip_hi = 1.0;
    p.conditional_mean = [px](double x) { return px[static_cast<int>(x)]; };
    p.ground_truth = GroundTruth{truth, 0.0, "enumeration"};
    return p;
}

NestedProblem make_evppi_discrete(int d, int num_x,
                                  const std::vector<std::vector<std::vector<double>>>& payoff,
                                  double bound_v) {
    if (d < 1 || num_x < 1) throw std::invalid_argument("evppi: empty support");
    if (bound_v <= 0.0) throw std::invalid_argument("evppi: bound_v must be positive");
    if (static_cast<int>(payoff.size()) != d)
        throw std::invalid_argument("evppi: payoff must have d tables");
    const int num_y = payoff.empty() || payoff[0].empty() ? 0 : static_cast<int>(payoff[0][0].size());
    if (num_y < 1) throw std::invalid_argument("evppi: empty payoff tables");
    const double amp = std::sqrt(bound_v);
    for (const auto& tab : payoff) {
        if (static_cast<int>(tab.size()) != num_x)
            throw std::invalid_argument("evppi: payoff tables must have num_x rows");
        for (const auto& row : tab) {
            if (static_cast<int>(row.size()) != num_y)
                throw std::invalid_argument("evppi: ragged payoff table");
            for (double v : row)
                if (std::abs(v) > amp)
                    throw std::invalid_argument("evppi: payoff exceeds sqrt(bound_v)");
        }
    }

    // Exact enumeration over the finite support.
    std::vector<std::vector<double>> cond_mean(num_x, std::vector<double>(d, 0.0));
    std::vector<double> overall(d, 0.0);
    for (int k = 0; k < d; ++k) {
        for (int x = 0; x < num_x; ++x) {
            double m = 0.0;
            for (int y = 0; y < num_y; ++y) m += payoff[k][x][y];
            m /= num_y;
            cond_mean[x][k] = m;
            overall[k] += m / num_x;
        }
    }
    double term1 = 0.0, term1_sq = 0.0;
    for (int x = 0; x < num_x; ++x) {
        double mx = cond_mean[x][0];
        for (int k = 1; k < d; ++k) mx = std::max(mx, cond_mean[x][k]);
        term1 += mx / num_x;
        term1_sq += mx * mx / num_x;
    }
    double term2 = overall[0];
    for (int k = 1; k < d; ++k) term2 = std::max(term2, overall[k]);

    NestedProblem p;
    p.name = "evppi";
    p.dim = d;
    p.gen_x = [num_x](RngStream& rng) { return static_cast<double>(rng.uniform_int(num_x)); };
    p.gen_y = [num_y](double, RngStream& rng) {
        return static_cast<double>(rng.uniform_int(num_y));
    };
    if (d == 1) {
        p.phi = [payoff](double x, double y) {
            return payoff[0][static_cast<int>(x)][static_cast<int>(y)];
        };
        p.g = [](double, double z) { return z; };
        p.conditional_mean = [cond_mean](double x) { return cond_mean[static_cast<int>(x)][0]; };
    } else {
        p.phi_vec = [payoff, d](double x, double y, std::span<double> out) {
            for (int k = 0; k < d; ++k)
                out[k] = payoff[k][static_cast<int>(x)][static_cast<int>(y)];
        };
        p.g_vec = [d](double, std::span<const double> z) {
            double m = z[0];
            for (int k = 1; k < d; ++k) m = std::max(m, z[k]);
            return m;
        };
        p.conditional_mean_vec = [cond_mean, d](double x, std::span<double> out) {
            for (int k = 0; k < d; ++k) out[k] = cond_mean[static_cast<int>(x)][k];
        };
    }
    p.lipschitz_k = 1.0;  // max is 1-Lipschitz in the max-norm
    p.second_moment_v = bound_v;
    p.outer_variance_s = std::max(term1_sq - term1 * term1, 0.0);
    p.clip_lo = -amp;
    p.clip_hi = amp;
    p.ground_truth = GroundTruth{term1, 0.0, "enumeration"};
    p.evppi_second_term = term2;
    return p;
}

const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names = {"identity", "gauss-toy", "coc", "bayes",
                                                   "evppi"};
    return names;
}

NestedProblem problem_by_name(const std::string& name) {
    if (name == "identity") return make_identity_problem({IdentityKind::gaussian});
    if (name == "gauss-toy") return make_gauss_toy();
    if (name == "coc") return make_coc_option(0.0, 4.0, 1.0, CocJointSpec{0.0, 2.0, false, 2.0});
    if (name == "bayes")
        return make_bayes_design_toy(2, 2, {{0.7, 0.4}, {0.3, 0.6}}, 0.3);
    if (name == "evppi") {
        std::vector<std::vector<std::vector<double>>> payoff = {
            {{0.5, 1.5}, {1.0, 0.0}, {-0.5, 0.5}},
            {{0.0, 1.0}, {1.5, 0.5}, {0.5, -0.5}},
        };
        return make_evppi_discrete(2, 3, payoff, 4.0);
    }
    throw std::invalid_argument("unknown problem: " + name);
}

void write_truth_sidecar(const NestedProblem& p, const std::string& dir) {
    if (!p.ground_truth) throw std::invalid_argument("problem has no ground truth: " + p.name);
    std::filesystem::create_directories(dir);
    std::string path = dir + "/" + p.name + ".truth";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %s\n", p.ground_truth->value,
                  p.ground_truth->resolution, p.ground_truth->provenance.c_str());
    out << buf;
}

std::optional<GroundTruth> read_truth_sidecar(const std::string& name, const std::string& dir) {
    std::ifstream in(dir + "/" + name + ".truth");
    if (!in) return std::nullopt;
    GroundTruth t;
    if (!(in >> t.value >> t.resolution >> t.provenance)) return std::nullopt;
    return t;
}

}  // namespace qnest
