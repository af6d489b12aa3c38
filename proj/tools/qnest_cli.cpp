#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qnest/bench.hpp"
#include "qnest/classical.hpp"
#include "qnest/problems.hpp"
#include "qnest/qnest.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        if (comma > pos) out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    auto toks = split_list(s);
    if (toks.size() == 1 && toks[0].find('.') == std::string::npos) {
        // a single integer means "this many seeds, 0..n-1"
        std::uint64_t n = std::stoull(toks[0]);
        for (std::uint64_t i = 0; i < n; ++i) out.push_back(i);
        return out;
    }
    for (const auto& tok : toks) out.push_back(std::stoull(tok));
    return out;
}

void print_ledger(const qnest::CostLedger& led) {
    std::printf("  ledger: gen_x=%llu gen_y=%llu phi=%llu g=%llu q_charged=%llu c_charged=%llu\n",
                (unsigned long long)led.gen_x_calls, (unsigned long long)led.gen_y_calls,
                (unsigned long long)led.phi_evals, (unsigned long long)led.g_evals,
                (unsigned long long)led.quantum_charged,
                (unsigned long long)led.classical_charged);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nested-expectation estimation benchmark"};
    app.require_subcommand(1);

    std::string problem = "coc", methods_arg = "cmlmc,qnest", eps_arg = "0.125,0.0625,0.03125";
    std::string seeds_arg = "10", oracle = "surrogate", out_path = "scaling.csv";
    double p_fail = 0.0, corruption = 0.0, delta = 0.05;
    int threads = 1;

    auto* bench = app.add_subcommand("bench", "run methods over an eps grid and seed set");
    bench->add_option("--problem", problem, "problem name")->required();
    bench->add_option("--methods", methods_arg, "comma list of methods")->required();
    bench->add_option("--eps", eps_arg, "comma list of accuracies, strictly decreasing")
        ->required();
    bench->add_option("--seeds", seeds_arg, "seed count or comma list of seeds");
    bench->add_option("--oracle", oracle, "oracle mode: surrogate|idealized|adversarial");
    bench->add_option("--p-fail", p_fail, "adversarial failure probability");
    bench->add_option("--corruption", corruption, "adversarial corruption offset");
    bench->add_option("--delta", delta, "confidence parameter for the qnest wrapper");
    bench->add_option("--out", out_path, "output CSV path");
    bench->add_option("--threads", threads, "worker threads");

    std::string truth_dir = "problems";
    auto* truth = app.add_subcommand("truth", "compute and cache ground-truth sidecars");
    truth->add_option("--problem", problem, "problem name, or 'all'");
    truth->add_option("--dir", truth_dir, "sidecar directory");

    std::string report_in = "scaling.csv";
    auto* report = app.add_subcommand("report", "refit cost slopes from an existing CSV");
    report->add_option("--in", report_in, "input CSV path")->required();

    std::string est_method = "qnest";
    double est_eps = 0.05;
    std::uint64_t est_seed = 0;
    auto* estimate = app.add_subcommand("estimate", "run one method once and print the result");
    estimate->add_option("--problem", problem, "problem name")->required();
    estimate->add_option("--method", est_method, "method name")->required();
    estimate->add_option("--eps", est_eps, "target accuracy");
    estimate->add_option("--seed", est_seed, "rng seed");
    estimate->add_option("--oracle", oracle, "oracle mode");
    estimate->add_option("--p-fail", p_fail, "adversarial failure probability");
    estimate->add_option("--corruption", corruption, "adversarial corruption offset");
    estimate->add_option("--delta", delta, "confidence parameter for qnest");

    CLI11_PARSE(app, argc, argv);

    try {
        if (truth->parsed()) {
            std::vector<std::string> names;
            if (problem == "all")
                names = qnest::problem_names();
            else
                names.push_back(problem);
            for (const auto& name : names) {
                qnest::NestedProblem p = qnest::problem_by_name(name);
                qnest::write_truth_sidecar(p, truth_dir);
                std::printf("%s: value=%.12g resolution=%g provenance=%s\n", name.c_str(),
                            p.ground_truth->value, p.ground_truth->resolution,
                            p.ground_truth->provenance.c_str());
            }
            return 0;
        }

        if (report->parsed()) {
            auto records = qnest::read_records_csv(report_in);
            std::map<std::string, std::vector<std::pair<double, double>>> charged, classical;
            std::map<std::string, std::pair<int, int>> hits;
            for (const auto& r : records) {
                charged[r.method].emplace_back(
                    r.eps, double(qnest::charged_cost(r.method, r.ledger)));
                classical[r.method].emplace_back(r.eps, double(r.ledger.classical_total()));
                auto& h = hits[r.method];
                ++h.second;
                if (r.abs_error && *r.abs_error <= r.eps) ++h.first;
            }
            for (const auto& [method, eps_cost] : charged) {
                std::printf("%-8s records=%zu", method.c_str(), eps_cost.size());
                try {
                    qnest::LinFit fit = qnest::fit_loglog_slope(eps_cost);
                    std::printf(" charged-slope=%.3f residual=%.3f", fit.slope, fit.residual);
                } catch (const std::exception&) {
                    std::printf(" charged-slope=n/a");
                }
                const auto& cls = classical[method];
                bool any_classical = false;
                for (const auto& [e, c] : cls) any_classical = any_classical || c > 0.0;
                if (any_classical) {
                    try {
                        qnest::LinFit fit = qnest::fit_loglog_slope(cls);
                        std::printf(" classical-slope=%.3f", fit.slope);
                    } catch (const std::exception&) {
                        std::printf(" classical-slope=n/a");
                    }
                }
                const auto& h = hits[method];
                std::printf(" success=%d/%d\n", h.first, h.second);
            }
            return 0;
        }

        qnest::OracleMode mode = qnest::oracle_mode_from_name(oracle, p_fail, corruption);

        if (bench->parsed()) {
            qnest::BenchConfig cfg;
            cfg.problem = problem;
            cfg.methods = split_list(methods_arg);
            cfg.eps_grid = parse_doubles(eps_arg);
            cfg.seeds = parse_seeds(seeds_arg);
            cfg.mode = mode;
            cfg.delta = delta;
            cfg.out_path = out_path;
            cfg.threads = threads;
            qnest::ScalingReport report = qnest::run_scaling_experiment(cfg);
            std::printf("problem=%s oracle=%s records=%zu -> %s\n", problem.c_str(),
                        oracle.c_str(), report.records.size(), out_path.c_str());
            for (const auto& mr : report.methods) {
                if (mr.has_fit)
                    std::printf("%-8s slope=%.3f intercept=%.3f residual=%.3f\n",
                                mr.method.c_str(), mr.fit.slope, mr.fit.intercept,
                                mr.fit.residual);
                else
                    std::printf("%-8s slope=n/a (fewer than 4 distinct eps)\n",
                                mr.method.c_str());
                for (const auto& [eps, rate] : mr.success_rate)
                    std::printf("         eps=%-10g success=%.3f\n", eps, rate);
            }
            return 0;
        }

        if (estimate->parsed()) {
            qnest::NestedProblem p = qnest::problem_by_name(problem);
            qnest::RngStream rng(est_seed);
            qnest::EstimateResult res;
            if (est_method == "nested") {
                // bound-driven allocation: outer variance and inner bias each
                // get half of the squared error budget
                double k2v = p.lipschitz_k * p.lipschitz_k * p.second_moment_v;
                auto m = static_cast<std::uint64_t>(
                    std::ceil(2.0 * (p.outer_variance_s + 1.0) / (est_eps * est_eps)));
                auto n = static_cast<std::uint64_t>(std::ceil(2.0 * k2v / (est_eps * est_eps)));
                res = qnest::nested_mc_estimate(p, std::max<std::uint64_t>(m, 1),
                                                std::max<std::uint64_t>(n, 1), rng);
            } else if (est_method == "cmlmc") {
                res = qnest::classical_mlmc_estimate(p, est_eps, rng);
            } else if (est_method == "qamlmc") {
                res = qnest::qa_mlmc_estimate(p, est_eps, mode, rng);
            } else if (est_method == "qnest08") {
                res = qnest::q_nest_expect_08(p, est_eps, mode, rng);
            } else if (est_method == "qnest") {
                res = qnest::q_nest_expect(p, est_eps, delta, mode, rng);
            } else {
                throw std::invalid_argument("unknown method: " + est_method);
            }
            std::printf("%s on %s: value=%.10g", est_method.c_str(), problem.c_str(), res.value);
            if (p.ground_truth)
                std::printf(" truth=%.10g abs_error=%.3g", p.ground_truth->value,
                            std::abs(res.value - p.ground_truth->value));
            std::printf("\n");
            print_ledger(res.ledger);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
