#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "qnest/bench.hpp"
#include "qnest/classical.hpp"
#include "qnest/problems.hpp"
#include "qnest/qnest.hpp"

namespace py = pybind11;
using namespace qnest;

namespace {

py::dict ledger_dict(const CostLedger& led) {
    py::dict d;
    d["gen_x"] = led.gen_x_calls;
    d["gen_y"] = led.gen_y_calls;
    d["phi"] = led.phi_evals;
    d["g"] = led.g_evals;
    d["q_charged"] = led.quantum_charged;
    d["c_charged"] = led.classical_charged;
    return d;
}

OracleMode mode_of(const std::string& name, double p_fail, double corruption) {
    return oracle_mode_from_name(name, p_fail, corruption);
}

py::tuple result_tuple(const EstimateResult& res) {
    return py::make_tuple(res.value, ledger_dict(res.ledger));
}

}  // namespace

PYBIND11_MODULE(qnestpy, m) {
    m.doc() = "nested-expectation estimators with a cost-charged quantum oracle model";

    py::class_<NestedProblem, std::shared_ptr<NestedProblem>>(m, "Problem")
        .def_readonly("name", &NestedProblem::name)
        .def_readonly("dim", &NestedProblem::dim)
        .def_readonly("lipschitz_k", &NestedProblem::lipschitz_k)
        .def_readonly("second_moment_v", &NestedProblem::second_moment_v)
        .def_readonly("outer_variance_s", &NestedProblem::outer_variance_s)
        .def_property_readonly("ground_truth",
                               [](const NestedProblem& p) -> py::object {
                                   if (!p.ground_truth) return py::none();
                                   return py::float_(p.ground_truth->value);
                               })
        .def_property_readonly("truth_provenance",
                               [](const NestedProblem& p) -> py::object {
                                   if (!p.ground_truth) return py::none();
                                   return py::str(p.ground_truth->provenance);
                               })
        .def("__repr__", [](const NestedProblem& p) {
            return "<Problem '" + p.name + "'>";
        });

    m.def("problem_names", [] { return problem_names(); });
    m.def("make_problem", [](const std::string& name) {
        return std::make_shared<NestedProblem>(problem_by_name(name));
    });

    m.def(
        "nested_mc",
        [](std::shared_ptr<NestedProblem> p, std::uint64_t m_outer, std::uint64_t n_inner,
           std::uint64_t seed) {
            RngStream rng(seed);
            return result_tuple(nested_mc_estimate(*p, m_outer, n_inner, rng));
        },
        py::arg("problem"), py::arg("m"), py::arg("n"), py::arg("seed") = 0);

    m.def(
        "classical_level_sample",
        [](std::shared_ptr<NestedProblem> p, int level, std::uint64_t seed) {
            RngStream rng(seed);
            auto [v, led] = classical_level_sample(*p, level, rng);
            return py::make_tuple(v, ledger_dict(led));
        },
        py::arg("problem"), py::arg("level"), py::arg("seed") = 0);

    m.def(
        "classical_mlmc",
        [](std::shared_ptr<NestedProblem> p, double eps, std::uint64_t seed) {
            RngStream rng(seed);
            return result_tuple(classical_mlmc_estimate(*p, eps, rng));
        },
        py::arg("problem"), py::arg("eps"), py::arg("seed") = 0);

    m.def(
        "qnest08",
        [](std::shared_ptr<NestedProblem> p, double eps, std::uint64_t seed,
           const std::string& oracle, double p_fail, double corruption) {
            RngStream rng(seed);
            return result_tuple(
                q_nest_expect_08(*p, eps, mode_of(oracle, p_fail, corruption), rng));
        },
        py::arg("problem"), py::arg("eps"), py::arg("seed") = 0,
        py::arg("oracle") = "surrogate", py::arg("p_fail") = 0.0, py::arg("corruption") = 0.0);

    m.def(
        "qnest",
        [](std::shared_ptr<NestedProblem> p, double eps, double delta, std::uint64_t seed,
           const std::string& oracle, double p_fail, double corruption) {
            RngStream rng(seed);
            return result_tuple(
                q_nest_expect(*p, eps, delta, mode_of(oracle, p_fail, corruption), rng));
        },
        py::arg("problem"), py::arg("eps"), py::arg("delta") = 0.05, py::arg("seed") = 0,
        py::arg("oracle") = "surrogate", py::arg("p_fail") = 0.0, py::arg("corruption") = 0.0);

    m.def(
        "qamlmc",
        [](std::shared_ptr<NestedProblem> p, double eps, std::uint64_t seed,
           const std::string& oracle, double p_fail, double corruption) {
            RngStream rng(seed);
            return result_tuple(
                qa_mlmc_estimate(*p, eps, mode_of(oracle, p_fail, corruption), rng));
        },
        py::arg("problem"), py::arg("eps"), py::arg("seed") = 0,
        py::arg("oracle") = "surrogate", py::arg("p_fail") = 0.0, py::arg("corruption") = 0.0);

    m.def(
        "quantum_mean_estimate",
        [](const std::function<double()>& sampler, double sigma_bound, double eps, double delta,
           std::uint64_t seed, const std::string& oracle, py::object true_mean, double p_fail,
           double corruption) {
            MeanSampler s;
            s.draw = [sampler](RngStream&, CostLedger&) { return sampler(); };
            if (!true_mean.is_none()) s.true_mean = true_mean.cast<double>();
            RngStream rng(seed);
            MeanEstimate est = quantum_mean_estimate(s, sigma_bound, eps, delta,
                                                     mode_of(oracle, p_fail, corruption), rng);
            return py::make_tuple(est.value, ledger_dict(est.ledger));
        },
        py::arg("sampler"), py::arg("sigma_bound"), py::arg("eps"), py::arg("delta"),
        py::arg("seed") = 0, py::arg("oracle") = "surrogate", py::arg("true_mean") = py::none(),
        py::arg("p_fail") = 0.0, py::arg("corruption") = 0.0);

    m.def("quantum_query_count", &quantum_query_count, py::arg("sigma_bound"), py::arg("eps"),
          py::arg("delta"));

    m.def("median", [](const std::vector<double>& v) { return median(v); });

    m.def(
        "plan_schedule",
        [](double alpha, double beta, double gamma, double eps, double bias_const,
           double var_const, double cost_const) {
            MlmcSchedule s =
                plan_schedule(alpha, beta, gamma, eps, bias_const, var_const, cost_const);
            py::dict d;
            d["top_level"] = s.top_level;
            d["replications"] = s.replications;
            d["planned_cost"] = s.planned_cost;
            d["regime"] = s.regime == MlmcRegime::beta_gt_gamma   ? "beta_gt_gamma"
                          : s.regime == MlmcRegime::beta_lt_gamma ? "beta_lt_gamma"
                                                                  : "beta_eq_gamma";
            return d;
        },
        py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("eps"),
        py::arg("bias_const"), py::arg("var_const"), py::arg("cost_const"));

    m.def(
        "fit_loglog_slope",
        [](const std::vector<std::pair<double, double>>& eps_cost) {
            LinFit fit = fit_loglog_slope(eps_cost);
            return py::make_tuple(fit.slope, fit.intercept, fit.residual);
        },
        py::arg("eps_cost"));

    m.def(
        "run_scaling",
        [](const std::string& problem, const std::vector<std::string>& methods,
           const std::vector<double>& eps_grid, const std::vector<std::uint64_t>& seeds,
           const std::string& oracle, double delta, const std::string& out_path, int threads) {
            BenchConfig cfg;
            cfg.problem = problem;
            cfg.methods = methods;
            cfg.eps_grid = eps_grid;
            cfg.seeds = seeds;
            cfg.mode = mode_of(oracle, 0.0, 0.0);
            cfg.delta = delta;
            cfg.out_path = out_path;
            cfg.threads = threads;
            ScalingReport rep = run_scaling_experiment(cfg);
            py::list methods_out;
            for (const auto& mr : rep.methods) {
                py::dict d;
                d["method"] = mr.method;
                if (mr.has_fit) {
                    d["slope"] = mr.fit.slope;
                    d["intercept"] = mr.fit.intercept;
                    d["residual"] = mr.fit.residual;
                }
                d["success_rate"] = mr.success_rate;
                methods_out.append(d);
            }
            py::list records;
            for (const auto& r : rep.records) {
                py::dict d;
                d["method"] = r.method;
                d["problem"] = r.problem;
                d["eps"] = r.eps;
                d["seed"] = r.seed;
                d["value"] = r.value;
                if (r.abs_error) d["abs_error"] = *r.abs_error;
                d["ledger"] = ledger_dict(r.ledger);
                d["oracle_mode"] = r.oracle_mode;
                records.append(d);
            }
            py::dict out;
            out["methods"] = methods_out;
            out["records"] = records;
            return out;
        },
        py::arg("problem"), py::arg("methods"), py::arg("eps_grid"), py::arg("seeds"),
        py::arg("oracle") = "surrogate", py::arg("delta") = 0.05, py::arg("out_path") = "",
        py::arg("threads") = 1);
}
