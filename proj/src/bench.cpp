#include "qnest/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>

#include "qnest/classical.hpp"
#include "qnest/problems.hpp"
#include "qnest/qnest.hpp"

namespace qnest {

namespace {

constexpr double kNestedEpsFloor = 0.03125;  // 2^-5

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Pilot sizes for the plain nested estimator's (m, n) choice.
struct NestedCalibration {
    double outer_var = 1.0;
    double cond_var = 1.0;
    CostLedger pilot_cost;
};

NestedCalibration calibrate_nested(const NestedProblem& p, RngStream& rng) {
    const int nx = 100, ny = 100;
    NestedCalibration cal;
    RunningStats outer;
    double max_cond = 0.0;
    std::vector<double> buf(p.dim), mean(p.dim);
    for (int i = 0; i < nx; ++i) {
        double x = p.sample_x(rng, cal.pilot_cost);
        std::vector<RunningStats> inner(p.dim);
        for (int j = 0; j < ny; ++j) {
            double y = p.sample_y(x, rng, cal.pilot_cost);
            if (p.dim == 1) {
                inner[0].add(p.eval_phi(x, y, cal.pilot_cost));
            } else {
                p.eval_phi_vec(x, y, buf, cal.pilot_cost);
                for (int k = 0; k < p.dim; ++k) inner[k].add(buf[k]);
            }
        }
        for (int k = 0; k < p.dim; ++k) max_cond = std::max(max_cond, inner[k].variance());
        if (p.dim == 1) {
            outer.add(p.eval_g(x, inner[0].mean(), cal.pilot_cost));
        } else {
            for (int k = 0; k < p.dim; ++k) mean[k] = inner[k].mean();
            outer.add(p.eval_g_vec(x, mean, cal.pilot_cost));
        }
    }
    cal.outer_var = std::max(outer.variance(), 1e-12);
    cal.cond_var = std::max(max_cond, 1e-12);
    return cal;
}

}  // namespace

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names = {"nested", "cmlmc", "qamlmc", "qnest08",
                                                   "qnest"};
    return names;
}

bool is_quantum_method(const std::string& method) {
    return method == "qamlmc" || method == "qnest08" || method == "qnest";
}

std::uint64_t charged_cost(const std::string& method, const CostLedger& led) {
    return is_quantum_method(method) ? led.quantum_total() : led.classical_total();
}

void write_records_csv(const std::string& path, const std::vector<ScalingRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "method,problem,eps,seed,value,abs_error,gen_x,gen_y,phi,g,q_charged,c_charged,"
           "oracle_mode\n";
    for (const auto& r : records) {
        out << r.method << ',' << r.problem << ',' << fmt_double(r.eps) << ',' << r.seed << ','
            << fmt_double(r.value) << ',' << (r.abs_error ? fmt_double(*r.abs_error) : "") << ','
            << r.ledger.gen_x_calls << ',' << r.ledger.gen_y_calls << ',' << r.ledger.phi_evals
            << ',' << r.ledger.g_evals << ',' << r.ledger.quantum_charged << ','
            << r.ledger.classical_charged << ',' << r.oracle_mode << '\n';
    }
}

std::vector<ScalingRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
    std::vector<ScalingRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!ss && line.back() == ',') cells.push_back("");
        if (cells.size() != 13) throw std::runtime_error("malformed csv row: " + line);
        ScalingRecord r;
        r.method = cells[0];
        r.problem = cells[1];
        r.eps = std::strtod(cells[2].c_str(), nullptr);
        r.seed = std::strtoull(cells[3].c_str(), nullptr, 10);
        r.value = std::strtod(cells[4].c_str(), nullptr);
        if (!cells[5].empty()) r.abs_error = std::strtod(cells[5].c_str(), nullptr);
        r.ledger.gen_x_calls = std::strtoull(cells[6].c_str(), nullptr, 10);
        r.ledger.gen_y_calls = std::strtoull(cells[7].c_str(), nullptr, 10);
        r.ledger.phi_evals = std::strtoull(cells[8].c_str(), nullptr, 10);
        r.ledger.g_evals = std::strtoull(cells[9].c_str(), nullptr, 10);
        r.ledger.quantum_charged = std::strtoull(cells[10].c_str(), nullptr, 10);
        r.ledger.classical_charged = std::strtoull(cells[11].c_str(), nullptr, 10);
        r.oracle_mode = cells[12];
        records.push_back(std::move(r));
    }
    return records;
}

LinFit fit_loglog_slope(const std::vector<std::pair<double, double>>& eps_cost) {
    std::map<double, RunningStats> by_eps;
    for (const auto& [eps, cost] : eps_cost) {
        if (!(cost > 0.0)) throw std::invalid_argument("fit_loglog_slope: cost must be positive");
        by_eps[eps].add(cost);
    }
    if (by_eps.size() < 4)
        throw std::invalid_argument("fit_loglog_slope: need >= 4 distinct eps values");
    std::vector<double> xs, ys;
    for (const auto& [eps, stats] : by_eps) {
        xs.push_back(std::log(1.0 / eps));
        ys.push_back(std::log(stats.mean()));
    }
    return ols_fit(xs, ys);
}

ScalingReport run_scaling_experiment(const BenchConfig& cfg) {
    NestedProblem problem = problem_by_name(cfg.problem);
    if (cfg.methods.empty()) throw std::invalid_argument("bench: no methods given");
    const auto& known = method_names();
    for (const auto& m : cfg.methods)
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw std::invalid_argument("unknown method: " + m);
    if (cfg.eps_grid.empty()) throw std::invalid_argument("bench: empty eps grid");
    for (std::size_t i = 0; i + 1 < cfg.eps_grid.size(); ++i)
        if (!(cfg.eps_grid[i] > cfg.eps_grid[i + 1]))
            throw std::invalid_argument("bench: eps grid must be strictly decreasing");
    if (cfg.seeds.empty()) throw std::invalid_argument("bench: no seeds given");
    for (const auto& m : cfg.methods)
        if (m == "qnest") median_repetitions(cfg.delta);  // rejects bad delta up front

    // Calibrations are shared across cells through a stream fixed by the
    // problem name, so per-cell costs reflect the estimators themselves.
    const std::uint64_t pkey = fnv1a(cfg.problem);
    std::optional<CalibrationConstants> mlmc_cal;
    std::optional<NestedCalibration> nested_cal;
    for (const auto& m : cfg.methods) {
        if (m == "cmlmc" && !mlmc_cal) {
            RngStream crng = RngStream(0x5eedc0de).child(pkey, 1);
            mlmc_cal = calibrate_classical(problem, crng);
        }
        if (m == "nested" && !nested_cal) {
            RngStream nrng = RngStream(0x5eedc0de).child(pkey, 2);
            nested_cal = calibrate_nested(problem, nrng);
        }
    }

    struct Cell {
        std::string method;
        double eps;
        std::size_t eps_index;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& m : cfg.methods)
        for (std::size_t ei = 0; ei < cfg.eps_grid.size(); ++ei) {
            if (m == "nested" && cfg.eps_grid[ei] < kNestedEpsFloor) continue;
            for (std::uint64_t seed : cfg.seeds) cells.push_back({m, cfg.eps_grid[ei], ei, seed});
        }

    auto run_cell = [&](const Cell& cell) -> ScalingRecord {
        RngStream rng = RngStream(cell.seed).child(fnv1a(cell.method), cell.eps_index);
        EstimateResult res;
        if (cell.method == "nested") {
            const double k2 = problem.lipschitz_k * problem.lipschitz_k;
            std::uint64_t m = static_cast<std::uint64_t>(
                std::ceil(4.0 * nested_cal->outer_var / (cell.eps * cell.eps)));
            std::uint64_t n = static_cast<std::uint64_t>(
                std::ceil(4.0 * k2 * nested_cal->cond_var / (cell.eps * cell.eps)));
            res = nested_mc_estimate(problem, std::max<std::uint64_t>(m, 1),
                                     std::max<std::uint64_t>(n, 1), rng);
        } else if (cell.method == "cmlmc") {
            res = classical_mlmc_estimate(problem, cell.eps, rng, &*mlmc_cal);
        } else if (cell.method == "qamlmc") {
            res = qa_mlmc_estimate(problem, cell.eps, cfg.mode, rng);
        } else if (cell.method == "qnest08") {
            res = q_nest_expect_08(problem, cell.eps, cfg.mode, rng);
        } else {  // qnest
            res = q_nest_expect(problem, cell.eps, cfg.delta, cfg.mode, rng);
        }
        ScalingRecord rec;
        rec.method = cell.method;
        rec.problem = cfg.problem;
        rec.eps = cell.eps;
        rec.seed = cell.seed;
        rec.value = res.value;
        if (problem.ground_truth)
            rec.abs_error = std::abs(res.value - problem.ground_truth->value);
        rec.ledger = res.ledger;
        rec.oracle_mode = oracle_mode_name(cfg.mode);
        return rec;
    };

    std::vector<ScalingRecord> records(cells.size());
    int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) records[i] = run_cell(cells[i]);
    } else {
        std::vector<std::future<void>> futs;
        std::size_t chunk = (cells.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = t * chunk, hi = std::min(cells.size(), lo + chunk);
            if (lo >= hi) break;
            futs.push_back(std::async(std::launch::async, [&, lo, hi]() {
                for (std::size_t i = lo; i < hi; ++i) records[i] = run_cell(cells[i]);
            }));
        }
        for (auto& f : futs) f.get();
    }

    if (!cfg.out_path.empty()) write_records_csv(cfg.out_path, records);

    ScalingReport report;
    report.records = records;
    for (const auto& m : cfg.methods) {
        MethodReport mr;
        mr.method = m;
        std::vector<std::pair<double, double>> eps_cost;
        std::map<double, std::pair<int, int>> success;  // eps -> (ok, total)
        for (const auto& r : records) {
            if (r.method != m) continue;
            eps_cost.emplace_back(r.eps, static_cast<double>(charged_cost(m, r.ledger)));
            auto& s = success[r.eps];
            ++s.second;
            if (r.abs_error && *r.abs_error <= r.eps) ++s.first;
        }
        std::set<double> distinct;
        for (auto& [e, c] : eps_cost) distinct.insert(e);
        if (distinct.size() >= 4) {
            mr.fit = fit_loglog_slope(eps_cost);
            mr.has_fit = true;
        }
        for (auto& [e, s] : success)
            mr.success_rate.emplace_back(e, s.second ? double(s.first) / s.second : 0.0);
        report.methods.push_back(std::move(mr));
    }
    return report;
}

}  // namespace qnest
