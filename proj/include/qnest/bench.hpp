#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qnest/mean_oracle.hpp"
#include "qnest/problem.hpp"
#include "qnest/stats.hpp"

namespace qnest {

struct ScalingRecord {
    std::string method;
    std::string problem;
    double eps = 0.0;
    std::uint64_t seed = 0;
    double value = 0.0;
    std::optional<double> abs_error;  // present when the problem has a ground truth
    CostLedger ledger;
    std::string oracle_mode;
};

// CSV schema: method,problem,eps,seed,value,abs_error,gen_x,gen_y,phi,g,
// q_charged,c_charged,oracle_mode. Doubles are written with round-trip
// precision so parse(write(records)) == records exactly.
void write_records_csv(const std::string& path, const std::vector<ScalingRecord>& records);
std::vector<ScalingRecord> read_records_csv(const std::string& path);

struct MethodReport {
    std::string method;
    bool has_fit = false;
    LinFit fit;  // log(charged cost) vs log(1/eps)
    // eps -> fraction of seeds with |value - truth| <= eps
    std::vector<std::pair<double, double>> success_rate;
};

struct ScalingReport {
    std::vector<MethodReport> methods;
    std::vector<ScalingRecord> records;
};

struct BenchConfig {
    std::string problem;
    std::vector<std::string> methods;
    std::vector<double> eps_grid;      // strictly decreasing
    std::vector<std::uint64_t> seeds;  // nonempty
    OracleMode mode = OracleMode::Surrogate();
    double delta = 0.05;  // confidence parameter for the median-trick method
    std::string out_path; // empty: skip the CSV
    int threads = 1;
};

const std::vector<std::string>& method_names();
bool is_quantum_method(const std::string& method);

// Runs every (method, eps, seed) cell, appends records to the CSV and fits
// per-method cost slopes. Deterministic given the seed list; cell results do
// not depend on execution order or thread count. The plain nested estimator
// is only run on cells with eps >= 2^-5; finer grids are impractical at its
// cost growth.
ScalingReport run_scaling_experiment(const BenchConfig& cfg);

// OLS of ln(cost) on ln(1/eps); replicate costs are aggregated per eps by
// their mean before fitting. Requires >= 4 distinct eps and positive costs.
LinFit fit_loglog_slope(const std::vector<std::pair<double, double>>& eps_cost);

// Charged cost used for scaling fits: quantum methods report the analytic
// quantum charge, classical methods their real query total.
std::uint64_t charged_cost(const std::string& method, const CostLedger& led);

}  // namespace qnest
