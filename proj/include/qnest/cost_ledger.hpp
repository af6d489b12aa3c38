#pragma once

#include <cstdint>
#include <stdexcept>

namespace qnest {

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("cost counter overflow");
    return r;
}

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("cost counter overflow");
    return r;
}

// Unit-cost accounting. gen_x/gen_y/phi/g count real queries actually made.
// quantum_charged is the analytic query count the oracle model charges;
// classical_charged counts samples the classical surrogate really drew, so
// the surrogate's cost stays auditable next to the charged one.
struct CostLedger {
    std::uint64_t gen_x_calls = 0;
    std::uint64_t gen_y_calls = 0;
    std::uint64_t phi_evals = 0;
    std::uint64_t g_evals = 0;
    std::uint64_t quantum_charged = 0;
    std::uint64_t classical_charged = 0;

    CostLedger& operator+=(const CostLedger& o) {
        gen_x_calls = checked_add(gen_x_calls, o.gen_x_calls);
        gen_y_calls = checked_add(gen_y_calls, o.gen_y_calls);
        phi_evals = checked_add(phi_evals, o.phi_evals);
        g_evals = checked_add(g_evals, o.g_evals);
        quantum_charged = checked_add(quantum_charged, o.quantum_charged);
        classical_charged = checked_add(classical_charged, o.classical_charged);
        return *this;
    }

    friend CostLedger merge(const CostLedger& a, const CostLedger& b) {
        CostLedger r = a;
        r += b;
        return r;
    }

    // Total in classical accounting: every sampler/function query is one unit.
    std::uint64_t classical_total() const {
        return checked_add(checked_add(gen_x_calls, gen_y_calls), checked_add(phi_evals, g_evals));
    }

    // Total in quantum-charged accounting. The analytic charge already folds
    // in the per-call cost of everything a charged query would execute, so it
    // subsumes the sampler counters.
    std::uint64_t quantum_total() const { return quantum_charged; }

    bool operator==(const CostLedger&) const = default;
};

}  // namespace qnest
