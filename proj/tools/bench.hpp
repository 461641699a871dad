#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "co2/co2.hpp"

namespace co2 {

// Scale knobs for a benchmark run. Zero-valued numeric fields fall back to
// the experiment's desk-scale default.
struct BenchOptions {
    std::string experiment;        // mixture | recovery | quadapprox | baselines
    Index n = 0;
    Index d = 0;
    Index trials = 0;
    std::vector<Index> m_values;
    double epsilon = 0.0;
    double sinkhorn_tol = 1e-7;
    Index sinkhorn_max_iter = 10000;
    std::uint64_t seed = 0;
    bool no_timestamp = false;
    std::string out_prefix = "bench";
    int threads = 0;               // <=0: hardware count, capped by CO2_THREADS
};

// One (trial, m, method) measurement. Fields that an experiment does not
// produce stay NaN and serialize as null / nan.
struct TrialRecord {
    std::string method;
    Index m = 0;
    Index trial = 0;
    double divergence = std::numeric_limits<double>::quiet_NaN();
    double mmd_sq = std::numeric_limits<double>::quiet_NaN();
    double quad = std::numeric_limits<double>::quiet_NaN();
    double rel_err = std::numeric_limits<double>::quiet_NaN();
    Index support = 0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

// Worker count after applying the CO2_THREADS cap; never exceeds trials.
int resolve_threads(int requested, Index trials);

// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

// Runs the experiment, writes <out_prefix>.json and <out_prefix>.csv, and
// prints a deterministic summary to log. Record order is independent of the
// worker count.
void run_bench(const BenchOptions& options, std::ostream& log);

}  // namespace co2
