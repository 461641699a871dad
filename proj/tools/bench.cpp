#include "bench.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>

#include "json.hpp"

#include "baselines.hpp"

namespace co2 {

namespace {

using nlohmann::json;

// Shortest round-trip decimal form; keeps serialized output byte-stable.
std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Setup {
    std::string experiment;
    std::string generator;  // mixture8 | normal | cube
    Index n = 0;
    Index d = 0;
    Index trials = 0;
    std::vector<Index> ms;
    double epsilon = 0.0;
    double tol = 1e-7;
    Index max_iter = 10000;
    std::uint64_t seed = 0;
    bool refine = false;
    bool no_timestamp = false;
    std::string out_prefix;
};

Setup resolve(const BenchOptions& o) {
    Setup s;
    s.experiment = o.experiment;
    s.seed = o.seed;
    s.tol = o.sinkhorn_tol;
    s.max_iter = o.sinkhorn_max_iter;
    s.no_timestamp = o.no_timestamp;
    s.out_prefix = o.out_prefix;

    if (o.experiment == "mixture") {
        if (o.d != 0 && o.d != 2) {
            throw UsageError("bench: the mixture generator is two-dimensional");
        }
        s.generator = "mixture8";
        s.d = 2;
        s.n = o.n > 0 ? o.n : 2000;
        s.trials = o.trials > 0 ? o.trials : 8;
        s.ms = o.m_values.empty() ? std::vector<Index>{16} : o.m_values;
        s.epsilon = o.epsilon > 0.0 ? o.epsilon : 0.75;
    } else if (o.experiment == "recovery" || o.experiment == "quadapprox" ||
               o.experiment == "baselines") {
        s.generator = o.experiment == "baselines" ? "cube" : "normal";
        s.d = o.d > 0 ? o.d : (o.experiment == "recovery" ? 2 : 10);
        s.n = o.n > 0 ? o.n : 2000;
        s.trials = o.trials > 0 ? o.trials : 10;
        s.ms = o.m_values.empty() ? std::vector<Index>{32, 64, 128} : o.m_values;
        s.epsilon = o.epsilon > 0.0 ? o.epsilon : 2.0 * static_cast<double>(s.d);
        s.refine = o.experiment == "baselines";
    } else {
        throw UsageError("bench: unknown experiment '" + o.experiment +
                         "' (expected mixture, recovery, quadapprox, or baselines)");
    }

    if (s.trials < 1) throw UsageError("bench: trials must be positive");
    if (!(s.epsilon > 0.0)) throw UsageError("bench: epsilon must be positive");
    if (!(s.tol > 0.0)) throw UsageError("bench: tol must be positive");
    if (s.max_iter < 1) throw UsageError("bench: max-iter must be positive");
    for (Index m : s.ms) {
        if (m < 2 || m > s.n) {
            throw UsageError("bench: every m must lie in [2, n]");
        }
    }
    std::sort(s.ms.begin(), s.ms.end());
    s.ms.erase(std::unique(s.ms.begin(), s.ms.end()), s.ms.end());
    return s;
}

PointCloud sample_cloud(const Setup& s, std::mt19937_64& rng) {
    PointCloud pc;
    pc.points.resize(s.n, s.d);
    if (s.generator == "mixture8") {
        static constexpr double kMeans[8][2] = {{3, 3},  {3, -3}, {-3, 3}, {-3, -3},
                                                {0, 6},  {0, -6}, {6, 0},  {-6, 0}};
        std::uniform_int_distribution<int> comp(0, 7);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < s.n; ++i) {
            const int c = comp(rng);
            pc.points(i, 0) = kMeans[c][0] + normal(rng);
            pc.points(i, 1) = kMeans[c][1] + normal(rng);
        }
    } else if (s.generator == "normal") {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < s.n; ++i) {
            for (Index j = 0; j < s.d; ++j) pc.points(i, j) = normal(rng);
        }
    } else {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (Index i = 0; i < s.n; ++i) {
            for (Index j = 0; j < s.d; ++j) pc.points(i, j) = unif(rng);
        }
    }
    return pc;
}

void validate_coreset(const Coreset& c, Index n) {
    if (c.indices.empty() || c.indices.size() != static_cast<std::size_t>(c.weights.size())) {
        throw std::runtime_error("bench: coreset index/weight size mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < c.indices.size(); ++i) {
        const Index idx = c.indices[i];
        if (idx < 0 || idx >= n) throw std::runtime_error("bench: coreset index out of range");
        if (i > 0 && c.indices[i - 1] >= idx) {
            throw std::runtime_error("bench: coreset indices not strictly increasing");
        }
        if (!(c.weights(static_cast<Index>(i)) > 0.0)) {
            throw std::runtime_error("bench: coreset weight not positive");
        }
        sum += c.weights(static_cast<Index>(i));
    }
    if (std::abs(sum - 1.0) > 1e-10) {
        throw std::runtime_error("bench: coreset weights do not sum to 1");
    }
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Divergence and squared MMD against the trial sample, reusing the sample's
// own self-transport value across every method.
void evaluate(TrialRecord& rec, const Coreset& c, const DiscreteDistribution& data,
              const GramMatrix& gk, double ot_self_mu, const Setup& s) {
    validate_coreset(c, data.n());
    rec.support = static_cast<Index>(c.indices.size());
    rec.quad = c.quad_value;

    Vector w = c.weights;
    w /= w.sum();
    const PointCloud pts = coreset_points(c);
    const DiscreteDistribution nu = make_distribution(pts, w);
    const double ot_self_nu =
        solve({nu, nu, s.epsilon}, s.tol, static_cast<int>(s.max_iter)).ot_value;
    const double ot_cross =
        solve({data, nu, s.epsilon}, s.tol, static_cast<int>(s.max_iter)).ot_value;
    rec.divergence = divergence_from_terms(ot_cross, ot_self_mu, ot_self_nu);

    Vector full = full_weights(c, data.n());
    full /= full.sum();
    const DiscreteDistribution nu_full = make_distribution(*data.cloud, std::move(full));
    rec.mmd_sq = mmd_sq(gk, data, nu_full);
}

std::vector<TrialRecord> run_trial(const Setup& s, Index trial) {
    const std::uint64_t trial_seed =
        split_seed(s.seed, stream::trial_base + static_cast<std::uint64_t>(trial));
    std::mt19937_64 data_rng(split_seed(trial_seed, 0));
    const PointCloud pc = sample_cloud(s, data_rng);
    const DiscreteDistribution data = uniform(pc);

    const GramMatrix gk = gram(GaussianKernel{s.epsilon}, pc);
    const double ot_self_mu =
        solve({data, data, s.epsilon}, s.tol, static_cast<int>(s.max_iter)).ot_value;
    const std::uint64_t co2_seed = split_seed(trial_seed, 1);

    std::vector<TrialRecord> out;
    auto emit = [&](const Coreset& c, const std::string& method, Index m, double wall) {
        TrialRecord rec;
        rec.method = method;
        rec.m = m;
        rec.trial = trial;
        rec.seed = trial_seed;
        rec.wall_seconds = s.no_timestamp ? 0.0 : wall;
        evaluate(rec, c, data, gk, ot_self_mu, s);
        out.push_back(std::move(rec));
    };

    for (std::size_t k = 0; k < s.ms.size(); ++k) {
        const Index m = s.ms[k];
        Co2Config cfg;
        cfg.epsilon = s.epsilon;
        cfg.m = m;
        cfg.seed = co2_seed;
        cfg.sinkhorn_tol = s.tol;
        cfg.sinkhorn_max_iter = s.max_iter;
        const std::uint64_t rand_seed =
            split_seed(trial_seed, 2 + static_cast<std::uint64_t>(k));

        if (s.experiment == "baselines") {
            auto t0 = std::chrono::steady_clock::now();
            const SinkhornQuadraticForm form = kernel_selection(data, cfg);
            const double form_wall = elapsed_seconds(t0);

            t0 = std::chrono::steady_clock::now();
            const Coreset c = refine_weights(compress(data, cfg, form), form);
            emit(c, "co2", m, form_wall + elapsed_seconds(t0));

            t0 = std::chrono::steady_clock::now();
            const Coreset h = refine_weights(kernel_herding(data, form, m), form);
            emit(h, "herding", m, form_wall + elapsed_seconds(t0));

            t0 = std::chrono::steady_clock::now();
            const Coreset r = refine_weights(random_coreset(data, m, rand_seed), form);
            emit(r, "random", m, elapsed_seconds(t0));
        } else if (s.experiment == "quadapprox") {
            const auto t0 = std::chrono::steady_clock::now();
            const Coreset c = compress(data, cfg);
            const double wall = elapsed_seconds(t0);
            emit(c, "co2", m, wall);
            TrialRecord& rec = out.back();
            rec.rel_err = rec.divergence > 0.0
                              ? std::abs(rec.divergence - rec.quad) / rec.divergence
                              : std::numeric_limits<double>::quiet_NaN();
        } else {
            const auto t0 = std::chrono::steady_clock::now();
            const Coreset c = compress(data, cfg);
            emit(c, "co2", m, elapsed_seconds(t0));

            const auto t1 = std::chrono::steady_clock::now();
            const Coreset r = random_coreset(data, m, rand_seed);
            emit(r, "random", m, elapsed_seconds(t1));
        }
    }
    return out;
}

struct GroupStats {
    std::string method;
    Index m = 0;
    Index count = 0;
    std::map<std::string, std::array<double, 3>> fields;  // median, q25, q75
};

std::vector<GroupStats> summarize(const std::vector<TrialRecord>& records) {
    std::map<std::pair<std::string, Index>, std::vector<const TrialRecord*>> groups;
    for (const TrialRecord& r : records) groups[{r.method, r.m}].push_back(&r);

    std::vector<GroupStats> out;
    for (const auto& [key, rows] : groups) {
        GroupStats g;
        g.method = key.first;
        g.m = key.second;
        g.count = static_cast<Index>(rows.size());
        const std::pair<std::string, double TrialRecord::*> fields[] = {
            {"divergence", &TrialRecord::divergence},
            {"mmd_sq", &TrialRecord::mmd_sq},
            {"quad", &TrialRecord::quad},
            {"rel_err", &TrialRecord::rel_err},
        };
        for (const auto& [name, member] : fields) {
            std::vector<double> vals;
            for (const TrialRecord* r : rows) {
                const double v = r->*member;
                if (std::isfinite(v)) vals.push_back(v);
            }
            if (vals.empty()) continue;
            g.fields[name] = {quantile(vals, 0.5), quantile(vals, 0.25),
                              quantile(vals, 0.75)};
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_outputs(const Setup& s, const std::vector<TrialRecord>& records,
                   const std::vector<GroupStats>& summary) {
    json j;
    j["version"] = 1;
    j["experiment"] = s.experiment;
    j["config"] = {{"d", s.d},
                   {"epsilon", s.epsilon},
                   {"generator", s.generator},
                   {"m_values", s.ms},
                   {"max_iter", s.max_iter},
                   {"n", s.n},
                   {"refine", s.refine},
                   {"seed", s.seed},
                   {"tol", s.tol},
                   {"trials", s.trials}};
    json recs = json::array();
    for (const TrialRecord& r : records) {
        recs.push_back({{"divergence", r.divergence},
                        {"m", r.m},
                        {"method", r.method},
                        {"mmd_sq", r.mmd_sq},
                        {"quad", r.quad},
                        {"rel_err", r.rel_err},
                        {"seed", r.seed},
                        {"support", r.support},
                        {"trial", r.trial},
                        {"wall_seconds", r.wall_seconds}});
    }
    j["records"] = std::move(recs);
    json sums = json::array();
    for (const GroupStats& g : summary) {
        json entry = {{"count", g.count}, {"m", g.m}, {"method", g.method}};
        for (const auto& [name, q] : g.fields) {
            entry[name] = {{"median", q[0]}, {"q25", q[1]}, {"q75", q[2]}};
        }
        sums.push_back(std::move(entry));
    }
    j["summary"] = std::move(sums);
    if (!s.no_timestamp) j["timestamp"] = iso_timestamp();

    const std::string json_path = s.out_prefix + ".json";
    std::ofstream jf(json_path);
    if (!jf) throw std::runtime_error("bench: cannot write " + json_path);
    jf << j.dump(2) << "\n";

    const std::string csv_path = s.out_prefix + ".csv";
    std::ofstream cf(csv_path);
    if (!cf) throw std::runtime_error("bench: cannot write " + csv_path);
    cf << "method,m,trial,divergence,mmd_sq,quad,rel_err,support,seed,wall_seconds\n";
    for (const TrialRecord& r : records) {
        cf << r.method << ',' << r.m << ',' << r.trial << ',' << fmt_double(r.divergence)
           << ',' << fmt_double(r.mmd_sq) << ',' << fmt_double(r.quad) << ','
           << fmt_double(r.rel_err) << ',' << r.support << ',' << r.seed << ','
           << fmt_double(r.wall_seconds) << "\n";
    }
}

}  // namespace

int resolve_threads(int requested, Index trials) {
    const unsigned hw = std::thread::hardware_concurrency();
    long threads = requested > 0 ? requested : (hw > 0 ? static_cast<long>(hw) : 1);
    if (const char* env = std::getenv("CO2_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) threads = std::min(threads, cap);
    }
    threads = std::min(threads, static_cast<long>(trials));
    return static_cast<int>(std::max(1L, threads));
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw UsageError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

void run_bench(const BenchOptions& options, std::ostream& log) {
    const Setup s = resolve(options);

    std::vector<std::vector<TrialRecord>> slots(static_cast<std::size_t>(s.trials));
    std::atomic<Index> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const Index t = cursor.fetch_add(1);
            if (t >= s.trials) break;
            try {
                slots[static_cast<std::size_t>(t)] = run_trial(s, t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                break;
            }
        }
    };

    const int nthreads = resolve_threads(options.threads, s.trials);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<TrialRecord> records;
    for (auto& slot : slots) {
        for (TrialRecord& r : slot) records.push_back(std::move(r));
    }

    const std::vector<GroupStats> summary = summarize(records);
    write_outputs(s, records, summary);

    log << s.experiment << ": n=" << s.n << " d=" << s.d << " trials=" << s.trials
        << " epsilon=" << fmt_double(s.epsilon) << " seed=" << s.seed
        << (s.refine ? " refine=true" : "") << "\n";
    for (const GroupStats& g : summary) {
        log << "  " << g.method << " m=" << g.m;
        for (const auto& [name, q] : g.fields) {
            log << " " << name << " median=" << fmt_double(q[0])
                << " q25=" << fmt_double(q[1]) << " q75=" << fmt_double(q[2]);
        }
        log << "\n";
    }
    log << "wrote " << s.out_prefix << ".json and " << s.out_prefix << ".csv\n";
}

}  // namespace co2
