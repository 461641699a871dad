#include "cli_impl.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bench.hpp"
#include "co2/co2.hpp"
#include "co2/lowrank.hpp"

namespace co2 {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string iso_timestamp() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

struct CompressArgs {
    std::string input;
    std::string out = "coreset";
    double epsilon = 1.0;
    Index m = 0;
    double tau = 0.0;
    double beta = 0.0;
    bool m_set = false;
    bool tau_set = false;
    bool beta_set = false;
    Index theta = 3;
    Index m_max = 0;
    std::uint64_t seed = 0;
    double tol = 1e-9;
    Index max_iter = 10000;
    Index draws = 100000;
    bool exact_g = false;
    bool has_header = false;
    bool standardize_input = false;
    bool no_timestamp = false;
};

int cmd_compress(const CompressArgs& a) {
    PointCloud cloud = load_csv(a.input, a.has_header);
    if (a.standardize_input) cloud = standardize(cloud).first;
    const DiscreteDistribution data = uniform(cloud);

    Co2Config cfg;
    cfg.epsilon = a.epsilon;
    if (a.m_set) cfg.m = a.m;
    if (a.tau_set) cfg.tau = a.tau;
    if (a.beta_set) cfg.beta = a.beta;
    cfg.theta = a.theta;
    cfg.m_max = a.m_max;
    cfg.seed = a.seed;
    cfg.sinkhorn_tol = a.tol;
    cfg.sinkhorn_max_iter = a.max_iter;
    cfg.use_exact_G = a.exact_g;
    cfg.tau_draws = a.draws;

    const Coreset c = compress(data, cfg);

    json j;
    j["version"] = 1;
    j["method"] = c.method;
    j["indices"] = c.indices;
    std::vector<double> w(c.weights.data(), c.weights.data() + c.weights.size());
    j["weights"] = w;
    j["seed"] = c.seed;
    j["config"] = {{"beta", a.beta_set ? json(a.beta) : json()},
                   {"draws", a.draws},
                   {"epsilon", a.epsilon},
                   {"exact_G", a.exact_g},
                   {"has_header", a.has_header},
                   {"input", a.input},
                   {"m", a.m_set ? json(a.m) : json()},
                   {"m_max", a.m_max},
                   {"max_iter", a.max_iter},
                   {"standardize", a.standardize_input},
                   {"tau", a.tau_set ? json(a.tau) : json()},
                   {"theta", a.theta},
                   {"tol", a.tol}};
    if (!a.no_timestamp) j["timestamp"] = iso_timestamp();
    write_text(a.out + ".json", j.dump(2) + "\n");

    std::string csv = "index,weight\n";
    for (std::size_t i = 0; i < c.indices.size(); ++i) {
        csv += std::to_string(c.indices[i]) + "," +
               fmt_double(c.weights(static_cast<Index>(i))) + "\n";
    }
    write_text(a.out + ".csv", csv);

    std::cout << "method=" << c.method << " support=" << c.indices.size()
              << " m_target=" << c.m_target << " quad=" << fmt_double(c.quad_value)
              << "\n"
              << "wrote " << a.out << ".json and " << a.out << ".csv\n";
    return 0;
}

struct DiagArgs {
    std::string input;
    std::string out = "diag";
    double epsilon = 1.0;
    double tol = 1e-9;
    Index max_iter = 10000;
    bool has_header = false;
    bool no_timestamp = false;
};

int cmd_diag(const DiagArgs& a) {
    const PointCloud cloud = load_csv(a.input, a.has_header);
    const DiscreteDistribution data = uniform(cloud);
    const Index n = data.n();

    const SelfPlan plan = self_plan(data, a.epsilon, a.tol, a.max_iter);
    const Matrix npi = static_cast<double>(n) * plan.plan;
    const TailSum plan_tail = tail_sum(npi);

    const GramMatrix gk = gram(GaussianKernel{a.epsilon}, cloud);
    const Matrix k_over_n = gk.entries / static_cast<double>(n);
    const TailSum gram_tail = tail_sum(k_over_n);

    // Smallest 1-based count of retained eigenvalues whose tail is already
    // below 1/n^2; the zero tail at i = n makes the search total.
    const double cutoff = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    Index suggested = n;
    for (Index i = 1; i <= n; ++i) {
        if (gram_tail.values(i) <= cutoff) {
            suggested = i;
            break;
        }
    }

    auto to_vec = [](const Vector& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    json j;
    j["version"] = 1;
    j["n"] = n;
    j["suggested_m"] = suggested;
    j["spectrum_npi"] = to_vec(plan_tail.spectrum);
    j["tail_npi"] = to_vec(plan_tail.values);
    j["spectrum_gram"] = to_vec(gram_tail.spectrum);
    j["tail_gram"] = to_vec(gram_tail.values);
    j["config"] = {{"epsilon", a.epsilon},
                   {"has_header", a.has_header},
                   {"input", a.input},
                   {"max_iter", a.max_iter},
                   {"tol", a.tol}};
    if (!a.no_timestamp) j["timestamp"] = iso_timestamp();
    write_text(a.out + ".json", j.dump(2) + "\n");

    std::cout << "n=" << n << " suggested_m=" << suggested
              << " top_npi=" << fmt_double(plan_tail.spectrum(0))
              << " top_gram=" << fmt_double(gram_tail.spectrum(0)) << "\n"
              << "wrote " << a.out << ".json\n";
    return 0;
}

struct SinkhornArgs {
    std::string input_a;
    std::string input_b;
    double epsilon = 1.0;
    double tol = 1e-9;
    Index max_iter = 10000;
    bool has_header = false;
};

int cmd_sinkhorn(const SinkhornArgs& a) {
    const PointCloud ca = load_csv(a.input_a, a.has_header);
    const PointCloud cb = load_csv(a.input_b, a.has_header);
    const DiscreteDistribution mu = uniform(ca);
    const DiscreteDistribution nu = uniform(cb);

    const SinkhornSolution cross = solve({mu, nu, a.epsilon}, a.tol,
                                         static_cast<int>(a.max_iter));
    const SinkhornSolution self_a = solve({mu, mu, a.epsilon}, a.tol,
                                          static_cast<int>(a.max_iter));
    const SinkhornSolution self_b = solve({nu, nu, a.epsilon}, a.tol,
                                          static_cast<int>(a.max_iter));
    const double s =
        divergence_from_terms(cross.ot_value, self_a.ot_value, self_b.ot_value);

    std::cout << "divergence=" << fmt_double(s)
              << " ot_cross=" << fmt_double(cross.ot_value)
              << " ot_self_a=" << fmt_double(self_a.ot_value)
              << " ot_self_b=" << fmt_double(self_b.ot_value)
              << " iterations=" << cross.iterations << "\n";
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Coreset compression for the Sinkhorn divergence"};
    app.require_subcommand(1);

    CompressArgs ca;
    CLI::App* compress_cmd =
        app.add_subcommand("compress", "Compress a CSV point set to a coreset");
    compress_cmd->add_option("input", ca.input, "input CSV of points")->required();
    compress_cmd->add_option("--epsilon", ca.epsilon, "entropic regularizer");
    CLI::App* mode = compress_cmd->add_option_group("mode", "coreset size selection");
    CLI::Option* opt_m = mode->add_option("--m", ca.m, "exact coreset size");
    CLI::Option* opt_tau = mode->add_option("--tau", ca.tau, "error threshold");
    CLI::Option* opt_beta =
        mode->add_option("--beta", ca.beta, "quantile level for automatic tau");
    mode->require_option(1);
    compress_cmd->add_option("--theta", ca.theta, "sketch oversampling factor");
    compress_cmd->add_option("--m-max", ca.m_max, "sweep size cap in threshold mode");
    compress_cmd->add_option("--seed", ca.seed, "RNG seed");
    compress_cmd->add_option("--tol", ca.tol, "Sinkhorn tolerance");
    compress_cmd->add_option("--max-iter", ca.max_iter, "Sinkhorn iteration cap");
    compress_cmd->add_option("--draws", ca.draws, "Monte Carlo draws for tau");
    compress_cmd->add_flag("--exact-G", ca.exact_g,
                           "exact divergence-Hessian eigenvalue transform");
    compress_cmd->add_flag("--has-header", ca.has_header, "skip a CSV header row");
    compress_cmd->add_flag("--standardize", ca.standardize_input,
                           "center and scale columns before compression");
    compress_cmd->add_flag("--no-timestamp", ca.no_timestamp,
                           "omit the timestamp field for byte-stable output");
    compress_cmd->add_option("--out", ca.out, "output path prefix");

    BenchOptions ba;
    CLI::App* bench_cmd = app.add_subcommand("bench", "Run a benchmark experiment");
    bench_cmd
        ->add_option("experiment", ba.experiment,
                     "mixture | recovery | quadapprox | baselines")
        ->required();
    bench_cmd->add_option("--n", ba.n, "points per trial");
    bench_cmd->add_option("--d", ba.d, "dimension (where the generator allows)");
    bench_cmd->add_option("--trials", ba.trials, "number of trials");
    bench_cmd->add_option("--m", ba.m_values, "coreset sizes (repeatable)");
    bench_cmd->add_option("--epsilon", ba.epsilon, "entropic regularizer");
    bench_cmd->add_option("--tol", ba.sinkhorn_tol, "Sinkhorn tolerance");
    bench_cmd->add_option("--max-iter", ba.sinkhorn_max_iter, "Sinkhorn iteration cap");
    bench_cmd->add_option("--seed", ba.seed, "RNG seed");
    bench_cmd->add_option("--threads", ba.threads, "worker threads (capped by CO2_THREADS)");
    bench_cmd->add_flag("--no-timestamp", ba.no_timestamp,
                        "omit timestamp and zero wall times");
    bench_cmd->add_option("--out", ba.out_prefix, "output path prefix");

    DiagArgs da;
    CLI::App* diag_cmd =
        app.add_subcommand("diag", "Spectral diagnostics for a CSV point set");
    diag_cmd->add_option("input", da.input, "input CSV of points")->required();
    diag_cmd->add_option("--epsilon", da.epsilon, "entropic regularizer");
    diag_cmd->add_option("--tol", da.tol, "Sinkhorn tolerance");
    diag_cmd->add_option("--max-iter", da.max_iter, "Sinkhorn iteration cap");
    diag_cmd->add_flag("--has-header", da.has_header, "skip a CSV header row");
    diag_cmd->add_flag("--no-timestamp", da.no_timestamp, "omit the timestamp field");
    diag_cmd->add_option("--out", da.out, "output path prefix");

    SinkhornArgs sa;
    CLI::App* sink_cmd = app.add_subcommand(
        "sinkhorn", "Divergence between two CSV point sets, uniform weights");
    sink_cmd->add_option("input_a", sa.input_a, "first CSV")->required();
    sink_cmd->add_option("input_b", sa.input_b, "second CSV")->required();
    sink_cmd->add_option("--epsilon", sa.epsilon, "entropic regularizer");
    sink_cmd->add_option("--tol", sa.tol, "Sinkhorn tolerance");
    sink_cmd->add_option("--max-iter", sa.max_iter, "Sinkhorn iteration cap");
    sink_cmd->add_flag("--has-header", sa.has_header, "skip a CSV header row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ca.m_set = opt_m->count() > 0;
    ca.tau_set = opt_tau->count() > 0;
    ca.beta_set = opt_beta->count() > 0;

    try {
        if (*compress_cmd) return cmd_compress(ca);
        if (*bench_cmd) {
            run_bench(ba, std::cout);
            return 0;
        }
        if (*diag_cmd) return cmd_diag(da);
        if (*sink_cmd) return cmd_sinkhorn(sa);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace co2
