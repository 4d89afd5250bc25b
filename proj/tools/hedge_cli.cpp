// Command-line front end: `hedge solve` runs one algorithm on a problem file
// and writes metrics.csv / solution.json / manifest.json; `hedge bench` runs
// seeded repetitions and aggregates quartile curves over logarithmic time
// bins.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "hedge/io.hpp"

namespace {

using namespace hedge;

struct CliOptions {
    std::string algo = "ph";
    std::string sampling = "uniform";
    std::string eta = "unit";
    std::string reference = "extensive-form";
    std::string problem_path;
    std::string out_dir = ".";
    std::string sim_schedule = "none";
    AlgorithmConfig config;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
    cmd->add_option("--problem", opt.problem_path, "problem file (JSON)")->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--algo", opt.algo, "ph|rph|par|async")
        ->check(CLI::IsMember({"ph", "rph", "par", "async"}));
    cmd->add_option("--sampling", opt.sampling, "uniform|p|file:<path>");
    cmd->add_option("--mu", opt.config.mu, "proximal parameter");
    cmd->add_option("--eta", opt.eta, "unit|fixed:<v>|delay-bound:<c>,<tau>");
    cmd->add_option("--workers", opt.config.workers, "worker count (par/async)");
    cmd->add_option("--seed", opt.config.seed, "draw seed");
    cmd->add_option("--max-time", opt.config.stopping.max_time_s, "time budget in seconds");
    cmd->add_option("--max-subproblems", opt.config.stopping.max_subproblems,
                    "subproblem solve budget");
    cmd->add_option("--eps-abs", opt.config.stopping.eps_abs, "absolute residual threshold");
    cmd->add_option("--eps-rel", opt.config.stopping.eps_rel, "relative residual threshold");
    cmd->add_option("--eps-sub", opt.config.eps_sub, "subproblem oracle tolerance");
    cmd->add_option("--residual-window", opt.config.residual_window,
                    "events per residual window for randomized variants (0: scenario count)");
    cmd->add_option("--metric-stride", opt.config.metric_stride,
                    "events between metric rows (0: scenario count)");
    cmd->add_option("--reference", opt.reference, "none|extensive-form|file:<path>");
    cmd->add_option("--sim-schedule", opt.sim_schedule, "schedule file or 'none'");
}

SamplingLaw parse_sampling(const std::string& text) {
    if (text == "uniform") return SamplingLaw::uniform();
    if (text == "p") return SamplingLaw::proportional_to_p();
    if (text.rfind("file:", 0) == 0) {
        const json doc = json::parse(read_text(text.substr(5)));
        Eigen::VectorXd q(doc.size());
        for (std::size_t i = 0; i < doc.size(); ++i) q[static_cast<long>(i)] = doc[i].get<double>();
        return SamplingLaw::explicit_law(std::move(q));
    }
    throw parse_error("--sampling: expected uniform|p|file:<path>");
}

EtaRule parse_eta(const std::string& text) {
    if (text == "unit") return EtaRule::unit();
    if (text.rfind("fixed:", 0) == 0) return EtaRule::fixed(std::stod(text.substr(6)));
    if (text.rfind("delay-bound:", 0) == 0) {
        const std::string body = text.substr(12);
        const auto comma = body.find(',');
        if (comma == std::string::npos)
            throw parse_error("--eta: delay-bound needs <c>,<tau>");
        return EtaRule::delay_bound(std::stod(body.substr(0, comma)),
                                    std::stol(body.substr(comma + 1)));
    }
    throw parse_error("--eta: expected unit|fixed:<v>|delay-bound:<c>,<tau>");
}

RunRecord dispatch_solve(const std::string& algo, const std::vector<QpScenarioProblem>& problems,
                         const ScenarioTree& tree, const AlgorithmConfig& config,
                         const Reference* reference) {
    if (algo == "ph") return solve_ph(problems, tree, config, reference);
    if (algo == "rph") return solve_rph(problems, tree, config, reference);
    if (algo == "par") return solve_rph_parallel(problems, tree, config, reference);
    if (algo == "async") return solve_rph_async(problems, tree, config, reference);
    throw parse_error("--algo: expected ph|rph|par|async");
}

json manifest_json(const CliOptions& opt, const ScenarioTree& tree, double resolved_eta) {
    json m;
    m["algo"] = opt.algo;
    m["problem"] = opt.problem_path;
    m["problem_hash"] = content_hash_hex(read_text(opt.problem_path));
    m["mu"] = opt.config.mu;
    m["sampling"] = opt.sampling;
    m["eta"] = opt.eta;
    m["eta_resolved"] = resolved_eta;
    m["workers"] = opt.config.workers;
    m["seed"] = opt.config.seed;
    m["max_time_s"] = opt.config.stopping.max_time_s;
    m["max_subproblems"] = opt.config.stopping.max_subproblems;
    m["eps_abs"] = opt.config.stopping.eps_abs;
    m["eps_rel"] = opt.config.stopping.eps_rel;
    m["eps_sub"] = opt.config.eps_sub;
    m["residual_window"] = opt.config.residual_window > 0 ? opt.config.residual_window
                                                          : tree.num_scenarios();
    m["metric_stride"] = opt.config.metric_stride > 0 ? opt.config.metric_stride
                                                       : tree.num_scenarios();
    m["reference"] = opt.reference;
    m["scenarios"] = tree.num_scenarios();
    m["stages"] = tree.num_stages();
    if (opt.config.schedule)
        m["sim_schedule"] = schedule_to_json(*opt.config.schedule);
    else
        m["sim_schedule"] = nullptr;
    return m;
}

std::optional<Reference> resolve_reference(const CliOptions& opt, const ScenarioTree& tree,
                                           const std::vector<QpScenarioProblem>& problems) {
    if (opt.reference == "none") return std::nullopt;
    if (opt.reference == "extensive-form")
        return reference_for(opt.problem_path, tree, problems);
    if (opt.reference.rfind("file:", 0) == 0) {
        const json doc = json::parse(read_text(opt.reference.substr(5)));
        Reference ref;
        ref.f_star = doc.at("f_star").get<double>();
        const json& x = doc.at("x_star");
        ref.x_star.resize(static_cast<long>(x.size()), tree.layout().n);
        for (std::size_t s = 0; s < x.size(); ++s)
            for (int j = 0; j < tree.layout().n; ++j)
                ref.x_star(static_cast<long>(s), j) = x[s][j].get<double>();
        return ref;
    }
    throw parse_error("--reference: expected none|extensive-form|file:<path>");
}

void finalize_options(CliOptions& opt) {
    opt.config.sampling = parse_sampling(opt.sampling);
    opt.config.eta = parse_eta(opt.eta);
    if (opt.sim_schedule != "none") opt.config.schedule = load_schedule(opt.sim_schedule);
    opt.config.validate();
}

int run_solve(CliOptions opt) {
    finalize_options(opt);
    auto [tree, problems] = load_problem(opt.problem_path);
    const std::optional<Reference> reference = resolve_reference(opt, tree, problems);
    std::filesystem::create_directories(opt.out_dir);

    const RunRecord record =
        dispatch_solve(opt.algo, problems, tree, opt.config, reference ? &*reference : nullptr);

    const Eigen::VectorXd q = opt.config.sampling.resolve(tree);
    const double resolved_eta = opt.config.eta.resolve(tree.num_scenarios(), q.minCoeff());
    const std::filesystem::path out(opt.out_dir);
    write_metrics_csv((out / "metrics.csv").string(), record.rows);
    write_text((out / "solution.json").string(), solution_to_json(record).dump(2) + "\n");
    write_text((out / "manifest.json").string(),
               manifest_json(opt, tree, resolved_eta).dump(2) + "\n");

    std::cout << "termination: " << record.termination << "\n"
              << "objective: " << record.objective << "\n"
              << "subproblems: " << record.n_subproblems << "\n";
    if (record.termination.rfind("error:", 0) == 0) {
        std::cerr << "error: runtime: " << record.termination << "\n";
        return static_cast<int>(ErrorCategory::runtime);
    }
    return 0;
}

int run_bench(CliOptions opt, int repetitions, std::uint64_t seed_base, int bins, int jobs) {
    finalize_options(opt);
    if (repetitions < 1) throw parse_error("--repetitions must be at least 1");
    if (jobs < 1) throw parse_error("--jobs must be at least 1");
    if (jobs > 1 && opt.config.workers > 1)
        throw parse_error("--jobs > 1 requires --workers 1 to keep timing honest");

    auto [tree, problems] = load_problem(opt.problem_path);
    const std::optional<Reference> reference = resolve_reference(opt, tree, problems);
    std::filesystem::create_directories(opt.out_dir);

    std::vector<std::vector<MetricsRow>> runs(repetitions);
    std::vector<std::string> failures;
    std::mutex failures_mutex;
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= repetitions) return;
            AlgorithmConfig config = opt.config;
            config.seed = seed_base + static_cast<std::uint64_t>(r);
            try {
                runs[r] = dispatch_solve(opt.algo, problems, tree, config,
                                         reference ? &*reference : nullptr)
                              .rows;
            } catch (const std::exception& e) {
                std::lock_guard lock(failures_mutex);
                failures.push_back("rep " + std::to_string(r) + ": " + e.what());
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < std::min(jobs, repetitions); ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<std::vector<MetricsRow>> successes;
    for (auto& run : runs)
        if (!run.empty()) successes.push_back(std::move(run));
    if (successes.empty()) {
        std::cerr << "error: runtime: all repetitions failed\n";
        for (const auto& f : failures) std::cerr << "  " << f << "\n";
        return static_cast<int>(ErrorCategory::runtime);
    }

    const std::filesystem::path out(opt.out_dir);
    struct Metric {
        const char* name;
        double (*extract)(const MetricsRow&);
    };
    const Metric metrics[] = {
        {"n_subproblems", [](const MetricsRow& r) { return static_cast<double>(r.n_subproblems); }},
        {"steplength", [](const MetricsRow& r) { return r.steplength; }},
        {"subopt_rel",
         [](const MetricsRow& r) {
             return r.subopt_rel ? *r.subopt_rel : std::numeric_limits<double>::quiet_NaN();
         }},
        {"feas_err",
         [](const MetricsRow& r) {
             return r.feas_err ? *r.feas_err : std::numeric_limits<double>::quiet_NaN();
         }},
    };
    for (const Metric& m : metrics) {
        const auto rows = aggregate_runs(successes, m.extract, bins);
        write_text((out / (std::string("bench_") + m.name + ".csv")).string(),
                   quartiles_csv(rows, m.name));
    }

    json summary;
    summary["repetitions"] = repetitions;
    summary["successes"] = successes.size();
    summary["failures"] = failures;
    summary["seed_base"] = seed_base;
    summary["bins"] = bins;
    write_text((out / "bench_summary.json").string(), summary.dump(2) + "\n");

    std::cout << "bench: " << successes.size() << "/" << repetitions << " runs aggregated\n";
    if (!failures.empty()) {
        for (const auto& f : failures) std::cerr << "warning: " << f << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scenario-decomposition solver for multistage stochastic programs"};
    app.require_subcommand(1);

    CliOptions solve_opt, bench_opt;
    CLI::App* solve_cmd = app.add_subcommand("solve", "run one algorithm on a problem file");
    add_common_flags(solve_cmd, solve_opt);

    int repetitions = 10, bins = 40, jobs = 1;
    std::uint64_t seed_base = 0;
    CLI::App* bench_cmd = app.add_subcommand("bench", "seeded repetitions with quartile curves");
    add_common_flags(bench_cmd, bench_opt);
    bench_cmd->add_option("--repetitions", repetitions, "number of seeded runs");
    bench_cmd->add_option("--seed-base", seed_base, "seed of repetition 0; rep r uses base + r");
    bench_cmd->add_option("--bins", bins, "logarithmic time bins");
    bench_cmd->add_option("--jobs", jobs, "concurrent repetitions (workers must be 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : static_cast<int>(hedge::ErrorCategory::parse);
    }

    try {
        if (solve_cmd->parsed()) return run_solve(std::move(solve_opt));
        return run_bench(std::move(bench_opt), repetitions, seed_base, bins, jobs);
    } catch (const hedge::Error& e) {
        const char* label = "runtime";
        switch (e.category) {
            case hedge::ErrorCategory::parse: label = "parse"; break;
            case hedge::ErrorCategory::infeasible: label = "infeasible"; break;
            case hedge::ErrorCategory::numerical: label = "numerical"; break;
            case hedge::ErrorCategory::runtime: label = "runtime"; break;
        }
        std::cerr << "error: " << label << ": " << e.what() << "\n";
        return static_cast<int>(e.category);
    } catch (const hedge::json::exception& e) {
        std::cerr << "error: parse: " << e.what() << "\n";
        return static_cast<int>(hedge::ErrorCategory::parse);
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return static_cast<int>(hedge::ErrorCategory::runtime);
    }
}
