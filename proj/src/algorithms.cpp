#include "hedge/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <unordered_map>

namespace hedge {

Eigen::VectorXd SamplingLaw::resolve(const ScenarioTree& tree) const {
    const int S = tree.num_scenarios();
    Eigen::VectorXd out;
    switch (kind) {
        case Kind::uniform:
            out = Eigen::VectorXd::Constant(S, 1.0 / S);
            break;
        case Kind::proportional_to_p:
            out = tree.probabilities();
            break;
        case Kind::explicit_q:
            out = q;
            break;
    }
    if (out.size() != S) throw parse_error("SamplingLaw: q length does not match scenario count");
    for (int s = 0; s < S; ++s)
        if (!(out[s] > 0.0)) throw parse_error("SamplingLaw: probabilities must be positive");
    if (std::abs(out.sum() - 1.0) > 1e-12)
        throw parse_error("SamplingLaw: probabilities must sum to 1 within 1e-12");
    out /= out.sum();
    return out;
}

double EtaRule::resolve(int S, double q_min) const {
    switch (kind) {
        case Kind::unit:
            return 1.0;
        case Kind::fixed:
            if (!(value > 0.0)) throw parse_error("EtaRule: fixed stepsize must be positive");
            return value;
        case Kind::delay_bound: {
            if (!(c > 0.0 && c < 1.0)) throw parse_error("EtaRule: c must lie in (0,1)");
            if (tau < 0) throw parse_error("EtaRule: tau must be nonnegative");
            return c * static_cast<double>(S) * q_min /
                   (2.0 * static_cast<double>(tau) * std::sqrt(q_min) + 1.0);
        }
    }
    throw parse_error("EtaRule: unknown kind");
}

void AlgorithmConfig::validate() const {
    if (!(mu > 0.0)) throw parse_error("config: mu must be positive");
    if (workers < 1) throw parse_error("config: need at least one worker");
    if (!(eps_sub > 0.0)) throw parse_error("config: eps_sub must be positive");
    if (stopping.eps_abs < 0.0 || stopping.eps_rel < 0.0)
        throw parse_error("config: residual thresholds must be nonnegative");
    if (stopping.eps_abs == 0.0 && stopping.eps_rel == 0.0)
        throw parse_error("config: eps_abs and eps_rel cannot both be zero");
    if (eta.kind == EtaRule::Kind::fixed && !(eta.value > 0.0))
        throw parse_error("config: fixed stepsize must be positive");
    if (eta.kind == EtaRule::Kind::delay_bound && !(eta.c > 0.0 && eta.c < 1.0))
        throw parse_error("config: delay-bound stepsize needs 0 < c < 1");
}

bool residual_stop(const IterateMatrix& z_prev, const IterateMatrix& z_curr, double eps_abs,
                   double eps_rel) {
    if (z_prev.rows() != z_curr.rows() || z_prev.cols() != z_curr.cols())
        throw runtime_fault("residual_stop: dimension mismatch");
    return (z_curr - z_prev).norm() <= eps_abs + eps_rel * z_curr.norm();
}

std::pair<std::optional<double>, std::optional<double>> run_metrics(
    const IterateMatrix& x_tilde, const std::vector<std::optional<Eigen::VectorXd>>& last_yhat,
    const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
    const Reference* reference) {
    std::optional<double> subopt;
    if (reference && reference->f_star != 0.0) {
        double obj = 0.0;
        for (int s = 0; s < tree.num_scenarios(); ++s)
            obj += tree.probabilities()[s] * problems[s].objective(x_tilde.row(s).transpose());
        subopt = (obj - reference->f_star) / reference->f_star;
    }
    std::optional<double> feas;
    for (int s = 0; s < tree.num_scenarios(); ++s) {
        if (!last_yhat[s]) continue;
        const double d = (*last_yhat[s] - x_tilde.row(s).transpose()).norm();
        feas = feas ? std::max(*feas, d) : d;
    }
    return {subopt, feas};
}

namespace {

// Wall time or deterministic simulated time, depending on configuration.
class RunClock {
public:
    explicit RunClock(bool simulated)
        : simulated_(simulated), start_(std::chrono::steady_clock::now()) {}

    void advance(double seconds) { sim_seconds_ += seconds; }
    void sync(double seconds) { sim_seconds_ = seconds; }
    double now() const {
        if (simulated_) return sim_seconds_;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool simulated_;
    double sim_seconds_ = 0.0;
    std::chrono::steady_clock::time_point start_;
};

// Scenario draws: the forced test sequence first, then seeded sampling.
class Drawer {
public:
    Drawer(const Eigen::VectorXd& q, std::uint64_t seed, std::vector<int> forced)
        : sampler_(std::vector<double>(q.data(), q.data() + q.size())),
          rng_(seed, 0),
          forced_(std::move(forced)) {}

    int draw() {
        if (next_forced_ < forced_.size()) return forced_[next_forced_++];
        return sampler_.draw(rng_);
    }

private:
    DiscreteSampler sampler_;
    Xoshiro256ss rng_;
    std::vector<int> forced_;
    std::size_t next_forced_ = 0;
};

// Running sum of squared row updates over a sliding window of events; the
// square root plays the role of the iterate-difference residual for the
// randomized variants.
class ResidualWindow {
public:
    explicit ResidualWindow(int capacity) : capacity_(capacity) {}

    void push(double squared_norm) {
        entries_.push_back(squared_norm);
        sum_ += squared_norm;
        if (static_cast<int>(entries_.size()) > capacity_) {
            sum_ -= entries_.front();
            entries_.pop_front();
        }
        if (sum_ < 0.0) sum_ = 0.0;
    }

    bool full() const { return static_cast<int>(entries_.size()) >= capacity_; }
    double norm() const { return std::sqrt(std::max(sum_, 0.0)); }

private:
    int capacity_;
    std::deque<double> entries_;
    double sum_ = 0.0;
};

IterateMatrix initial_iterate(const AlgorithmConfig& config, const ScenarioTree& tree) {
    if (!config.x0)
        return IterateMatrix::Zero(tree.num_scenarios(), tree.layout().n);
    const IterateMatrix& x0 = *config.x0;
    tree.check_dims(x0);
    const IterateMatrix proj = project_nonanticipative(x0, tree);
    if ((proj - x0).norm() > 1e-10 * (1.0 + x0.norm()))
        throw parse_error("config: x0 must lie in the non-anticipativity subspace");
    return x0;
}

void check_inputs(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                  const AlgorithmConfig& config) {
    config.validate();
    if (static_cast<int>(problems.size()) != tree.num_scenarios())
        throw parse_error("solver: one scenario problem per scenario required");
    for (const auto& p : problems)
        if (p.n != tree.layout().n) throw parse_error("solver: scenario dimension mismatch");
}

ProxSettings prox_settings(const AlgorithmConfig& config) {
    ProxSettings st;
    st.tol = config.eps_sub;
    return st;
}

double sequential_duration(const SimSchedule& schedule, int scenario, long& seq,
                           Xoshiro256ss& rng) {
    return schedule.duration_ticks(scenario, seq++, rng) * schedule.tick_seconds;
}

}  // namespace

RunRecord solve_ph(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                   const AlgorithmConfig& config, const Reference* reference) {
    check_inputs(problems, tree, config);
    const int S = tree.num_scenarios();
    const double mu = config.mu;
    const ProxSettings settings = prox_settings(config);

    IterateMatrix x = initial_iterate(config, tree);
    IterateMatrix w = IterateMatrix::Zero(S, tree.layout().n);
    IterateMatrix z = x + mu * w;

    std::vector<ProxWorkspace> workspaces(S);
    std::vector<std::optional<Eigen::VectorXd>> last_yhat(S);
    RunClock clock(config.schedule.has_value());
    Xoshiro256ss sched_rng(config.schedule ? config.schedule->seed : 0, 0);
    long sched_seq = 0;

    RunRecord record;
    std::vector<Eigen::VectorXd> anchors(S);
    for (long k = 1;; ++k) {
        for (int s = 0; s < S; ++s) anchors[s] = (x.row(s) - mu * w.row(s)).transpose();
        IterateMatrix yhat(S, tree.layout().n);
        for (int s = 0; s < S; ++s) {
            ProxResult res = prox(problems[s], anchors[s], mu, settings, &workspaces[s]);
            if (res.status == ProxStatus::infeasible)
                throw infeasible_error("scenario " + std::to_string(s) + " subproblem infeasible");
            if (res.status != ProxStatus::solved)
                throw numerical_error("scenario " + std::to_string(s) + " prox did not converge");
            yhat.row(s) = res.y.transpose();
            last_yhat[s] = res.y;
            if (config.schedule)
                clock.advance(sequential_duration(*config.schedule, s, sched_seq, sched_rng));
        }
        IterateMatrix x_next = project_nonanticipative(yhat, tree);
        w += (yhat - x_next) / mu;
        record.n_subproblems += S;
        record.iterations = k;

        IterateMatrix z_next = x_next + mu * w;
        MetricsRow row;
        row.wall_time_s = clock.now();
        row.iteration = k;
        row.n_subproblems = record.n_subproblems;
        row.steplength = (z_next - z).norm();
        if (reference) {
            auto [subopt, feas] = run_metrics(x_next, last_yhat, problems, tree, reference);
            row.subopt_rel = subopt;
            row.feas_err = feas;
        }
        record.rows.push_back(row);

        const bool residual_hit =
            residual_stop(z, z_next, config.stopping.eps_abs, config.stopping.eps_rel);
        x = x_next;
        z = z_next;
        if (residual_hit) { record.termination = "residual"; break; }
        if (clock.now() >= config.stopping.max_time_s) { record.termination = "max-time"; break; }
        if (record.n_subproblems >= config.stopping.max_subproblems) {
            record.termination = "max-subproblems";
            break;
        }
    }

    record.x_final = x;
    record.z_final = z;
    double obj = 0.0;
    for (int s = 0; s < S; ++s)
        obj += tree.probabilities()[s] * problems[s].objective(record.x_final.row(s).transpose());
    record.objective = obj;
    return record;
}

RunRecord solve_rph(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                    const AlgorithmConfig& config, const Reference* reference) {
    check_inputs(problems, tree, config);
    const int S = tree.num_scenarios();
    const double mu = config.mu;
    const ProxSettings settings = prox_settings(config);
    const Eigen::VectorXd q = config.sampling.resolve(tree);

    IterateMatrix z = initial_iterate(config, tree);
    Drawer drawer(q, config.seed, config.forced_draws);
    std::vector<ProxWorkspace> workspaces(S);
    std::vector<std::optional<Eigen::VectorXd>> last_yhat(S);
    ResidualWindow window(config.residual_window > 0 ? config.residual_window : S);
    const int stride = config.metric_stride > 0 ? config.metric_stride : S;
    RunClock clock(config.schedule.has_value());
    Xoshiro256ss sched_rng(config.schedule ? config.schedule->seed : 0, 0);
    long sched_seq = 0;

    RunRecord record;
    for (long k = 1;; ++k) {
        const int s = drawer.draw();
        const Eigen::VectorXd x_s = project_scenario(z, s, tree);
        const Eigen::VectorXd anchor = 2.0 * x_s - z.row(s).transpose();
        ProxResult res = prox(problems[s], anchor, mu, settings, &workspaces[s]);
        if (res.status == ProxStatus::infeasible)
            throw infeasible_error("scenario " + std::to_string(s) + " subproblem infeasible");
        if (res.status != ProxStatus::solved)
            throw numerical_error("scenario " + std::to_string(s) + " prox did not converge");
        const Eigen::VectorXd delta = res.y - x_s;
        z.row(s) += delta.transpose();
        last_yhat[s] = res.y;
        window.push(delta.squaredNorm());
        record.n_subproblems += 1;
        record.iterations = k;
        if (config.schedule)
            clock.advance(sequential_duration(*config.schedule, s, sched_seq, sched_rng));

        if (k % stride == 0) {
            MetricsRow row;
            row.wall_time_s = clock.now();
            row.iteration = k;
            row.n_subproblems = record.n_subproblems;
            row.steplength = window.norm();
            if (reference) {
                const IterateMatrix x_tilde = project_nonanticipative(z, tree);
                auto [subopt, feas] = run_metrics(x_tilde, last_yhat, problems, tree, reference);
                row.subopt_rel = subopt;
                row.feas_err = feas;
            }
            record.rows.push_back(row);
        }

        if (window.full() &&
            window.norm() <= config.stopping.eps_abs + config.stopping.eps_rel * z.norm()) {
            record.termination = "residual";
            break;
        }
        if (clock.now() >= config.stopping.max_time_s) { record.termination = "max-time"; break; }
        if (record.n_subproblems >= config.stopping.max_subproblems) {
            record.termination = "max-subproblems";
            break;
        }
    }

    record.x_final = project_nonanticipative(z, tree);
    record.z_final = z;
    double obj = 0.0;
    for (int s = 0; s < S; ++s)
        obj += tree.probabilities()[s] * problems[s].objective(record.x_final.row(s).transpose());
    record.objective = obj;
    return record;
}

RunRecord solve_rph_parallel(const std::vector<QpScenarioProblem>& problems,
                             const ScenarioTree& tree, const AlgorithmConfig& config,
                             const Reference* reference) {
    check_inputs(problems, tree, config);
    const int S = tree.num_scenarios();
    const int M = config.workers;
    const ProxSettings settings = prox_settings(config);
    const Eigen::VectorXd q = config.sampling.resolve(tree);

    const PoolMode mode = config.schedule ? PoolMode::simulated : config.pool_mode;
    auto pool = pool_create(M, mode, problems, config.mu, settings,
                            config.schedule.value_or(SimSchedule{}));

    IterateMatrix z = initial_iterate(config, tree);
    Drawer drawer(q, config.seed, config.forced_draws);
    std::vector<std::optional<Eigen::VectorXd>> last_yhat(S);
    ResidualWindow window(config.residual_window > 0 ? config.residual_window : S);
    const int stride = config.metric_stride > 0 ? config.metric_stride : S;
    RunClock clock(pool->simulated());

    RunRecord record;
    long next_metric_at = stride;
    long task_seq = 0;
    for (long round = 1;; ++round) {
        // i.i.d. draws, duplicates within the round collapsed to one solve
        std::vector<int> batch;
        for (int i = 0; i < M; ++i) {
            const int s = drawer.draw();
            bool seen = false;
            for (int b : batch) seen = seen || (b == s);
            if (!seen) batch.push_back(s);
        }
        std::vector<Eigen::VectorXd> snapshots(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
            snapshots[i] = project_scenario(z, batch[i], tree);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            TaskMessage task;
            task.scenario = batch[i];
            task.point = 2.0 * snapshots[i] - z.row(batch[i]).transpose();
            task.task_id = task_seq++;
            pool->dispatch(std::move(task));
        }
        std::unordered_map<int, Eigen::VectorXd> minimizers;
        bool failed = false;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            ResultMessage res = pool->next_completion();
            if (res.poisoned) {
                record.termination = "error:worker:" + res.error;
                failed = true;
            } else {
                minimizers[res.scenario] = std::move(res.minimizer);
            }
        }
        if (failed) break;

        for (std::size_t i = 0; i < batch.size(); ++i) {
            const int s = batch[i];
            const Eigen::VectorXd delta = minimizers.at(s) - snapshots[i];
            z.row(s) += delta.transpose();
            last_yhat[s] = minimizers.at(s);
            window.push(delta.squaredNorm());
        }
        record.n_subproblems += static_cast<long>(batch.size());
        record.iterations = round;
        if (pool->simulated()) clock.sync(pool->sim_time_seconds());

        if (record.n_subproblems >= next_metric_at) {
            next_metric_at += stride;
            MetricsRow row;
            row.wall_time_s = clock.now();
            row.iteration = round;
            row.n_subproblems = record.n_subproblems;
            row.steplength = window.norm();
            if (reference) {
                const IterateMatrix x_tilde = project_nonanticipative(z, tree);
                auto [subopt, feas] = run_metrics(x_tilde, last_yhat, problems, tree, reference);
                row.subopt_rel = subopt;
                row.feas_err = feas;
            }
            record.rows.push_back(row);
        }

        if (window.full() &&
            window.norm() <= config.stopping.eps_abs + config.stopping.eps_rel * z.norm()) {
            record.termination = "residual";
            break;
        }
        if (clock.now() >= config.stopping.max_time_s) { record.termination = "max-time"; break; }
        if (record.n_subproblems >= config.stopping.max_subproblems) {
            record.termination = "max-subproblems";
            break;
        }
    }

    record.x_final = project_nonanticipative(z, tree);
    record.z_final = z;
    double obj = 0.0;
    for (int s = 0; s < S; ++s)
        obj += tree.probabilities()[s] * problems[s].objective(record.x_final.row(s).transpose());
    record.objective = obj;
    return record;
}

RunRecord solve_rph_async(const std::vector<QpScenarioProblem>& problems, const ScenarioTree& tree,
                          const AlgorithmConfig& config, const Reference* reference) {
    check_inputs(problems, tree, config);
    const int S = tree.num_scenarios();
    const int M = config.workers;
    const ProxSettings settings = prox_settings(config);
    const Eigen::VectorXd q = config.sampling.resolve(tree);
    const double eta = config.eta.resolve(S, q.minCoeff());

    const PoolMode mode = config.schedule ? PoolMode::simulated : config.pool_mode;
    auto pool = pool_create(M, mode, problems, config.mu, settings,
                            config.schedule.value_or(SimSchedule{}));

    IterateMatrix z = initial_iterate(config, tree);
    Drawer drawer(q, config.seed, config.forced_draws);
    std::vector<std::optional<Eigen::VectorXd>> last_yhat(S);
    ResidualWindow window(config.residual_window > 0 ? config.residual_window : S);
    const int stride = config.metric_stride > 0 ? config.metric_stride : S;
    RunClock clock(pool->simulated());

    struct InFlight {
        int scenario;
        Eigen::VectorXd snapshot;  // x-bar at dispatch
        long dispatch_epoch;
    };
    std::unordered_map<long, InFlight> in_flight;
    long epoch = 0;
    long task_seq = 0;
    int alive = M;

    auto dispatch_fresh = [&]() {
        const int s = drawer.draw();
        const Eigen::VectorXd snapshot = project_scenario(z, s, tree);
        TaskMessage task;
        task.scenario = s;
        task.point = 2.0 * snapshot - z.row(s).transpose();
        task.dispatch_epoch = epoch;
        task.task_id = task_seq++;
        in_flight.emplace(task.task_id, InFlight{s, snapshot, epoch});
        pool->dispatch(std::move(task));
    };

    RunRecord record;
    for (int j = 0; j < M; ++j) dispatch_fresh();

    long next_metric_at = stride;
    bool stopped = false;
    while (!stopped) {
        if (pool->in_flight() == 0) {
            record.termination = "error:worker:all workers retired";
            break;
        }
        ResultMessage res = pool->next_completion();
        res.completion_epoch = epoch;
        const InFlight flight = in_flight.at(res.task_id);
        in_flight.erase(res.task_id);
        if (res.poisoned) {
            // retire this slot; keep going while someone is still alive
            if (--alive == 0) {
                record.termination = "error:worker:" + res.error;
                break;
            }
            continue;
        }
        record.delays.record(res.completion_epoch - flight.dispatch_epoch);

        const int s = flight.scenario;
        const double factor = 2.0 * eta / (static_cast<double>(S) * q[s]);
        const Eigen::VectorXd delta = factor * (res.minimizer - flight.snapshot);
        z.row(s) += delta.transpose();
        ++epoch;
        last_yhat[s] = res.minimizer;
        window.push(delta.squaredNorm());
        record.n_subproblems += 1;
        record.iterations = epoch;
        if (pool->simulated()) clock.sync(pool->sim_time_seconds());

        if (record.n_subproblems >= next_metric_at) {
            next_metric_at += stride;
            MetricsRow row;
            row.wall_time_s = clock.now();
            row.iteration = epoch;
            row.n_subproblems = record.n_subproblems;
            row.steplength = window.norm();
            if (reference) {
                const IterateMatrix x_tilde = project_nonanticipative(z, tree);
                auto [subopt, feas] = run_metrics(x_tilde, last_yhat, problems, tree, reference);
                row.subopt_rel = subopt;
                row.feas_err = feas;
            }
            record.rows.push_back(row);
        }

        if (window.full() &&
            window.norm() <= config.stopping.eps_abs + config.stopping.eps_rel * z.norm()) {
            record.termination = "residual";
            stopped = true;
        } else if (clock.now() >= config.stopping.max_time_s) {
            record.termination = "max-time";
            stopped = true;
        } else if (record.n_subproblems >= config.stopping.max_subproblems) {
            record.termination = "max-subproblems";
            stopped = true;
        } else {
            dispatch_fresh();
        }
    }

    record.x_final = project_nonanticipative(z, tree);
    record.z_final = z;
    double obj = 0.0;
    for (int s = 0; s < S; ++s)
        obj += tree.probabilities()[s] * problems[s].objective(record.x_final.row(s).transpose());
    record.objective = obj;
    return record;
}

}  // namespace hedge
