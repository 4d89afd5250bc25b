#include "hedge/runtime.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace hedge {

long SimSchedule::duration_ticks(int scenario, long dispatch_seq, Xoshiro256ss& rng) const {
    long ticks = 0;
    if (kind == "constant") {
        ticks = base_ticks;
    } else if (kind == "two_point") {
        ticks = base_ticks;
        for (int s : slow_scenarios)
            if (s == scenario) { ticks += slow_extra_ticks; break; }
    } else if (kind == "trace") {
        if (trace.empty()) throw parse_error("SimSchedule: empty trace");
        ticks = trace[static_cast<std::size_t>(dispatch_seq) % trace.size()];
    } else {
        throw parse_error("SimSchedule: unknown kind '" + kind + "'");
    }
    if (jitter_ticks > 0) ticks += static_cast<long>(rng.next_below(jitter_ticks + 1));
    return std::max(ticks, 1L);
}

namespace {

ResultMessage solve_task(const TaskMessage& task, const std::vector<QpScenarioProblem>& problems,
                         double mu, const ProxSettings& settings,
                         std::unordered_map<int, ProxWorkspace>& cache) {
    ResultMessage out;
    out.scenario = task.scenario;
    out.task_id = task.task_id;
    try {
        ProxResult res = prox(problems[task.scenario], task.point, mu, settings,
                              &cache[task.scenario]);
        if (res.status != ProxStatus::solved) {
            out.poisoned = true;
            out.error = "prox status " + to_string(res.status) + " on scenario " +
                        std::to_string(task.scenario);
            return out;
        }
        out.minimizer = std::move(res.y);
        out.inner_iterations = res.inner_iterations;
        out.primal_residual = res.primal_residual;
        out.dual_residual = res.dual_residual;
    } catch (const std::exception& e) {
        out.poisoned = true;
        out.error = e.what();
    }
    return out;
}

// Discrete-event scheduler: every worker is either free or busy until a
// known tick; completions are delivered in (finish_tick, worker_id) order
// so the whole execution is a deterministic function of the schedule and
// the dispatched task sequence.
class SimulatedPool final : public WorkerPool {
public:
    SimulatedPool(int M, const std::vector<QpScenarioProblem>& problems, double mu,
                  const ProxSettings& settings, SimSchedule schedule)
        : problems_(problems), mu_(mu), settings_(settings), schedule_(std::move(schedule)),
          rng_(schedule_.seed, 0), workers_(M) {}

    void dispatch(TaskMessage task) override {
        int slot = -1;
        for (int i = 0; i < static_cast<int>(workers_.size()); ++i)
            if (!workers_[i].busy) { slot = i; break; }
        if (slot < 0) throw runtime_fault("simulated pool: dispatch with no free worker");
        const long ticks = schedule_.duration_ticks(task.scenario, dispatch_seq_++, rng_);
        workers_[slot].busy = true;
        workers_[slot].finish_tick = now_ticks_ + ticks;
        workers_[slot].task = std::move(task);
        ++in_flight_;
    }

    ResultMessage next_completion() override {
        if (in_flight_ == 0) throw runtime_fault("simulated pool: nothing in flight");
        int slot = -1;
        for (int i = 0; i < static_cast<int>(workers_.size()); ++i) {
            if (!workers_[i].busy) continue;
            if (slot < 0 || workers_[i].finish_tick < workers_[slot].finish_tick) slot = i;
        }
        now_ticks_ = std::max(now_ticks_, workers_[slot].finish_tick);
        workers_[slot].busy = false;
        --in_flight_;
        return solve_task(workers_[slot].task, problems_, mu_, settings_, workers_[slot].cache);
    }

    int num_workers() const override { return static_cast<int>(workers_.size()); }
    int in_flight() const override { return in_flight_; }
    bool simulated() const override { return true; }
    double sim_time_seconds() const override { return now_ticks_ * schedule_.tick_seconds; }

private:
    struct Slot {
        bool busy = false;
        long finish_tick = 0;
        TaskMessage task;
        std::unordered_map<int, ProxWorkspace> cache;
    };

    const std::vector<QpScenarioProblem>& problems_;
    double mu_;
    ProxSettings settings_;
    SimSchedule schedule_;
    Xoshiro256ss rng_;
    std::vector<Slot> workers_;
    long now_ticks_ = 0;
    long dispatch_seq_ = 0;
    int in_flight_ = 0;
};

class RealPool final : public WorkerPool {
public:
    RealPool(int M, const std::vector<QpScenarioProblem>& problems, double mu,
             const ProxSettings& settings)
        : problems_(problems), mu_(mu), settings_(settings) {
        threads_.reserve(M);
        for (int i = 0; i < M; ++i) threads_.emplace_back([this] { worker_loop(); });
    }

    ~RealPool() override {
        {
            std::lock_guard lock(mutex_);
            stopping_ = true;
        }
        task_cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void dispatch(TaskMessage task) override {
        {
            std::lock_guard lock(mutex_);
            tasks_.push_back(std::move(task));
            ++in_flight_;
        }
        task_cv_.notify_one();
    }

    ResultMessage next_completion() override {
        std::unique_lock lock(mutex_);
        if (in_flight_ == 0 && results_.empty())
            throw runtime_fault("pool: nothing in flight");
        result_cv_.wait(lock, [this] { return !results_.empty(); });
        ResultMessage out = std::move(results_.front());
        results_.pop_front();
        return out;
    }

    int num_workers() const override { return static_cast<int>(threads_.size()); }
    int in_flight() const override {
        std::lock_guard lock(mutex_);
        return in_flight_;
    }
    bool simulated() const override { return false; }

private:
    void worker_loop() {
        std::unordered_map<int, ProxWorkspace> cache;
        for (;;) {
            TaskMessage task;
            {
                std::unique_lock lock(mutex_);
                task_cv_.wait(lock, [this] { return stopping_ || !tasks_.empty(); });
                if (stopping_ && tasks_.empty()) return;
                task = std::move(tasks_.front());
                tasks_.pop_front();
            }
            ResultMessage res = solve_task(task, problems_, mu_, settings_, cache);
            {
                std::lock_guard lock(mutex_);
                results_.push_back(std::move(res));
                --in_flight_;
            }
            result_cv_.notify_one();
        }
    }

    const std::vector<QpScenarioProblem>& problems_;
    double mu_;
    ProxSettings settings_;
    mutable std::mutex mutex_;
    std::condition_variable task_cv_, result_cv_;
    std::deque<TaskMessage> tasks_;
    std::deque<ResultMessage> results_;
    std::vector<std::thread> threads_;
    bool stopping_ = false;
    int in_flight_ = 0;
};

}  // namespace

std::unique_ptr<WorkerPool> pool_create(int M, PoolMode mode,
                                        const std::vector<QpScenarioProblem>& problems, double mu,
                                        const ProxSettings& settings, const SimSchedule& schedule) {
    if (M < 1) throw runtime_fault("pool_create: need at least one worker");
    if (mode == PoolMode::simulated)
        return std::make_unique<SimulatedPool>(M, problems, mu, settings, schedule);
    return std::make_unique<RealPool>(M, problems, mu, settings);
}

}  // namespace hedge
