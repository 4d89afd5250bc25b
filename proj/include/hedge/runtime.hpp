#pragma once

// Master-worker execution substrate for the parallel and asynchronous
// solvers: a worker pool that solves prox tasks, message contracts, delay
// accounting in master update epochs, and a deterministic discrete-event
// simulated scheduler so asynchronous behavior can be tested byte-for-byte.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hedge/qp.hpp"
#include "hedge/rng.hpp"

namespace hedge {

struct TaskMessage {
    int scenario = -1;
    Eigen::VectorXd point;     // prox anchor
    long dispatch_epoch = 0;   // master update count at send time
    long task_id = -1;
};

struct ResultMessage {
    int scenario = -1;
    Eigen::VectorXd minimizer;
    int inner_iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    long completion_epoch = -1;  // filled by the master on receipt
    long task_id = -1;
    bool poisoned = false;       // worker crash or solve failure
    std::string error;
};

struct DelayStats {
    long count = 0;
    long tau_obs = 0;
    std::map<long, long> histogram;

    void record(long delay) {
        if (delay < 0) throw runtime_fault("DelayStats: negative delay");
        ++count;
        tau_obs = std::max(tau_obs, delay);
        ++histogram[delay];
    }
};

inline long measure_tau(const DelayStats& stats) {
    if (stats.count == 0) throw runtime_fault("measure_tau: no completed updates");
    return stats.tau_obs;
}

// Deterministic per-task duration model for the simulated scheduler.
// kinds: "constant" (base ticks for everyone), "two_point" (base plus an
// extra on a designated slow set of scenarios), "trace" (explicit durations
// consumed in dispatch order, cycled).
struct SimSchedule {
    std::string kind = "two_point";
    double tick_seconds = 1e-3;
    long base_ticks = 20;
    std::vector<int> slow_scenarios;
    long slow_extra_ticks = 100;
    std::vector<long> trace;
    std::uint64_t seed = 0;
    long jitter_ticks = 0;  // uniform extra in [0, jitter], from the schedule seed

    long duration_ticks(int scenario, long dispatch_seq, Xoshiro256ss& rng) const;
};

enum class PoolMode { real, simulated };

class WorkerPool {
public:
    virtual ~WorkerPool() = default;

    virtual void dispatch(TaskMessage task) = 0;
    // Blocks until some dispatched task finishes; exactly-once delivery in
    // completion order. Simulated mode advances the virtual clock.
    virtual ResultMessage next_completion() = 0;

    virtual int num_workers() const = 0;
    virtual int in_flight() const = 0;
    virtual bool simulated() const = 0;
    virtual double sim_time_seconds() const { return 0.0; }
};

// Workers solve prox tasks against the shared immutable problem list; each
// worker keeps its own per-scenario warm-start cache.
std::unique_ptr<WorkerPool> pool_create(int M, PoolMode mode,
                                        const std::vector<QpScenarioProblem>& problems, double mu,
                                        const ProxSettings& settings,
                                        const SimSchedule& schedule = {});

}  // namespace hedge
