#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "lmapf/lns.hpp"

namespace lmapf {

struct Proposal {
  std::int64_t iteration = 0;
  int worker = 0;
  Neighborhood neighborhood;
  std::optional<std::vector<Path>> paths;  // empty when the worker's replan failed
  std::uint64_t snapshot_version = 0;
};

// Sole writer of the incumbent plan. Each proposal is judged against the
// current incumbent, not the snapshot it was built on: the member paths must
// be conflict-free with every current non-member path (and each other) and
// must strictly lower the current objective.
class Committer {
 public:
  Committer(WindowedPlan initial, const PlanningContext& ctx)
      : ctx_(&ctx),
        reservations_(ReservationTable::build(*ctx.map, initial)),
        incumbent_(std::make_shared<const WindowedPlan>(std::move(initial))) {}

  bool submit(const Proposal& p) {
    const WindowedPlan& cur = *incumbent_;
    const GridMap& map = *ctx_->map;
    const auto& members = p.neighborhood.members;
    CommitEntry entry{p.iteration, p.worker, members, cur.objective, kInfinity, false};

    if (p.paths && p.paths->size() == members.size()) {
      for (int a : members) reservations_.remove(map, a, cur.paths[a]);
      bool valid = true;
      std::size_t added = 0;
      for (std::size_t m = 0; m < members.size() && valid; ++m) {
        const Path& path = (*p.paths)[m];
        valid = static_cast<int>(path.size()) == cur.window + 1 && path.front() == cur.paths[members[m]].front();
        for (int t = 1; valid && t <= cur.window; ++t)
          valid = action_between(map, path[t - 1], path[t], ctx_->model) &&
                  !reservations_.blocked(map, path[t - 1], path[t], t);
        if (valid) {
          reservations_.add(map, members[m], path);
          ++added;
        }
      }
      for (std::size_t m = 0; m < added; ++m) reservations_.remove(map, members[m], (*p.paths)[m]);

      if (valid) {
        double old_sum = 0.0, new_sum = 0.0;
        std::vector<double> costs;
        for (std::size_t m = 0; m < members.size(); ++m) {
          old_sum += cur.costs[members[m]];
          costs.push_back(agent_cost(*ctx_, members[m], (*p.paths)[m]));
          new_sum += costs.back();
        }
        entry.after = cur.objective - old_sum + new_sum;
        if (new_sum + kImprovementEpsilon < old_sum) {
          auto next = std::make_shared<WindowedPlan>(cur);
          for (std::size_t m = 0; m < members.size(); ++m) {
            next->paths[members[m]] = (*p.paths)[m];
            next->costs[members[m]] = costs[m];
          }
          next->refresh_objective();
          entry.after = next->objective;
          entry.accepted = true;
          std::lock_guard lock(mutex_);
          incumbent_ = std::move(next);
          ++version_;
        }
      }
      for (int a : members) reservations_.add(map, a, incumbent_->paths[a]);
    }
    log_.push_back(std::move(entry));
    return log_.back().accepted;
  }

  std::shared_ptr<const WindowedPlan> snapshot(std::uint64_t* version = nullptr) const {
    std::lock_guard lock(mutex_);
    if (version) *version = version_;
    return incumbent_;
  }

  const CommitLog& log() const { return log_; }
  CommitLog take_log() { return std::move(log_); }

 private:
  const PlanningContext* ctx_;
  ReservationTable reservations_;
  mutable std::mutex mutex_;
  std::shared_ptr<const WindowedPlan> incumbent_;
  std::uint64_t version_ = 0;
  CommitLog log_;
};

struct RefineResult {
  WindowedPlan plan;
  CommitLog log;
};

// Asynchronous neighborhood replanning on `workers` threads with a single
// sequential committer (the calling thread). Worker k draws from the stream
// stream_seed(seed, "lns", k); with one worker this is exactly lns_refine on
// stream 0. Iteration budgets count proposals across all workers.
inline RefineResult parallel_refine(WindowedPlan plan, const PlanningContext& ctx, const Budget& budget, int workers,
                                    std::uint64_t seed, const LnsOptions& options = {}) {
  RefineResult out;
  if (workers <= 1) {
    Rng rng(stream_seed(seed, "lns", 0));
    out.plan = lns_refine(std::move(plan), ctx, budget, rng, options, &out.log, 0);
    return out;
  }
  if (plan.agent_count() == 0 || budget.exhausted(0)) {
    out.plan = std::move(plan);
    return out;
  }

  Committer committer(std::move(plan), ctx);
  std::mutex queue_mutex;
  std::condition_variable queue_cv;
  std::deque<Proposal> queue;
  std::atomic<std::int64_t> claimed{0};
  std::atomic<int> running{workers};

  auto worker_loop = [&](int id) {
    Rng rng(stream_seed(seed, "lns", id));
    std::uint64_t version = ~std::uint64_t{0};
    std::shared_ptr<const WindowedPlan> snap;
    std::optional<ReservationTable> reservations;
    SpaceTimeAStar astar(*ctx.map, committer.snapshot()->window);
    std::vector<char> tabu(ctx.agent_count(), 0);
    for (;;) {
      const std::int64_t iter = claimed.fetch_add(1);
      if (budget.exhausted(iter)) break;
      std::uint64_t v = 0;
      auto latest = committer.snapshot(&v);
      if (v != version || !reservations) {
        snap = std::move(latest);
        version = v;
        reservations.emplace(ReservationTable::build(*ctx.map, *snap));
      }
      Proposal p;
      p.iteration = iter;
      p.worker = id;
      p.snapshot_version = version;
      p.neighborhood =
          select_neighborhood(*snap, ctx, rng, detail::draw_strategy(rng), options.neighborhood_size, &tabu);
      for (int a : p.neighborhood.members) reservations->remove(*ctx.map, a, snap->paths[a]);
      p.paths = replan_neighborhood(*snap, p.neighborhood, ctx, *reservations, rng, astar);
      for (int a : p.neighborhood.members) reservations->add(*ctx.map, a, snap->paths[a]);
      {
        std::lock_guard lock(queue_mutex);
        queue.push_back(std::move(p));
      }
      queue_cv.notify_one();
    }
    running.fetch_sub(1);
    queue_cv.notify_one();
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int id = 0; id < workers; ++id) threads.emplace_back(worker_loop, id);

  for (;;) {
    std::unique_lock lock(queue_mutex);
    queue_cv.wait(lock, [&] { return !queue.empty() || running.load() == 0; });
    if (queue.empty()) break;
    Proposal p = std::move(queue.front());
    queue.pop_front();
    lock.unlock();
    committer.submit(p);
  }
  for (auto& t : threads) t.join();

  out.plan = *committer.snapshot();
  out.log = committer.take_log();
  return out;
}

}  // namespace lmapf
