#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmapf/heuristic.hpp"
#include "lmapf/lns.hpp"
#include "lmapf/parallel.hpp"
#include "lmapf/pibt.hpp"
#include "lmapf/plan.hpp"
#include "lmapf/rng.hpp"

namespace lmapf {

enum class Algorithm : std::uint8_t { Pibt, Wppl };
enum class BudgetMode : std::uint8_t { Iterations, WallTime };

struct DisablePolicy {
  enum class Kind : std::uint8_t { None, DeadendGoals, RandomK };
  Kind kind = Kind::None;
  int k = 0;               // RandomK
  std::uint64_t seed = 0;  // RandomK sampling seed

  static DisablePolicy none() { return {}; }
  static DisablePolicy deadend_goals() { return {Kind::DeadendGoals, 0, 0}; }
  static DisablePolicy random_k(int k, std::uint64_t seed) { return {Kind::RandomK, k, seed}; }
};

struct WpplConfig {
  Algorithm algorithm = Algorithm::Wppl;
  int window = 10;        // w
  int replan_period = 3;  // h, 1 <= h <= w
  BudgetMode budget_mode = BudgetMode::Iterations;
  std::int64_t iterations_per_replan = 100;
  int extra_iteration_cycles = 0;  // the first N replans get one more iteration
  double step_time_ms = 1000.0;    // wall-time mode: first replan gets this, later ones h times it
  int workers = 1;
  bool reuse = true;
  int neighborhood_size = 8;
  DisablePolicy disable;
  std::uint64_t seed = 0;

  // PIBT runs as the degenerate window w = h = 1 without refinement.
  WpplConfig effective() const {
    WpplConfig c = *this;
    if (c.algorithm == Algorithm::Pibt) {
      c.window = 1;
      c.replan_period = 1;
      c.iterations_per_replan = 0;
      c.extra_iteration_cycles = 0;
      c.budget_mode = BudgetMode::Iterations;
      c.reuse = false;
    }
    return c;
  }

  void validate(int agent_count) const {
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (replan_period < 1 || replan_period > window) throw std::invalid_argument("replan period must be in [1, window]");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (neighborhood_size < 1) throw std::invalid_argument("neighborhood size must be >= 1");
    if (iterations_per_replan < 0) throw std::invalid_argument("iteration budget must be >= 0");
    if (budget_mode == BudgetMode::WallTime && !(step_time_ms > 0.0))
      throw std::invalid_argument("step time must be positive in wall-time mode");
    if (disable.kind == DisablePolicy::Kind::RandomK && (disable.k < 0 || disable.k >= agent_count))
      throw std::invalid_argument("RandomK needs 0 <= k < agent count");
  }
};

inline const char* to_string(Algorithm a) { return a == Algorithm::Pibt ? "pibt" : "wppl"; }

// ---------------------------------------------------------------------------
// Disabling agents

struct DisableResult {
  std::vector<char> disabled;
  std::vector<int> goals;  // disabled agents are parked on their current cell
};

inline bool disables_on_assignment(const GridMap& map, int goal, const DisablePolicy& policy) {
  return policy.kind == DisablePolicy::Kind::DeadendGoals && map.is_deadend(goal);
}

inline DisableResult apply_disable_policy(const GridMap& map, const std::vector<AgentState>& states,
                                          std::vector<int> goals, const DisablePolicy& policy) {
  const int n = static_cast<int>(states.size());
  DisableResult out{std::vector<char>(n, 0), std::move(goals)};
  if (policy.kind == DisablePolicy::Kind::DeadendGoals) {
    for (int i = 0; i < n; ++i) out.disabled[i] = disables_on_assignment(map, out.goals[i], policy);
  } else if (policy.kind == DisablePolicy::Kind::RandomK) {
    if (policy.k < 0 || policy.k >= n) throw std::invalid_argument("RandomK needs 0 <= k < agent count");
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(stream_seed(policy.seed, "disable"));
    std::shuffle(ids.begin(), ids.end(), rng);
    for (int i = 0; i < policy.k; ++i) out.disabled[ids[i]] = 1;
  }
  for (int i = 0; i < n; ++i)
    if (out.disabled[i]) out.goals[i] = states[i].location;
  return out;
}

inline void apply_disable_policy(PriorityState& priorities, const DisableResult& result) {
  priorities.disabled = result.disabled;
}

// ---------------------------------------------------------------------------
// Windowed planning

struct WindowResult {
  WindowedPlan plan;
  CommitLog log;
  double initial_objective = 0.0;  // PIBT rollout before refinement
};

inline Budget replan_budget(const WpplConfig& cfg, int cycle, std::chrono::steady_clock::time_point start) {
  if (cfg.budget_mode == BudgetMode::WallTime) {
    const double ms = cfg.step_time_ms * (cycle == 0 ? 1 : cfg.replan_period);
    return Budget::until(start + std::chrono::microseconds(static_cast<std::int64_t>(ms * 1000.0)));
  }
  return Budget::of_iterations(cfg.iterations_per_replan + (cycle < cfg.extra_iteration_cycles ? 1 : 0));
}

// PIBT rollout of length w, hinted by the reused tail, then parallel LNS.
inline WindowResult plan_window(const PlanningContext& ctx, const std::vector<AgentState>& states,
                                const PriorityState& priorities, const WpplConfig& cfg, const ReusedTail& tail,
                                const Budget& budget, std::uint64_t lns_seed) {
  WindowResult out;
  WindowedPlan initial = pibt_rollout(ctx, states, priorities, cfg.window, cfg.reuse ? tail : ReusedTail{});
  out.initial_objective = initial.objective;
  LnsOptions options{cfg.neighborhood_size};
  RefineResult refined = parallel_refine(std::move(initial), ctx, budget, cfg.workers, lns_seed, options);
  out.plan = std::move(refined.plan);
  out.log = std::move(refined.log);
  return out;
}

// Steps h..w of a plan, re-based to start at index 0.
inline ReusedTail make_tail(const WindowedPlan& plan, const std::vector<int>& goals, int replan_period) {
  ReusedTail tail;
  tail.goals = goals;
  tail.paths.reserve(plan.paths.size());
  for (const auto& p : plan.paths) tail.paths.emplace_back(p.begin() + replan_period, p.end());
  return tail;
}

struct WorldView {
  int step = 0;
  const std::vector<AgentState>* states = nullptr;
  const std::vector<int>* goals = nullptr;  // planning goals (parked cell for disabled agents)
  const std::vector<char>* disabled = nullptr;
};

struct StepDecision {
  std::vector<AgentState> next;
  bool overrun = false;  // planning missed its deadline: the whole fleet waits this step
};

struct CycleRecord {
  int cycle = 0;
  int start_step = 0;
  double planning_ms = 0.0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int accepted = 0;
  int proposals = 0;
  int overrun_steps = 0;
};

struct PlannerStats {
  std::vector<CycleRecord> cycles;
  std::vector<std::pair<int, CommitEntry>> commits;  // (cycle, entry), retained when requested
  int overrun_steps = 0;
};

// Windowed planner driven one executed step at a time. In iteration mode
// each window is planned synchronously from the actual state at its start.
// In wall-time mode the next window is planned concurrently with executing
// the current one, from the state the current plan predicts at step h, and
// any time beyond the budget is paid for with whole-fleet wait steps.
class WpplPlanner {
 public:
  WpplPlanner(std::shared_ptr<HeuristicCache> cache, WpplConfig cfg, int agent_count, bool keep_commit_log = false)
      : cache_(std::move(cache)),
        cfg_(cfg.effective()),
        priorities_(PriorityState::initial(agent_count, stream_seed(cfg.seed, "tiebreak"))),
        keep_log_(keep_commit_log) {
    cfg_.validate(agent_count);
  }

  ~WpplPlanner() {
    if (pending_.valid()) pending_.wait();
  }

  WpplPlanner(const WpplPlanner&) = delete;
  WpplPlanner& operator=(const WpplPlanner&) = delete;

  const WpplConfig& config() const { return cfg_; }
  const PlannerStats& stats() const { return stats_; }
  const PriorityState& priorities() const { return priorities_; }
  const WindowedPlan& current_plan() const { return plan_; }

  StepDecision next_step(const WorldView& view) {
    if (overrun_left_ > 0) {
      --overrun_left_;
      return {*view.states, true};
    }
    if (!has_plan_ || cursor_ >= cfg_.replan_period || plan_.paths.empty() ||
        plan_.states_at(cursor_) != *view.states) {
      bool adopted = false;
      if (cfg_.budget_mode == BudgetMode::WallTime && has_plan_ && pending_.valid()) {
        adopt_pending(view);
        adopted = plan_.states_at(0) == *view.states;
        if (adopted && overrun_left_ > 0) {
          --overrun_left_;
          return {*view.states, true};
        }
        overrun_left_ = 0;
      }
      if (!adopted) plan_synchronously(view);
    }
    if (cfg_.budget_mode == BudgetMode::WallTime && cursor_ == 0 && !pending_.valid()) launch_next(view);
    ++cursor_;
    return {plan_.states_at(cursor_), false};
  }

  void after_step(const std::vector<int>& reached) { priorities_ = update_priorities(std::move(priorities_), reached); }

 private:
  struct Pending {
    WindowResult result;
    std::vector<int> goals;
    double planning_ms = 0.0;
    double budget_ms = 0.0;
    int cycle = 0;
  };

  Budget budget_for(int cycle, std::chrono::steady_clock::time_point start) const {
    return replan_budget(cfg_, cycle, start);
  }

  void plan_synchronously(const WorldView& view) {
    priorities_.disabled = *view.disabled;
    PlanningContext ctx = make_context(*cache_, *view.goals, *view.disabled, cfg_.window);
    const auto start = std::chrono::steady_clock::now();
    WindowResult result = plan_window(ctx, *view.states, priorities_, cfg_, tail_, budget_for(cycle_, start),
                                      stream_seed(cfg_.seed, "lns-cycle", cycle_));
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    install(std::move(result), *view.goals, ms, view.step, 0);
  }

  void launch_next(const WorldView& view) {
    const std::vector<AgentState> predicted = plan_.states_at(cfg_.replan_period);
    std::vector<int> goals = *view.goals;
    std::vector<char> disabled = *view.disabled;
    PriorityState priorities = priorities_;
    priorities.disabled = disabled;
    ReusedTail tail = cfg_.reuse ? make_tail(plan_, goals_, cfg_.replan_period) : ReusedTail{};
    const int cycle = cycle_;
    const double budget_ms = cfg_.step_time_ms * cfg_.replan_period;
    pending_ = std::async(std::launch::async, [this, predicted, goals, disabled, priorities, tail, cycle,
                                               budget_ms]() mutable {
      PlanningContext ctx = make_context(*cache_, goals, disabled, cfg_.window);
      const auto start = std::chrono::steady_clock::now();
      Pending p;
      p.result = plan_window(ctx, predicted, priorities, cfg_, tail, budget_for(cycle, start),
                             stream_seed(cfg_.seed, "lns-cycle", cycle));
      p.planning_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      p.budget_ms = budget_ms;
      p.goals = std::move(goals);
      p.cycle = cycle;
      return p;
    });
  }

  void adopt_pending(const WorldView& view) {
    Pending p = pending_.get();
    int overrun = 0;
    if (p.planning_ms > p.budget_ms) overrun = static_cast<int>(std::ceil((p.planning_ms - p.budget_ms) / cfg_.step_time_ms));
    install(std::move(p.result), p.goals, p.planning_ms, view.step, overrun);
    overrun_left_ = overrun;
    stats_.overrun_steps += overrun;
  }

  void install(WindowResult result, const std::vector<int>& goals, double ms, int step, int overrun) {
    CycleRecord rec;
    rec.cycle = cycle_;
    rec.start_step = step;
    rec.planning_ms = ms;
    rec.initial_objective = result.initial_objective;
    rec.final_objective = result.plan.objective;
    rec.proposals = static_cast<int>(result.log.size());
    rec.overrun_steps = overrun;
    for (auto& e : result.log) {
      rec.accepted += e.accepted;
      if (keep_log_) stats_.commits.emplace_back(cycle_, std::move(e));
    }
    stats_.cycles.push_back(rec);
    plan_ = std::move(result.plan);
    goals_ = goals;
    tail_ = cfg_.reuse ? make_tail(plan_, goals_, cfg_.replan_period) : ReusedTail{};
    has_plan_ = true;
    cursor_ = 0;
    ++cycle_;
  }

  std::shared_ptr<HeuristicCache> cache_;
  WpplConfig cfg_;
  PriorityState priorities_;
  bool keep_log_;

  WindowedPlan plan_;
  std::vector<int> goals_;
  ReusedTail tail_;
  bool has_plan_ = false;
  int cursor_ = 0;
  int cycle_ = 0;
  int overrun_left_ = 0;
  std::future<Pending> pending_;
  PlannerStats stats_;
};

}  // namespace lmapf
