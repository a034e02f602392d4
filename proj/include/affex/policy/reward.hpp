#pragma once

#include <set>
#include <utility>

#include "affex/mapping/projection.hpp"
#include "affex/world/sim.hpp"

namespace affex {

struct RewardWeights {
  double nav = 1.0;
  double interaction = 1.0;
  double fail = 1.0;
};

inline constexpr double kNewCellReward = 1.0;
inline constexpr double kNewYawReward = 0.3;

// (instance, affordance) pairs that have succeeded at least once this
// episode, keyed by simulator id so every arm is rewarded alike.
class InteractionNovelty {
 public:
  // True the first time the pair succeeds.
  bool Succeed(int id, Affordance a) { return seen_.emplace(id, static_cast<int>(a)).second; }
  bool Seen(int id, Affordance a) const { return seen_.count({id, static_cast<int>(a)}) != 0; }
  std::size_t size() const { return seen_.size(); }

 private:
  std::set<std::pair<int, int>> seen_;
};

// Fills res.reward_components for a step that has already been applied.
// `agent_after` is the pose after the step; the visit grid is updated.
inline RewardComponents ComputeRewardComponents(const StepResult& res, const AgentState& agent_after,
                                                VisitGrid& visits, InteractionNovelty& novelty) {
  RewardComponents r;
  switch (visits.Visit(agent_after)) {
    case NavNovelty::kNewCell: r.nav = kNewCellReward; break;
    case NavNovelty::kNewYaw: r.nav = kNewYawReward; break;
    case NavNovelty::kNone: break;
  }
  if (!res.success) {
    r.fail = -1.0;
  } else if (const auto a = res.action.AttemptedAffordance(); a && res.target) {
    r.interaction = novelty.Succeed(*res.target, *a) ? 1.0 : 0.0;
  }
  return r;
}

inline double TotalReward(const RewardComponents& r, const RewardWeights& w) {
  return w.nav * r.nav + w.interaction * r.interaction + w.fail * r.fail;
}

}  // namespace affex
