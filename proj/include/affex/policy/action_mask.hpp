#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "affex/policy/targets.hpp"

namespace affex {

using ActionMask = std::vector<std::uint8_t>;

// Navigation always; drop and move_held only while holding; pickup(c) when
// not holding and cell c has a pickup target; push(c) when c has a push
// target.
inline ActionMask BuildActionMask(const AgentState& agent, const CellTargets& targets) {
  ActionMask m(Action::kCount, 0);
  for (int i = 0; i < Action::kNumNavigation; ++i) m[i] = 1;
  const bool holding = agent.inventory.has_value();
  for (int i = Action::kDrop; i < Action::kPickupBegin; ++i) m[i] = holding;
  for (int c = 0; c < Action::kCells; ++c) {
    m[Action::kPickupBegin + c] = !holding && targets.target[0][c].has_value();
    m[Action::kPushBegin + c] = targets.target[1][c].has_value();
  }
  return m;
}

// Compact action space: 12 non-cell actions followed by 9 cells whose
// interaction type is the affordance with the higher mean prediction.
inline constexpr int kCompactActionCount = Action::kPickupBegin + Action::kCells;

struct CompactCells {
  std::array<std::optional<Action>, Action::kCells> action;
};

inline CompactCells ResolveCompactCells(const AgentState& agent, const CellTargets& targets,
                                        double confidence_floor) {
  CompactCells out;
  std::array<int, Action::kCells> area{};
  for (const auto& t : targets.candidates) {
    const double best = std::max(t.mean_prob[0], t.mean_prob[1]);
    if (best < confidence_floor || t.area <= area[t.cell]) continue;
    area[t.cell] = t.area;
    const bool pickup = t.mean_prob[0] >= t.mean_prob[1];
    if (pickup && agent.inventory) out.action[t.cell].reset();
    else out.action[t.cell] = pickup ? Action::Pickup(t.cell) : Action::Push(t.cell);
  }
  return out;
}

inline ActionMask BuildCompactMask(const AgentState& agent, const CompactCells& cells) {
  ActionMask m(kCompactActionCount, 0);
  for (int i = 0; i < Action::kNumNavigation; ++i) m[i] = 1;
  for (int i = Action::kDrop; i < Action::kPickupBegin; ++i) m[i] = agent.inventory.has_value();
  for (int c = 0; c < Action::kCells; ++c) m[Action::kPickupBegin + c] = cells.action[c].has_value();
  return m;
}

inline Action ExpandCompactAction(int index, const CompactCells& cells) {
  AFFEX_REQUIRE(index >= 0 && index < kCompactActionCount, "compact action index out of range");
  if (index < Action::kPickupBegin) return Action{index};
  const auto& a = cells.action[index - Action::kPickupBegin];
  AFFEX_REQUIRE(a.has_value(), "compact cell action is disabled");
  return *a;
}

}  // namespace affex
