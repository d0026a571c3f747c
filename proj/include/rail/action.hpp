#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace rail {

// Discrete high-level decision. The numeric values fix the one-hot ordering.
enum class Action : std::uint8_t {
  Maintain = 0,
  Accelerate = 1,
  Decelerate = 2,
  LaneLeft = 3,
  LaneRight = 4,
};

inline constexpr int kActionCount = 5;

inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::Maintain, Action::Accelerate, Action::Decelerate, Action::LaneLeft, Action::LaneRight};

constexpr int action_index(Action a) { return static_cast<int>(a); }

constexpr Action action_from_index(int i) { return static_cast<Action>(i); }

constexpr std::string_view action_name(Action a) {
  switch (a) {
    case Action::Maintain: return "maintain";
    case Action::Accelerate: return "accelerate";
    case Action::Decelerate: return "decelerate";
    case Action::LaneLeft: return "lane_left";
    case Action::LaneRight: return "lane_right";
  }
  return "?";
}

inline std::optional<Action> parse_action(std::string_view s) {
  for (Action a : kAllActions) {
    if (action_name(a) == s) return a;
  }
  return std::nullopt;
}

}  // namespace rail
