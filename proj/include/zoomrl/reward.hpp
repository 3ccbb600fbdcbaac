#pragma once

#include <string>

#include "zoomrl/episode.hpp"

namespace zoomrl {

struct RewardWeights {
    double w_acc = 0.9;
    double w_fmt = 0.1;
    double w_tool = 0.5;
};

struct RewardBreakdown {
    int r_acc = 0;
    int r_fmt = 0;
    int r_tool = 0;
    double total = 0.0;
};

// 1 iff the normalized final answer equals gold; unanswered trajectories score 0.
int accuracy_reward(const Trajectory& trajectory, const std::string& gold);

// 1 iff the policy turns re-parse into a well-formed trajectory shape.
int format_reward(const Trajectory& trajectory);

// Conditional exploration bonus: 1 iff the answer was correct and at least one
// tool call actually delivered frames. A syntactically valid call that only
// produced an error observation earns nothing.
int tool_reward(const Trajectory& trajectory, int r_acc);

RewardBreakdown total_reward(const Trajectory& trajectory, const std::string& gold,
                             const RewardWeights& weights = {});

}  // namespace zoomrl
