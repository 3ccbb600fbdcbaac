#include "zoomrl/reward.hpp"

#include "zoomrl/protocol.hpp"

namespace zoomrl {

int accuracy_reward(const Trajectory& trajectory, const std::string& gold) {
    if (trajectory.terminal_reason != TerminalReason::kAnswered ||
        trajectory.final_answer.empty()) {
        return 0;
    }
    return extract_answer(trajectory.final_answer) == extract_answer(gold) ? 1 : 0;
}

int format_reward(const Trajectory& trajectory) {
    std::vector<ParsedTurn> turns;
    for (const Turn& turn : trajectory.turns) {
        if (turn.role == TurnRole::kPolicy) {
            turns.push_back(parse_turn(turn.text));
        }
    }
    if (turns.empty()) {
        return 0;
    }
    return validate_format(turns).ok ? 1 : 0;
}

int tool_reward(const Trajectory& trajectory, int r_acc) {
    return r_acc == 1 && trajectory.tool_calls_made >= 1 ? 1 : 0;
}

RewardBreakdown total_reward(const Trajectory& trajectory, const std::string& gold,
                             const RewardWeights& weights) {
    RewardBreakdown breakdown;
    breakdown.r_acc = accuracy_reward(trajectory, gold);
    breakdown.r_fmt = format_reward(trajectory);
    breakdown.r_tool = tool_reward(trajectory, breakdown.r_acc);
    breakdown.total = weights.w_acc * breakdown.r_acc + weights.w_fmt * breakdown.r_fmt +
                      weights.w_tool * breakdown.r_tool;
    return breakdown;
}

}  // namespace zoomrl
