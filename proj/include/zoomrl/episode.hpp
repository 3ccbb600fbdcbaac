#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zoomrl/policy.hpp"
#include "zoomrl/protocol.hpp"
#include "zoomrl/videoworld.hpp"

namespace zoomrl {

enum class TurnRole { kPolicy, kObservation };

struct Turn {
    TurnRole role = TurnRole::kPolicy;
    std::string text;
    bool trainable = false;     // policy turns train; observation turns never do
    int frames_delivered = 0;   // observation turns only
};

// One executed tool-use turn: the request and what the environment did with it.
struct CallRecord {
    ToolCall call;
    int frames_delivered = 0;
    std::optional<ZoomError> error;
};

enum class TerminalReason { kAnswered, kMaxTurns, kMalformedLimit, kPolicyFailure };

std::string_view terminal_reason_name(TerminalReason reason);

struct Trajectory {
    std::string task_id;
    Question question;
    std::vector<Turn> turns;
    std::vector<CallRecord> calls;
    std::string final_answer;   // normalized choice; empty iff never answered
    int tool_calls_made = 0;    // calls that delivered frames
    int tool_attempts = 0;      // executed tool-use turns, including errored ones
    int total_frames = 0;
    TerminalReason terminal_reason = TerminalReason::kMaxTurns;
    bool usable = true;         // false when the policy itself faulted
    std::string failure;        // policy-failure detail
};

enum class MalformedPolicy {
    kErrorObservation,  // inject an error message and let the policy retry
    kTerminate,         // strict evaluation: first malformed turn ends the episode
};

struct EpisodeConfig {
    BudgetConfig budget;
    int max_turns = 5;  // N tool turns + the answer turn
    MalformedPolicy on_malformed = MalformedPolicy::kErrorObservation;
};

// Glance -> (zoom | error)* -> answer. The trajectory opens with the glance
// observation and question; every policy turn is parsed and dispatched; the
// (N+1)-th tool attempt or turn overflow forces MAX_TURNS. Policy faults mark
// the trajectory unusable instead of aborting the batch.
Trajectory run_episode(Policy& policy, const SyntheticVideo& video, const Question& question,
                       const EpisodeConfig& config, const std::string& task_id = "");

// Fixed-template error messages naming the violated rule. An error observation
// consumes a turn but no frame budget.
Turn error_observation(ReasonCode reason);
Turn error_observation(const Observation& error_obs);

// Glance frames plus every delivered clip frame; the efficiency metric.
int total_frames(const Trajectory& trajectory);

// Text rendering of observations as the policy sees them. The glance carries
// the video duration, the question and the choices; frames render as
// "frame t=4.25s: [token, ...]".
std::string render_observation_text(const Observation& obs, const Question* question,
                                    double video_duration);

// JSONL persistence; the interchange format for curation, scoring and GRPO.
std::string trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const std::string& line);
std::vector<Trajectory> load_trajectories(const std::string& path);
void save_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path);

}  // namespace zoomrl
