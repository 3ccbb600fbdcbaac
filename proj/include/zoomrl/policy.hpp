#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "zoomrl/videoworld.hpp"

namespace zoomrl {

struct Trajectory;

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

enum class InteractionMode {
    kEpisode,     // standard glance-then-zoom episode
    kReflection,  // expert-side correction of a failed attempt
};

// Everything a decision-maker sees at one turn. `video` grants scripted
// policies oracle access to the ground-truth timeline: they are test
// instruments and data generators, not contestants, and must not be scored
// as if they had to search. The remote policy only reads `messages`.
struct PolicyContext {
    std::string system_prompt;
    std::vector<ChatMessage> messages;  // rendered chat history, system first
    const Question* question = nullptr;
    const SyntheticVideo* video = nullptr;
    std::vector<const Observation*> observations;  // structured, glance first
    int tool_attempts = 0;      // tool-use turns executed so far
    int successful_calls = 0;   // of those, calls that delivered frames
    BudgetConfig budget;
    InteractionMode mode = InteractionMode::kEpisode;
    const Trajectory* failed = nullptr;  // reflection mode: the attempt to correct
    int attempt = 0;                     // reflection retry index
};

class PolicyFailure : public std::runtime_error {
public:
    enum class Kind { kTransport, kTimeout, kAuth, kOther };

    PolicyFailure(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    // Returns one complete turn in the tag grammar. Throws PolicyFailure when
    // the policy itself faults (e.g., remote transport error).
    virtual std::string act(const PolicyContext& ctx) = 0;
};

// Largest fps that keeps ceil(width * fps) within max_frames, capped at
// native_fps. Computed with slack so float rounding cannot tip the ceiling
// over the budget.
double fps_for_budget(double width, int max_frames, double native_fps);

// Label guess used when a policy must answer without evidence. Hashes the
// question text and the sorted choice texts, so the pick is deterministic yet
// independent of where the generator shuffled the gold label.
std::string deterministic_guess(const Question& question);

// Scripted oracle policies. They realize the three canonical reasoning
// patterns (direct-hit, progressive, self-refine) plus degenerate baselines,
// and double as reflection experts when the context asks for correction mode.
enum class MisplaceKind { kWrongSegment, kOverBudget };

std::unique_ptr<Policy> make_direct_hit_policy();
std::unique_ptr<Policy> make_progressive_policy();
std::unique_ptr<Policy> make_self_refine_policy(MisplaceKind misplace = MisplaceKind::kWrongSegment);
std::unique_ptr<Policy> make_no_tool_policy();
// Adversarial instrument: zooms every turn and never answers. With `oversize`
// every request deliberately exceeds the per-call budget.
std::unique_ptr<Policy> make_always_zoom_policy(bool oversize = false);

// By-name factory for the CLI: direct_hit, progressive, self_refine, no_tool,
// always_zoom. Throws std::invalid_argument for unknown names.
std::unique_ptr<Policy> make_scripted_policy(const std::string& name);

// OpenAI-compatible chat-completions client. The API key is read from the
// environment variable named in the config, never from files.
struct RemoteConfig {
    std::string endpoint;  // base URL including any path prefix, e.g. http://host:8000/v1
    std::string model = "default";
    double temperature = 0.0;
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 2;          // transient-failure retries, exponential backoff
    int initial_backoff_ms = 100;
    int timeout_ms = 30000;
    int max_in_flight = 4;        // request cap shared across episodes
};

std::unique_ptr<Policy> make_remote_policy(const RemoteConfig& config);

}  // namespace zoomrl
