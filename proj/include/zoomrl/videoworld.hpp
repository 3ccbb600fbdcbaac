#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zoomrl/protocol.hpp"

namespace zoomrl {

enum class EventKind { kNeedle, kRepeat, kMarker, kDistractor };

std::string_view event_kind_name(EventKind kind);

struct Event {
    double time = 0.0;   // start, seconds
    double span = 0.0;   // length, seconds
    EventKind kind = EventKind::kDistractor;
    std::string payload;
    int id = 0;  // stable per-video index, distinguishes repetitions

    bool covers(double t) const { return t >= time && t <= time + span; }
};

// Event timeline standing in for a real video. Immutable after generation;
// frames carry symbolic content tokens, not pixels — the mechanism under test
// is which instants get observed, not pixel decoding.
struct SyntheticVideo {
    double duration = 0.0;
    double native_fps = 30.0;  // upper bound on any zoom fps
    std::vector<Event> events; // sorted by time; same-kind spans never overlap
    std::uint64_t background_seed = 0;
};

struct Frame {
    double timestamp = 0.0;
    std::vector<std::string> descriptor;  // "kind:payload#id" tokens of covering events
};

enum class ObservationSource { kGlance, kZoom, kError };

enum class ZoomError { kBudgetExceeded, kOutOfRange, kEmptySegment, kFpsTooHigh };

std::string_view zoom_error_name(ZoomError error);

struct Observation {
    ObservationSource source = ObservationSource::kGlance;
    std::vector<Frame> frames;
    std::optional<ZoomError> error;
    std::string message;  // filled for errors
    ToolCall call;        // the generating request (zoom and error observations)
};

enum class QuestionKind { kNeedle, kCount, kOrder };

std::string_view question_kind_name(QuestionKind kind);

struct Question {
    std::string text;
    std::vector<std::pair<std::string, std::string>> choices;  // (label, text)
    std::string gold;         // a choice label
    QuestionKind kind = QuestionKind::kNeedle;
    double min_detect_fps = 0.0;  // analytic sampling density needed to answer
};

struct BudgetConfig {
    int glance_frames = 64;
    int per_call_budget = 16;   // B: max frames deliverable per tool call
    int max_tool_calls = 4;     // N

    int total_cap() const { return glance_frames + max_tool_calls * per_call_budget; }
};

struct GenParams {
    double duration = 3600.0;
    double native_fps = 30.0;
    int n_distractors = 8;
    QuestionKind kind = QuestionKind::kNeedle;
    double needle_span = 2.0;
    double marker_span = 2.0;
    double repeat_span = 1.0;  // min_detect_fps for COUNT = 1 / repeat_span
    int count_min = 3;
    int count_max = 7;
};

struct Task {
    std::string task_id;
    SyntheticVideo video;
    Question question;
};

// Deterministic in seed. Throws std::invalid_argument (INVALID_PARAMS) when
// spans cannot be placed without same-kind overlap or violate the timeline.
Task generate(const GenParams& params, std::uint64_t seed);

// n frames at (i + 0.5) * duration / n; mid-interval spacing covers
// [0, duration) symmetrically without double-counting the boundaries.
Observation uniform_glance(const SyntheticVideo& video, int n);

// T(V, t_start, t_end, fps) under the per-call budget. Violations come back
// as error observations, never as exceptions.
Observation zoom(const SyntheticVideo& video, const ToolCall& call, const BudgetConfig& budget);

// Ground-truth answer read directly off the timeline. Verification oracle for
// curation and tests; independent of the frame-sampling path.
std::string dense_oracle(const SyntheticVideo& video, const Question& question);

// What a frame set reveals. NEEDLE/ORDER return a label or nullopt (abstain);
// COUNT always returns the number of repetitions with at least one covering
// frame, so partial coverage yields a deliberate undercount.
std::optional<std::string> answer_from_frames(const std::vector<Observation>& observations,
                                              const Question& question);
std::optional<std::string> answer_from_frames(const std::vector<const Observation*>& observations,
                                              const Question& question);

// JSON (de)serialization; a corpus is one task object per JSONL line.
std::string task_to_json(const Task& task);
Task task_from_json(const std::string& line);
std::vector<Task> load_corpus(const std::string& path);
void save_corpus(const std::vector<Task>& tasks, const std::string& path);

}  // namespace zoomrl
