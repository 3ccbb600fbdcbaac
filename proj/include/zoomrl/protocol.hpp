#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace zoomrl {

// A <video_zoom> request: inspect [t_start, t_end] at `fps` frames per second.
// Calls produced by the parser are unvalidated candidates; range, ordering and
// budget checks happen in the environment, which maps violations to error
// observations instead of rejecting them here.
struct ToolCall {
    double t_start = 0.0;
    double t_end = 0.0;
    double fps = 0.0;

    bool operator==(const ToolCall&) const = default;
};

// Number of frames a call is charged for: ceil((t_end - t_start) * fps).
// Ceiling keeps the budget check conservative; a request can never deliver
// more frames than it was charged.
std::int64_t requested_frames(const ToolCall& call);

enum class ReasonCode {
    // parse failures
    kMissingThink,
    kBothActions,
    kNoAction,
    kBadJson,
    kUnclosedTag,
    // trajectory-shape failures (format validation only)
    kEmptyThink,
    kNonFinalAnswer,
    kFinalNotAnswer,
};

std::string_view reason_code_name(ReasonCode code);

struct Answer {
    std::string text;  // raw inner text of the <answer> block
    bool operator==(const Answer&) const = default;
};

struct Malformed {
    ReasonCode reason;
    bool operator==(const Malformed&) const = default;
};

// One assistant turn after parsing. The variant makes a turn carrying both a
// tool call and an answer unrepresentable.
struct ParsedTurn {
    std::string think_text;
    std::variant<ToolCall, Answer, Malformed> action;

    bool is_tool_use() const { return std::holds_alternative<ToolCall>(action); }
    bool is_answer() const { return std::holds_alternative<Answer>(action); }
    bool is_malformed() const { return std::holds_alternative<Malformed>(action); }
    const ToolCall& tool_call() const { return std::get<ToolCall>(action); }
    const Answer& answer() const { return std::get<Answer>(action); }
    const Malformed& malformed() const { return std::get<Malformed>(action); }
    bool has_think() const;  // true when think_text has a non-whitespace char
};

// Parse one complete assistant output. Total: never throws, any byte string
// yields a ParsedTurn (malformedness is a value, not a failure).
ParsedTurn parse_turn(std::string_view text);

struct FormatVerdict {
    bool ok = true;
    std::vector<std::pair<std::size_t, ReasonCode>> per_turn;  // failing turns only
};

// A trajectory is well formed when every turn has nonempty reasoning and a
// valid action, every non-final turn is a tool call, and the final turn is an
// answer. Answering with zero tool calls is legal.
FormatVerdict validate_format(const std::vector<ParsedTurn>& turns);

// Normalize an answer string to a choice label: "\boxed{B}", "B.", "(b)" and
// "the answer is B" all map to "B". When no single label is unambiguously
// present the trimmed raw string is returned.
std::string extract_answer(std::string_view answer_text);

// Exact wire form: <video_zoom> {"segment": [4.0, 6.0], "fps": 2} </video_zoom>
// Segment endpoints keep a decimal point, fps drops it when integral.
// parse_turn of a think-prefixed render recovers the call bit-exactly.
std::string render_tool_call(const ToolCall& call);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);
// Same, but guaranteed to carry a decimal point ("4" -> "4.0").
std::string format_seconds(double value);

}  // namespace zoomrl
