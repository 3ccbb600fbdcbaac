#include "zoomrl/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

namespace zoomrl {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kZoomOpen = "<video_zoom>";
constexpr std::string_view kZoomClose = "</video_zoom>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t count = 0;
    std::size_t pos = text.find(needle);
    while (pos != std::string_view::npos) {
        ++count;
        pos = text.find(needle, pos + needle.size());
    }
    return count;
}

// Extracts the inner text of every open/close pair, scanning left to right.
// Returns false on imbalance (an open without a close, or close/open counts
// that disagree, which also catches a stray close before the first open).
bool extract_blocks(std::string_view text, std::string_view open, std::string_view close,
                    std::vector<std::string_view>& out) {
    if (count_occurrences(text, open) != count_occurrences(text, close)) {
        return false;
    }
    std::size_t pos = 0;
    while (true) {
        const std::size_t begin = text.find(open, pos);
        if (begin == std::string_view::npos) {
            break;
        }
        const std::size_t inner = begin + open.size();
        const std::size_t end = text.find(close, inner);
        if (end == std::string_view::npos) {
            return false;
        }
        out.push_back(text.substr(inner, end - inner));
        pos = end + close.size();
    }
    return true;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

// Accepts extra whitespace and integer-or-float endpoints; rejects any key
// beyond "segment" and "fps", non-finite numbers, and non-positive fps.
std::optional<ToolCall> parse_zoom_payload(std::string_view payload) {
    const nlohmann::json doc = nlohmann::json::parse(payload, nullptr, /*allow_exceptions=*/false);
    if (!doc.is_object() || doc.size() != 2 || !doc.contains("segment") || !doc.contains("fps")) {
        return std::nullopt;
    }
    const auto& segment = doc["segment"];
    const auto& fps = doc["fps"];
    if (!segment.is_array() || segment.size() != 2 || !segment[0].is_number() ||
        !segment[1].is_number() || !fps.is_number()) {
        return std::nullopt;
    }
    ToolCall call;
    call.t_start = segment[0].get<double>();
    call.t_end = segment[1].get<double>();
    call.fps = fps.get<double>();
    if (!std::isfinite(call.t_start) || !std::isfinite(call.t_end) || !std::isfinite(call.fps) ||
        call.fps <= 0.0) {
        return std::nullopt;
    }
    return call;
}

}  // namespace

std::int64_t requested_frames(const ToolCall& call) {
    return static_cast<std::int64_t>(std::ceil((call.t_end - call.t_start) * call.fps));
}

std::string_view reason_code_name(ReasonCode code) {
    switch (code) {
        case ReasonCode::kMissingThink: return "MISSING_THINK";
        case ReasonCode::kBothActions: return "BOTH_ACTIONS";
        case ReasonCode::kNoAction: return "NO_ACTION";
        case ReasonCode::kBadJson: return "BAD_JSON";
        case ReasonCode::kUnclosedTag: return "UNCLOSED_TAG";
        case ReasonCode::kEmptyThink: return "EMPTY_THINK";
        case ReasonCode::kNonFinalAnswer: return "NONFINAL_ANSWER";
        case ReasonCode::kFinalNotAnswer: return "FINAL_NOT_ANSWER";
    }
    return "UNKNOWN";
}

bool ParsedTurn::has_think() const {
    return std::any_of(think_text.begin(), think_text.end(),
                       [](unsigned char c) { return !std::isspace(c); });
}

ParsedTurn parse_turn(std::string_view text) {
    ParsedTurn turn;

    std::vector<std::string_view> thinks;
    std::vector<std::string_view> zooms;
    std::vector<std::string_view> answers;
    const bool tags_balanced = extract_blocks(text, kThinkOpen, kThinkClose, thinks) &&
                               extract_blocks(text, kZoomOpen, kZoomClose, zooms) &&
                               extract_blocks(text, kAnswerOpen, kAnswerClose, answers);

    // Multiple think blocks concatenate in order; only tag balance is enforced.
    for (const auto& block : thinks) {
        turn.think_text.append(block);
    }

    if (!tags_balanced) {
        turn.action = Malformed{ReasonCode::kUnclosedTag};
        return turn;
    }
    if (thinks.empty()) {
        turn.action = Malformed{ReasonCode::kMissingThink};
        return turn;
    }
    const std::size_t actions = zooms.size() + answers.size();
    if (actions == 0) {
        turn.action = Malformed{ReasonCode::kNoAction};
        return turn;
    }
    if (actions > 1) {
        turn.action = Malformed{ReasonCode::kBothActions};
        return turn;
    }
    if (!zooms.empty()) {
        if (auto call = parse_zoom_payload(trim(zooms.front()))) {
            turn.action = *call;
        } else {
            turn.action = Malformed{ReasonCode::kBadJson};
        }
        return turn;
    }
    turn.action = Answer{std::string(answers.front())};
    return turn;
}

FormatVerdict validate_format(const std::vector<ParsedTurn>& turns) {
    FormatVerdict verdict;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const ParsedTurn& turn = turns[i];
        const bool final_turn = i + 1 == turns.size();
        if (turn.is_malformed()) {
            verdict.per_turn.emplace_back(i, turn.malformed().reason);
            continue;
        }
        if (!turn.has_think()) {
            verdict.per_turn.emplace_back(i, ReasonCode::kEmptyThink);
            continue;
        }
        if (!final_turn && !turn.is_tool_use()) {
            verdict.per_turn.emplace_back(i, ReasonCode::kNonFinalAnswer);
            continue;
        }
        if (final_turn && !turn.is_answer()) {
            verdict.per_turn.emplace_back(i, ReasonCode::kFinalNotAnswer);
        }
    }
    verdict.ok = verdict.per_turn.empty();
    return verdict;
}

namespace {

bool is_label_char(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

bool is_separator(char c) {
    return c == '.' || c == ')' || c == ']' || c == ':' || c == ',';
}

// "B", "B.", "(B)", "B) ..." and "B. some text" -> "B". A letter followed by
// another alphanumeric is a word, not a label ("Both hands" stays raw).
std::optional<std::string> leading_label(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && s[i] == '(') {
        ++i;
    }
    if (i >= s.size() || !is_label_char(s[i])) {
        return std::nullopt;
    }
    const char label = static_cast<char>(std::toupper(static_cast<unsigned char>(s[i])));
    ++i;
    if (i == s.size()) {
        return std::string(1, label);
    }
    if (s[i] == ')' || is_separator(s[i])) {
        return std::string(1, label);
    }
    return std::nullopt;
}

std::optional<std::string> trailing_label_after_answer_phrase(std::string_view s) {
    std::string lowered(s);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::size_t pos = lowered.rfind("answer");
    if (pos == std::string::npos) {
        return std::nullopt;
    }
    std::string_view tail = s.substr(pos + 6);
    while (!tail.empty() &&
           (std::isspace(static_cast<unsigned char>(tail.front())) || tail.front() == ':')) {
        tail.remove_prefix(1);
    }
    if (tail.size() >= 2 && std::tolower(static_cast<unsigned char>(tail[0])) == 'i' &&
        std::tolower(static_cast<unsigned char>(tail[1])) == 's' &&
        (tail.size() == 2 || std::isspace(static_cast<unsigned char>(tail[2])))) {
        tail.remove_prefix(2);
    }
    tail = trim(tail);
    return leading_label(tail);
}

}  // namespace

std::string extract_answer(std::string_view answer_text) {
    std::string_view s = trim(answer_text);

    // Unwrap the last \boxed{...}.
    const std::size_t boxed = s.rfind("\\boxed{");
    if (boxed != std::string_view::npos) {
        const std::size_t inner = boxed + 7;
        const std::size_t end = s.find('}', inner);
        if (end != std::string_view::npos) {
            s = trim(s.substr(inner, end - inner));
        }
    }

    if (auto label = leading_label(s)) {
        return *label;
    }
    if (auto label = trailing_label_after_answer_phrase(s)) {
        return *label;
    }
    return std::string(s);
}

std::string format_double(double value) {
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, end);
}

std::string format_seconds(double value) {
    std::string text = format_double(value);
    if (text.find('.') == std::string::npos && text.find('e') == std::string::npos &&
        text.find("inf") == std::string::npos && text.find("nan") == std::string::npos) {
        text += ".0";
    }
    return text;
}

std::string render_tool_call(const ToolCall& call) {
    std::string out = "<video_zoom> {\"segment\": [";
    out += format_seconds(call.t_start);
    out += ", ";
    out += format_seconds(call.t_end);
    out += "], \"fps\": ";
    out += format_double(call.fps);  // integral fps renders without a decimal point
    out += "} </video_zoom>";
    return out;
}

}  // namespace zoomrl
