#include "zoomrl/episode.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "zoomrl/prompts.hpp"

namespace zoomrl {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string render_frames(const std::vector<Frame>& frames) {
    std::string out;
    for (const Frame& frame : frames) {
        out += fmt::format("frame t={}s: [", format_double(frame.timestamp));
        for (std::size_t i = 0; i < frame.descriptor.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            out += frame.descriptor[i];
        }
        out += "]\n";
    }
    return out;
}

std::string render_question_block(const Question& question) {
    std::string out = "Question: " + question.text + "\nChoices:\n";
    for (const auto& [label, text] : question.choices) {
        out += label + ". " + text + "\n";
    }
    return out;
}

Turn observation_turn(std::string text, int frames_delivered) {
    Turn turn;
    turn.role = TurnRole::kObservation;
    turn.text = std::move(text);
    turn.trainable = false;
    turn.frames_delivered = frames_delivered;
    return turn;
}

}  // namespace

std::string_view terminal_reason_name(TerminalReason reason) {
    switch (reason) {
        case TerminalReason::kAnswered: return "ANSWERED";
        case TerminalReason::kMaxTurns: return "MAX_TURNS";
        case TerminalReason::kMalformedLimit: return "MALFORMED_LIMIT";
        case TerminalReason::kPolicyFailure: return "POLICY_FAILURE";
    }
    return "UNKNOWN";
}

std::string render_observation_text(const Observation& obs, const Question* question,
                                    double video_duration) {
    switch (obs.source) {
        case ObservationSource::kGlance: {
            std::string out;
            out += fmt::format(
                "Video duration: {} seconds. Initial low-frame-rate glance ({} frames, uniformly "
                "sampled):\n",
                format_seconds(video_duration), obs.frames.size());
            out += render_frames(obs.frames);
            if (question != nullptr) {
                out += render_question_block(*question);
            }
            return out;
        }
        case ObservationSource::kZoom:
            return fmt::format("Zoomed clip [{}, {}] at {} fps ({} frames):\n{}",
                               format_seconds(obs.call.t_start), format_seconds(obs.call.t_end),
                               format_double(obs.call.fps), obs.frames.size(),
                               render_frames(obs.frames));
        case ObservationSource::kError:
            return obs.message;
    }
    return {};
}

Turn error_observation(ReasonCode reason) {
    switch (reason) {
        case ReasonCode::kBadJson:
            return observation_turn("Error: could not parse video_zoom JSON.", 0);
        case ReasonCode::kMissingThink:
        case ReasonCode::kEmptyThink:
            return observation_turn(
                "Error: reasoning must be wrapped in <think></think> tags.", 0);
        case ReasonCode::kUnclosedTag:
            return observation_turn("Error: malformed output; a tag is not closed.", 0);
        case ReasonCode::kBothActions:
        case ReasonCode::kNonFinalAnswer:
        case ReasonCode::kFinalNotAnswer:
            return observation_turn(
                "Error: a turn must contain exactly one <video_zoom> request or one <answer>, "
                "not both.",
                0);
        case ReasonCode::kNoAction:
            return observation_turn(
                "Error: no <video_zoom> request or <answer> found in the output.", 0);
    }
    return observation_turn("Error: malformed output.", 0);
}

Turn error_observation(const Observation& error_obs) {
    return observation_turn(error_obs.message, 0);
}

int total_frames(const Trajectory& trajectory) {
    int frames = 0;
    for (const Turn& turn : trajectory.turns) {
        if (turn.role == TurnRole::kObservation) {
            frames += turn.frames_delivered;
        }
    }
    return frames;
}

Trajectory run_episode(Policy& policy, const SyntheticVideo& video, const Question& question,
                       const EpisodeConfig& config, const std::string& task_id) {
    if (config.max_turns < 1) {
        throw std::invalid_argument("EpisodeConfig.max_turns must be >= 1");
    }

    Trajectory trajectory;
    trajectory.task_id = task_id;
    trajectory.question = question;
    trajectory.terminal_reason = TerminalReason::kMaxTurns;

    const std::string system_prompt = reasoning_system_prompt(config.budget.per_call_budget);

    std::vector<Observation> observations;
    observations.push_back(uniform_glance(video, config.budget.glance_frames));
    const std::string glance_text = render_observation_text(observations.front(), &question, video.duration);
    trajectory.turns.push_back(
        observation_turn(glance_text, static_cast<int>(observations.front().frames.size())));

    std::vector<ChatMessage> messages;
    messages.push_back({"system", system_prompt});
    messages.push_back({"user", glance_text});

    for (int turn_index = 0; turn_index < config.max_turns; ++turn_index) {
        PolicyContext ctx;
        ctx.system_prompt = system_prompt;
        ctx.messages = messages;
        ctx.question = &question;
        ctx.video = &video;
        for (const Observation& obs : observations) {
            ctx.observations.push_back(&obs);
        }
        ctx.tool_attempts = trajectory.tool_attempts;
        ctx.successful_calls = trajectory.tool_calls_made;
        ctx.budget = config.budget;

        std::string raw;
        try {
            raw = policy.act(ctx);
        } catch (const std::exception& e) {
            trajectory.usable = false;
            trajectory.failure = e.what();
            trajectory.terminal_reason = TerminalReason::kPolicyFailure;
            break;
        }

        Turn policy_turn;
        policy_turn.role = TurnRole::kPolicy;
        policy_turn.text = raw;
        policy_turn.trainable = true;
        trajectory.turns.push_back(policy_turn);
        messages.push_back({"assistant", raw});

        const ParsedTurn parsed = parse_turn(raw);
        if (parsed.is_answer()) {
            trajectory.final_answer = extract_answer(parsed.answer().text);
            trajectory.terminal_reason = TerminalReason::kAnswered;
            break;
        }
        if (parsed.is_tool_use()) {
            if (trajectory.tool_attempts >= config.budget.max_tool_calls) {
                // The (N+1)-th tool attempt is not executed.
                trajectory.terminal_reason = TerminalReason::kMaxTurns;
                break;
            }
            ++trajectory.tool_attempts;
            Observation obs = zoom(video, parsed.tool_call(), config.budget);
            CallRecord record;
            record.call = parsed.tool_call();
            record.error = obs.error;
            Turn obs_turn;
            if (obs.error) {
                obs_turn = error_observation(obs);
            } else {
                ++trajectory.tool_calls_made;
                record.frames_delivered = static_cast<int>(obs.frames.size());
                obs_turn = observation_turn(render_observation_text(obs, nullptr, video.duration),
                                            record.frames_delivered);
            }
            trajectory.calls.push_back(record);
            trajectory.turns.push_back(obs_turn);
            messages.push_back({"user", obs_turn.text});
            observations.push_back(std::move(obs));
            continue;
        }

        // Malformed turn.
        if (config.on_malformed == MalformedPolicy::kTerminate) {
            trajectory.terminal_reason = TerminalReason::kMalformedLimit;
            break;
        }
        Turn obs_turn = error_observation(parsed.malformed().reason);
        trajectory.turns.push_back(obs_turn);
        messages.push_back({"user", obs_turn.text});
    }

    trajectory.total_frames = total_frames(trajectory);
    return trajectory;
}

namespace {

ordered_json question_to_json_value(const Question& question) {
    ordered_json choices = ordered_json::array();
    for (const auto& [label, text] : question.choices) {
        choices.push_back(ordered_json::array({label, text}));
    }
    return {{"text", question.text},
            {"choices", choices},
            {"gold", question.gold},
            {"kind", std::string(question_kind_name(question.kind))},
            {"min_detect_fps", question.min_detect_fps}};
}

Question question_from_json_value(const nlohmann::json& doc) {
    Question question;
    question.text = doc.at("text").get<std::string>();
    for (const auto& choice : doc.at("choices")) {
        question.choices.emplace_back(choice.at(0).get<std::string>(),
                                      choice.at(1).get<std::string>());
    }
    question.gold = doc.at("gold").get<std::string>();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "needle") {
        question.kind = QuestionKind::kNeedle;
    } else if (kind == "count") {
        question.kind = QuestionKind::kCount;
    } else if (kind == "order") {
        question.kind = QuestionKind::kOrder;
    } else {
        throw std::invalid_argument("unknown question kind: " + kind);
    }
    question.min_detect_fps = doc.at("min_detect_fps").get<double>();
    return question;
}

TerminalReason terminal_reason_from_name(const std::string& name) {
    if (name == "ANSWERED") return TerminalReason::kAnswered;
    if (name == "MAX_TURNS") return TerminalReason::kMaxTurns;
    if (name == "MALFORMED_LIMIT") return TerminalReason::kMalformedLimit;
    if (name == "POLICY_FAILURE") return TerminalReason::kPolicyFailure;
    throw std::invalid_argument("unknown terminal reason: " + name);
}

ZoomError zoom_error_from_name(const std::string& name) {
    if (name == "BUDGET_EXCEEDED") return ZoomError::kBudgetExceeded;
    if (name == "OUT_OF_RANGE") return ZoomError::kOutOfRange;
    if (name == "EMPTY_SEGMENT") return ZoomError::kEmptySegment;
    if (name == "FPS_TOO_HIGH") return ZoomError::kFpsTooHigh;
    throw std::invalid_argument("unknown zoom error: " + name);
}

}  // namespace

std::string trajectory_to_json(const Trajectory& trajectory) {
    ordered_json turns = ordered_json::array();
    for (const Turn& turn : trajectory.turns) {
        turns.push_back({{"role", turn.role == TurnRole::kPolicy ? "policy" : "observation"},
                         {"text", turn.text},
                         {"trainable", turn.trainable},
                         {"frames_delivered", turn.frames_delivered}});
    }
    ordered_json calls = ordered_json::array();
    for (const CallRecord& record : trajectory.calls) {
        ordered_json call = {{"t_start", record.call.t_start},
                             {"t_end", record.call.t_end},
                             {"fps", record.call.fps},
                             {"frames_delivered", record.frames_delivered}};
        call["error"] = record.error ? ordered_json(std::string(zoom_error_name(*record.error)))
                                     : ordered_json(nullptr);
        calls.push_back(call);
    }
    ordered_json doc = {
        {"task_id", trajectory.task_id},
        {"question", question_to_json_value(trajectory.question)},
        {"turns", turns},
        {"calls", calls},
        {"final_answer", trajectory.final_answer.empty() ? ordered_json(nullptr)
                                                         : ordered_json(trajectory.final_answer)},
        {"tool_calls_made", trajectory.tool_calls_made},
        {"tool_attempts", trajectory.tool_attempts},
        {"total_frames", trajectory.total_frames},
        {"terminal_reason", std::string(terminal_reason_name(trajectory.terminal_reason))},
        {"usable", trajectory.usable},
        {"failure", trajectory.failure.empty() ? ordered_json(nullptr)
                                               : ordered_json(trajectory.failure)},
    };
    return doc.dump();
}

Trajectory trajectory_from_json(const std::string& line) {
    const auto doc = nlohmann::json::parse(line);
    Trajectory trajectory;
    trajectory.task_id = doc.at("task_id").get<std::string>();
    trajectory.question = question_from_json_value(doc.at("question"));
    for (const auto& turn_doc : doc.at("turns")) {
        Turn turn;
        turn.role = turn_doc.at("role").get<std::string>() == "policy" ? TurnRole::kPolicy
                                                                       : TurnRole::kObservation;
        turn.text = turn_doc.at("text").get<std::string>();
        turn.trainable = turn_doc.at("trainable").get<bool>();
        turn.frames_delivered = turn_doc.at("frames_delivered").get<int>();
        trajectory.turns.push_back(std::move(turn));
    }
    for (const auto& call_doc : doc.at("calls")) {
        CallRecord record;
        record.call.t_start = call_doc.at("t_start").get<double>();
        record.call.t_end = call_doc.at("t_end").get<double>();
        record.call.fps = call_doc.at("fps").get<double>();
        record.frames_delivered = call_doc.at("frames_delivered").get<int>();
        if (!call_doc.at("error").is_null()) {
            record.error = zoom_error_from_name(call_doc.at("error").get<std::string>());
        }
        trajectory.calls.push_back(record);
    }
    if (!doc.at("final_answer").is_null()) {
        trajectory.final_answer = doc.at("final_answer").get<std::string>();
    }
    trajectory.tool_calls_made = doc.at("tool_calls_made").get<int>();
    trajectory.tool_attempts = doc.at("tool_attempts").get<int>();
    trajectory.total_frames = doc.at("total_frames").get<int>();
    trajectory.terminal_reason =
        terminal_reason_from_name(doc.at("terminal_reason").get<std::string>());
    trajectory.usable = doc.at("usable").get<bool>();
    if (!doc.at("failure").is_null()) {
        trajectory.failure = doc.at("failure").get<std::string>();
    }
    return trajectory;
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open trajectory file: " + path);
    }
    std::vector<Trajectory> trajectories;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            trajectories.push_back(trajectory_from_json(line));
        }
    }
    return trajectories;
}

void save_trajectories(const std::vector<Trajectory>& trajectories, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open trajectory file for writing: " + path);
    }
    for (const Trajectory& trajectory : trajectories) {
        out << trajectory_to_json(trajectory) << '\n';
    }
}

}  // namespace zoomrl
