#include "zoomrl/curation.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "zoomrl/prompts.hpp"
#include "zoomrl/protocol.hpp"
#include "zoomrl/reward.hpp"

namespace zoomrl {

namespace {

using ordered_json = nlohmann::ordered_json;

bool verify(const Trajectory& trajectory, const Task& task) {
    const std::string gold = dense_oracle(task.video, task.question);
    return accuracy_reward(trajectory, gold) == 1 && format_reward(trajectory) == 1;
}

std::string render_failed_attempt(const Trajectory& failed) {
    std::string out;
    if (failed.calls.empty()) {
        out += "No tool call was made; the answer was given directly from the glance.\n";
    }
    for (const CallRecord& record : failed.calls) {
        out += "Tool call: " + render_tool_call(record.call);
        if (record.error) {
            out += fmt::format("  (environment error: {})", zoom_error_name(*record.error));
        }
        out += '\n';
    }
    if (!failed.final_answer.empty()) {
        out += "Final answer given: " + failed.final_answer + "\n";
    }
    return out;
}

std::string render_choices_inline(const Question& question) {
    std::string out;
    for (const auto& [label, text] : question.choices) {
        if (!out.empty()) {
            out += ' ';
        }
        out += label + ": " + text;
    }
    return out;
}

std::string length_bin(std::size_t chars) {
    if (chars < 4096) return "<4096";
    if (chars < 8192) return "4096-8191";
    if (chars < 16384) return "8192-16383";
    if (chars < 32768) return "16384-32767";
    return ">=32768";
}

}  // namespace

std::string_view record_origin_name(RecordOrigin origin) {
    return origin == RecordOrigin::kExemplar ? "exemplar" : "reflection";
}

std::string_view drop_reason_name(DropReason reason) {
    switch (reason) {
        case DropReason::kWrongAnswer: return "WRONG_ANSWER";
        case DropReason::kFormat: return "FORMAT";
        case DropReason::kPolicyFailure: return "POLICY_FAILURE";
        case DropReason::kReflectionFailed: return "REFLECTION_FAILED";
    }
    return "UNKNOWN";
}

std::vector<CurationRecord> distill_exemplars(Policy& expert, const std::vector<Task>& tasks,
                                              const CurationConfig& config) {
    std::vector<CurationRecord> records;
    records.reserve(tasks.size());
    for (const Task& task : tasks) {
        CurationRecord record;
        record.origin = RecordOrigin::kExemplar;
        record.expert_id = expert.name();
        record.trajectory =
            run_episode(expert, task.video, task.question, config.episode, task.task_id);
        if (!record.trajectory.usable) {
            record.drop_reason = DropReason::kPolicyFailure;
        } else if (accuracy_reward(record.trajectory,
                                   dense_oracle(task.video, task.question)) != 1) {
            record.drop_reason = DropReason::kWrongAnswer;
        } else if (format_reward(record.trajectory) != 1) {
            record.drop_reason = DropReason::kFormat;
        } else {
            record.kept = true;
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::vector<std::pair<std::size_t, Trajectory>> mine_failures(Policy& student,
                                                              const std::vector<Task>& tasks,
                                                              const CurationConfig& config) {
    std::vector<std::pair<std::size_t, Trajectory>> failures;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Task& task = tasks[i];
        Trajectory trajectory =
            run_episode(student, task.video, task.question, config.episode, task.task_id);
        const std::string gold = dense_oracle(task.video, task.question);
        if (accuracy_reward(trajectory, gold) == 0) {
            failures.emplace_back(i, std::move(trajectory));
        }
    }
    return failures;
}

CurationRecord reflect(Policy& expert, const Task& task, const Trajectory& failed,
                       const CurationConfig& config) {
    CurationRecord record;
    record.origin = RecordOrigin::kReflection;
    record.expert_id = expert.name();

    const BudgetConfig& budget = config.episode.budget;
    const std::string reasoning_prompt = reasoning_system_prompt(budget.per_call_budget);
    const std::string reflection_prompt = reflection_system_prompt(budget.per_call_budget);

    for (int attempt = 0; attempt <= config.reflect_retries; ++attempt) {
        std::vector<Observation> observations;
        observations.push_back(uniform_glance(task.video, budget.glance_frames));
        const std::string glance_text =
            render_observation_text(observations.front(), &task.question, task.video.duration);

        // Expert-side conditioning mirrors the reflection prompt's example:
        // question, choices, then the failed attempt, after the glance.
        std::string conditioning = glance_text;
        conditioning += "\nQuestion: " + task.question.text;
        conditioning += "\nChoices: " + render_choices_inline(task.question);
        conditioning += "\nPrevious Trajectory (Wrong):\n" + render_failed_attempt(failed);

        std::vector<ChatMessage> messages;
        messages.push_back({"system", reflection_prompt});
        messages.push_back({"user", conditioning});

        Trajectory trajectory;
        trajectory.task_id = task.task_id;
        trajectory.question = task.question;
        Turn glance_turn;
        glance_turn.role = TurnRole::kObservation;
        glance_turn.text = glance_text;
        glance_turn.frames_delivered = static_cast<int>(observations.front().frames.size());
        trajectory.turns.push_back(glance_turn);

        PolicyContext ctx;
        ctx.system_prompt = reflection_prompt;
        ctx.messages = messages;
        ctx.question = &task.question;
        ctx.video = &task.video;
        ctx.observations.push_back(&observations.front());
        ctx.budget = budget;
        ctx.mode = InteractionMode::kReflection;
        ctx.failed = &failed;
        ctx.attempt = attempt;

        std::string turn1;
        try {
            turn1 = expert.act(ctx);
        } catch (const std::exception& e) {
            record.drop_reason = DropReason::kPolicyFailure;
            record.trajectory = std::move(trajectory);
            record.trajectory.usable = false;
            record.trajectory.failure = e.what();
            return record;
        }

        Turn policy_turn;
        policy_turn.role = TurnRole::kPolicy;
        policy_turn.text = turn1;
        policy_turn.trainable = true;
        trajectory.turns.push_back(policy_turn);
        messages.push_back({"assistant", turn1});

        const ParsedTurn parsed1 = parse_turn(turn1);
        if (!parsed1.is_tool_use()) {
            record.trajectory = std::move(trajectory);
            continue;  // malformed correction; retry if allowed
        }
        ++trajectory.tool_attempts;
        Observation obs = zoom(task.video, parsed1.tool_call(), budget);
        CallRecord call_record;
        call_record.call = parsed1.tool_call();
        call_record.error = obs.error;
        Turn obs_turn;
        obs_turn.role = TurnRole::kObservation;
        if (obs.error) {
            obs_turn.text = obs.message;
        } else {
            ++trajectory.tool_calls_made;
            call_record.frames_delivered = static_cast<int>(obs.frames.size());
            obs_turn.text = render_observation_text(obs, nullptr, task.video.duration);
            obs_turn.frames_delivered = call_record.frames_delivered;
        }
        trajectory.calls.push_back(call_record);
        trajectory.turns.push_back(obs_turn);
        messages.push_back({"user", obs_turn.text});
        observations.push_back(std::move(obs));

        PolicyContext ctx2 = ctx;
        ctx2.messages = messages;
        ctx2.observations.clear();
        for (const Observation& o : observations) {
            ctx2.observations.push_back(&o);
        }
        ctx2.tool_attempts = trajectory.tool_attempts;
        ctx2.successful_calls = trajectory.tool_calls_made;

        std::string turn2;
        try {
            turn2 = expert.act(ctx2);
        } catch (const std::exception& e) {
            record.drop_reason = DropReason::kPolicyFailure;
            record.trajectory = std::move(trajectory);
            record.trajectory.usable = false;
            record.trajectory.failure = e.what();
            return record;
        }

        Turn answer_turn;
        answer_turn.role = TurnRole::kPolicy;
        answer_turn.text = turn2;
        answer_turn.trainable = true;
        trajectory.turns.push_back(answer_turn);

        const ParsedTurn parsed2 = parse_turn(turn2);
        if (parsed2.is_answer()) {
            trajectory.final_answer = extract_answer(parsed2.answer().text);
            trajectory.terminal_reason = TerminalReason::kAnswered;
        } else {
            trajectory.terminal_reason = TerminalReason::kMaxTurns;
        }
        trajectory.total_frames = total_frames(trajectory);

        if (verify(trajectory, task)) {
            record.trajectory = std::move(trajectory);
            record.kept = true;
            return record;
        }
        record.trajectory = std::move(trajectory);
    }

    record.drop_reason = DropReason::kReflectionFailed;
    return record;
}

CorpusStats export_sft(const std::vector<CurationRecord>& records, const std::string& sft_path,
                       const std::string& stats_path, const CurationConfig& config) {
    std::vector<const CurationRecord*> kept;
    for (const CurationRecord& record : records) {
        if (record.kept) {
            kept.push_back(&record);
        }
    }
    std::stable_sort(kept.begin(), kept.end(), [](const CurationRecord* a,
                                                  const CurationRecord* b) {
        if (a->trajectory.task_id != b->trajectory.task_id) {
            return a->trajectory.task_id < b->trajectory.task_id;
        }
        return a->origin < b->origin;
    });

    // Mix-ratio cap: trim surplus exemplars down to ratio * reflections. The
    // cap never manufactures data, so an exemplar-only set exports unchanged.
    const auto reflections = static_cast<std::size_t>(
        std::count_if(kept.begin(), kept.end(), [](const CurationRecord* r) {
            return r->origin == RecordOrigin::kReflection;
        }));
    std::size_t exemplar_budget = kept.size();
    if (reflections > 0) {
        exemplar_budget =
            static_cast<std::size_t>(config.mix_ratio * static_cast<double>(reflections));
    }

    std::ofstream out(sft_path);
    if (!out) {
        throw std::runtime_error("cannot open SFT output file: " + sft_path);
    }

    CorpusStats stats;
    const std::string system_prompt =
        reasoning_system_prompt(config.episode.budget.per_call_budget);
    std::size_t exemplars_used = 0;
    for (const CurationRecord* record : kept) {
        if (record->origin == RecordOrigin::kExemplar) {
            if (exemplars_used >= exemplar_budget) {
                continue;
            }
            ++exemplars_used;
        }
        const Trajectory& trajectory = record->trajectory;
        ordered_json messages = ordered_json::array();
        messages.push_back(
            {{"role", "system"}, {"content", system_prompt}, {"trainable", false}});
        std::size_t chars = system_prompt.size();
        for (const Turn& turn : trajectory.turns) {
            const bool is_policy = turn.role == TurnRole::kPolicy;
            messages.push_back({{"role", is_policy ? "assistant" : "user"},
                                {"content", turn.text},
                                {"trainable", is_policy}});
            chars += turn.text.size();
        }
        const ordered_json line = {
            {"id", trajectory.task_id + "#" + std::string(record_origin_name(record->origin))},
            {"origin", std::string(record_origin_name(record->origin))},
            {"expert_id", record->expert_id},
            {"messages", messages},
            {"tool_calls", trajectory.tool_calls_made},
            {"answer", trajectory.final_answer},
        };
        out << line.dump() << '\n';

        ++stats.records;
        ++stats.origin_counts[std::string(record_origin_name(record->origin))];
        ++stats.round_hist[trajectory.tool_calls_made];
        ++stats.length_hist[length_bin(chars)];
    }
    out.close();

    ordered_json round_hist = ordered_json::object();
    for (const auto& [rounds, count] : stats.round_hist) {
        round_hist[std::to_string(rounds)] = count;
    }
    ordered_json length_hist = ordered_json::object();
    for (const auto& [bin, count] : stats.length_hist) {
        length_hist[bin] = count;
    }
    ordered_json origin_counts = ordered_json::object();
    double total = static_cast<double>(stats.records);
    ordered_json origin_mix = ordered_json::object();
    for (const auto& [origin, count] : stats.origin_counts) {
        origin_counts[origin] = count;
        origin_mix[origin] = total > 0.0 ? static_cast<double>(count) / total : 0.0;
    }
    const ordered_json stats_doc = {{"records", stats.records},
                                    {"origin_counts", origin_counts},
                                    {"origin_mix", origin_mix},
                                    {"round_hist", round_hist},
                                    {"char_length_hist", length_hist}};
    std::ofstream stats_out(stats_path);
    if (!stats_out) {
        throw std::runtime_error("cannot open stats output file: " + stats_path);
    }
    stats_out << stats_doc.dump(2) << '\n';
    return stats;
}

std::string record_to_json(const CurationRecord& record) {
    ordered_json doc = {
        {"task_id", record.trajectory.task_id},
        {"origin", std::string(record_origin_name(record.origin))},
        {"verdict", record.kept ? "KEPT" : "DROPPED"},
        {"drop_reason", record.drop_reason
                            ? ordered_json(std::string(drop_reason_name(*record.drop_reason)))
                            : ordered_json(nullptr)},
        {"expert_id", record.expert_id},
        {"trajectory", nlohmann::ordered_json::parse(trajectory_to_json(record.trajectory))},
    };
    return doc.dump();
}

CurationRecord record_from_json(const std::string& line) {
    const auto doc = nlohmann::json::parse(line);
    CurationRecord record;
    record.origin = doc.at("origin").get<std::string>() == "exemplar" ? RecordOrigin::kExemplar
                                                                      : RecordOrigin::kReflection;
    record.kept = doc.at("verdict").get<std::string>() == "KEPT";
    if (!doc.at("drop_reason").is_null()) {
        const std::string name = doc.at("drop_reason").get<std::string>();
        if (name == "WRONG_ANSWER") record.drop_reason = DropReason::kWrongAnswer;
        else if (name == "FORMAT") record.drop_reason = DropReason::kFormat;
        else if (name == "POLICY_FAILURE") record.drop_reason = DropReason::kPolicyFailure;
        else if (name == "REFLECTION_FAILED") record.drop_reason = DropReason::kReflectionFailed;
        else throw std::invalid_argument("unknown drop reason: " + name);
    }
    record.expert_id = doc.at("expert_id").get<std::string>();
    record.trajectory = trajectory_from_json(doc.at("trajectory").dump());
    return record;
}

std::vector<CurationRecord> load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open records file: " + path);
    }
    std::vector<CurationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            records.push_back(record_from_json(line));
        }
    }
    return records;
}

void save_records(const std::vector<CurationRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open records file for writing: " + path);
    }
    for (const CurationRecord& record : records) {
        out << record_to_json(record) << '\n';
    }
}

}  // namespace zoomrl
