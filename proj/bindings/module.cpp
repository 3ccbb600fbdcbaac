#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zoomrl/curation.hpp"
#include "zoomrl/episode.hpp"
#include "zoomrl/grpo.hpp"
#include "zoomrl/policy.hpp"
#include "zoomrl/prompts.hpp"
#include "zoomrl/protocol.hpp"
#include "zoomrl/reward.hpp"
#include "zoomrl/videoworld.hpp"

namespace py = pybind11;
using namespace zoomrl;

namespace {

py::object parsed_turn_to_py(const ParsedTurn& turn) {
    py::dict out;
    out["think"] = turn.think_text;
    if (turn.is_tool_use()) {
        out["action"] = "tool_use";
        out["call"] = turn.tool_call();
    } else if (turn.is_answer()) {
        out["action"] = "answer";
        out["answer"] = turn.answer().text;
    } else {
        out["action"] = "malformed";
        out["reason"] = std::string(reason_code_name(turn.malformed().reason));
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Glance-then-zoom agentic video QA engine";

    py::class_<ToolCall>(m, "ToolCall")
        .def(py::init<>())
        .def(py::init([](double t_start, double t_end, double fps) {
                 return ToolCall{t_start, t_end, fps};
             }),
             py::arg("t_start"), py::arg("t_end"), py::arg("fps"))
        .def_readwrite("t_start", &ToolCall::t_start)
        .def_readwrite("t_end", &ToolCall::t_end)
        .def_readwrite("fps", &ToolCall::fps)
        .def("__eq__", [](const ToolCall& a, const ToolCall& b) { return a == b; })
        .def("__repr__", [](const ToolCall& c) { return render_tool_call(c); });

    m.def("requested_frames", &requested_frames, py::arg("call"));
    m.def("parse_turn",
          [](const std::string& text) { return parsed_turn_to_py(parse_turn(text)); },
          py::arg("text"));
    m.def("render_tool_call", &render_tool_call, py::arg("call"));
    m.def("extract_answer",
          [](const std::string& text) { return extract_answer(text); },
          py::arg("answer_text"));
    m.def("reasoning_system_prompt", &reasoning_system_prompt, py::arg("per_call_budget") = 16);
    m.def("reflection_system_prompt", &reflection_system_prompt, py::arg("per_call_budget") = 16);

    py::class_<BudgetConfig>(m, "BudgetConfig")
        .def(py::init<>())
        .def_readwrite("glance_frames", &BudgetConfig::glance_frames)
        .def_readwrite("per_call_budget", &BudgetConfig::per_call_budget)
        .def_readwrite("max_tool_calls", &BudgetConfig::max_tool_calls)
        .def("total_cap", &BudgetConfig::total_cap);

    py::class_<GenParams>(m, "GenParams")
        .def(py::init<>())
        .def_readwrite("duration", &GenParams::duration)
        .def_readwrite("native_fps", &GenParams::native_fps)
        .def_readwrite("n_distractors", &GenParams::n_distractors)
        .def_readwrite("needle_span", &GenParams::needle_span)
        .def_readwrite("marker_span", &GenParams::marker_span)
        .def_readwrite("repeat_span", &GenParams::repeat_span)
        .def_readwrite("count_min", &GenParams::count_min)
        .def_readwrite("count_max", &GenParams::count_max)
        .def_property(
            "kind",
            [](const GenParams& p) { return std::string(question_kind_name(p.kind)); },
            [](GenParams& p, const std::string& name) {
                if (name == "needle") p.kind = QuestionKind::kNeedle;
                else if (name == "count") p.kind = QuestionKind::kCount;
                else if (name == "order") p.kind = QuestionKind::kOrder;
                else throw std::invalid_argument("unknown kind: " + name);
            });

    py::class_<Question>(m, "Question")
        .def_readonly("text", &Question::text)
        .def_readonly("choices", &Question::choices)
        .def_readonly("gold", &Question::gold)
        .def_readonly("min_detect_fps", &Question::min_detect_fps)
        .def_property_readonly(
            "kind", [](const Question& q) { return std::string(question_kind_name(q.kind)); });

    py::class_<SyntheticVideo>(m, "SyntheticVideo")
        .def_readonly("duration", &SyntheticVideo::duration)
        .def_readonly("native_fps", &SyntheticVideo::native_fps)
        .def_property_readonly("event_count",
                               [](const SyntheticVideo& v) { return v.events.size(); });

    py::class_<Task>(m, "Task")
        .def_readonly("task_id", &Task::task_id)
        .def_readonly("video", &Task::video)
        .def_readonly("question", &Task::question)
        .def("to_json", [](const Task& t) { return task_to_json(t); });

    py::class_<Observation>(m, "Observation")
        .def_property_readonly("frame_count",
                               [](const Observation& o) { return o.frames.size(); })
        .def_property_readonly("timestamps",
                               [](const Observation& o) {
                                   std::vector<double> ts;
                                   ts.reserve(o.frames.size());
                                   for (const Frame& f : o.frames) {
                                       ts.push_back(f.timestamp);
                                   }
                                   return ts;
                               })
        .def_property_readonly("error",
                               [](const Observation& o) -> py::object {
                                   if (!o.error) {
                                       return py::none();
                                   }
                                   return py::str(std::string(zoom_error_name(*o.error)));
                               })
        .def_readonly("message", &Observation::message);

    m.def("generate", &generate, py::arg("params"), py::arg("seed"));
    m.def("task_from_json", &task_from_json, py::arg("line"));
    m.def("uniform_glance", &uniform_glance, py::arg("video"), py::arg("n"));
    m.def("zoom", &zoom, py::arg("video"), py::arg("call"), py::arg("budget"));
    m.def("dense_oracle", &dense_oracle, py::arg("video"), py::arg("question"));
    m.def(
        "answer_from_frames",
        [](const std::vector<Observation>& observations, const Question& question) -> py::object {
            const auto answer = answer_from_frames(observations, question);
            return answer ? py::object(py::str(*answer)) : py::object(py::none());
        },
        py::arg("observations"), py::arg("question"));

    py::class_<EpisodeConfig>(m, "EpisodeConfig")
        .def(py::init<>())
        .def_readwrite("budget", &EpisodeConfig::budget)
        .def_readwrite("max_turns", &EpisodeConfig::max_turns);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("task_id", &Trajectory::task_id)
        .def_readonly("final_answer", &Trajectory::final_answer)
        .def_readonly("tool_calls_made", &Trajectory::tool_calls_made)
        .def_readonly("tool_attempts", &Trajectory::tool_attempts)
        .def_readonly("total_frames", &Trajectory::total_frames)
        .def_readonly("usable", &Trajectory::usable)
        .def_property_readonly("terminal_reason",
                               [](const Trajectory& t) {
                                   return std::string(terminal_reason_name(t.terminal_reason));
                               })
        .def_property_readonly("turn_count", [](const Trajectory& t) { return t.turns.size(); })
        .def("to_json", [](const Trajectory& t) { return trajectory_to_json(t); });

    m.def("trajectory_from_json", &trajectory_from_json, py::arg("line"));

    m.def(
        "run_episode",
        [](const std::string& policy_name, const Task& task, const EpisodeConfig& config) {
            auto policy = make_scripted_policy(policy_name);
            return run_episode(*policy, task.video, task.question, config, task.task_id);
        },
        py::arg("policy"), py::arg("task"), py::arg("config") = EpisodeConfig{},
        "Run one episode with a scripted policy: direct_hit, progressive, self_refine, "
        "no_tool or always_zoom");

    py::class_<RewardWeights>(m, "RewardWeights")
        .def(py::init<>())
        .def(py::init([](double w_acc, double w_fmt, double w_tool) {
                 return RewardWeights{w_acc, w_fmt, w_tool};
             }),
             py::arg("w_acc"), py::arg("w_fmt"), py::arg("w_tool"))
        .def_readwrite("w_acc", &RewardWeights::w_acc)
        .def_readwrite("w_fmt", &RewardWeights::w_fmt)
        .def_readwrite("w_tool", &RewardWeights::w_tool);

    py::class_<RewardBreakdown>(m, "RewardBreakdown")
        .def_readonly("r_acc", &RewardBreakdown::r_acc)
        .def_readonly("r_fmt", &RewardBreakdown::r_fmt)
        .def_readonly("r_tool", &RewardBreakdown::r_tool)
        .def_readonly("total", &RewardBreakdown::total);

    m.def("total_reward", &total_reward, py::arg("trajectory"), py::arg("gold"),
          py::arg("weights") = RewardWeights{});

    auto grpo_mod = m.def_submodule("grpo", "Group-relative advantage and masked-surrogate math");

    py::class_<grpo::TokenizedRollout>(grpo_mod, "TokenizedRollout")
        .def(py::init<>())
        .def_readwrite("logp_new", &grpo::TokenizedRollout::logp_new)
        .def_readwrite("logp_old", &grpo::TokenizedRollout::logp_old)
        .def_readwrite("logp_ref", &grpo::TokenizedRollout::logp_ref)
        .def_property(
            "mask",
            [](const grpo::TokenizedRollout& r) {
                std::vector<bool> mask;
                mask.reserve(r.mask.size());
                for (auto m_ : r.mask) {
                    mask.push_back(m_ != 0);
                }
                return mask;
            },
            [](grpo::TokenizedRollout& r, const std::vector<bool>& mask) {
                r.mask.clear();
                for (bool m_ : mask) {
                    r.mask.push_back(m_ ? 1 : 0);
                }
            })
        .def_readwrite("entropy", &grpo::TokenizedRollout::entropy)
        .def_readwrite("reward", &grpo::TokenizedRollout::reward);

    py::class_<grpo::ObjectiveConfig>(grpo_mod, "ObjectiveConfig")
        .def(py::init<>())
        .def_readwrite("clip_low", &grpo::ObjectiveConfig::clip_low)
        .def_readwrite("clip_high", &grpo::ObjectiveConfig::clip_high)
        .def_readwrite("kl_coef", &grpo::ObjectiveConfig::kl_coef)
        .def_readwrite("entropy_coef", &grpo::ObjectiveConfig::entropy_coef);

    grpo_mod.def(
        "group_advantages",
        [](const std::vector<double>& rewards) {
            const auto result = grpo::group_advantages(rewards);
            return py::make_tuple(result.advantages, result.degenerate);
        },
        py::arg("rewards"), "Returns (advantages, degenerate)");

    grpo_mod.def(
        "masked_surrogate",
        [](const grpo::TokenizedRollout& rollout, double advantage,
           const grpo::ObjectiveConfig& config) {
            const auto result = grpo::masked_surrogate(rollout, advantage, config);
            return py::make_tuple(result.loss, result.per_token);
        },
        py::arg("rollout"), py::arg("advantage"),
        py::arg("config") = grpo::ObjectiveConfig{}, "Returns (loss, per_token)");

    grpo_mod.def("kl_term", &grpo::kl_term, py::arg("rollout"));
    grpo_mod.def("surrogate_grad", &grpo::surrogate_grad, py::arg("rollout"), py::arg("advantage"),
                 py::arg("config") = grpo::ObjectiveConfig{});
    grpo_mod.def("kl_grad", &grpo::kl_grad, py::arg("rollout"));
}
