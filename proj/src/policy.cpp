#include "zoomrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <fmt/core.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "zoomrl/episode.hpp"
#include "zoomrl/rng.hpp"

namespace zoomrl {

double fps_for_budget(double width, int max_frames, double native_fps) {
    double fps = (static_cast<double>(max_frames) - 0.25) / width;
    fps = std::min(fps, native_fps);
    ToolCall probe{0.0, width, fps};
    while (fps > 1e-12 && requested_frames(probe) > max_frames) {
        fps *= 1.0 - 1e-12;
        probe.fps = fps;
    }
    return fps;
}

std::string deterministic_guess(const Question& question) {
    std::vector<std::string> texts;
    texts.reserve(question.choices.size());
    for (const auto& [label, text] : question.choices) {
        texts.push_back(text);
    }
    std::sort(texts.begin(), texts.end());  // independent of the gold shuffle
    std::string key = question.text;
    for (const std::string& text : texts) {
        key += '\x1f';
        key += text;
    }
    const std::size_t index = fnv1a(key) % question.choices.size();
    return question.choices[index].first;
}

namespace {

struct PlanCall {
    ToolCall call;
    std::string think;
};

const Event* find_first(const SyntheticVideo& video, EventKind kind) {
    for (const Event& event : video.events) {
        if (event.kind == kind) {
            return &event;
        }
    }
    return nullptr;
}

std::vector<const Event*> find_all(const SyntheticVideo& video, EventKind kind) {
    std::vector<const Event*> events;
    for (const Event& event : video.events) {
        if (event.kind == kind) {
            events.push_back(&event);
        }
    }
    return events;
}

// Smallest fps that still guarantees a covering frame, with margin so a
// boundary-aligned grid cannot round the decisive span out of coverage.
double detect_fps(const Question& question, double window_width, const BudgetConfig& budget,
                  double native_fps) {
    double fps = std::min(1.25 * question.min_detect_fps, native_fps);
    if (requested_frames({0.0, window_width, fps}) > budget.per_call_budget) {
        fps = fps_for_budget(window_width, budget.per_call_budget, native_fps);
    }
    return fps;
}

std::string segment_text(const ToolCall& call) {
    return fmt::format("[{}, {}]", format_seconds(call.t_start), format_seconds(call.t_end));
}

// The minimal oracle plan: one call per decisive span, fps chosen frugally.
std::vector<PlanCall> decisive_plan(const SyntheticVideo& video, const Question& question,
                                    const BudgetConfig& budget) {
    std::vector<PlanCall> plan;
    switch (question.kind) {
        case QuestionKind::kNeedle: {
            const Event* needle = find_first(video, EventKind::kNeedle);
            if (needle == nullptr) {
                return plan;
            }
            ToolCall call;
            call.t_start = std::max(0.0, needle->time - 1.0);
            call.t_end = std::min(video.duration, needle->time + needle->span + 1.0);
            call.fps = detect_fps(question, call.t_end - call.t_start, budget, video.native_fps);
            plan.push_back(
                {call, fmt::format("A brief event can hide between glance frames. I will zoom "
                                   "into {} at {} fps to inspect the decisive moment.",
                                   segment_text(call), format_double(call.fps))});
            break;
        }
        case QuestionKind::kCount: {
            const auto reps = find_all(video, EventKind::kRepeat);
            if (reps.empty()) {
                return plan;
            }
            ToolCall call;
            call.t_start = std::max(0.0, reps.front()->time - 0.5);
            call.t_end =
                std::min(video.duration, reps.back()->time + reps.back()->span + 0.5);
            call.fps = detect_fps(question, call.t_end - call.t_start, budget, video.native_fps);
            plan.push_back(
                {call, fmt::format("To count every repetition I need the whole burst at high "
                                   "temporal resolution. I will zoom into {} at {} fps.",
                                   segment_text(call), format_double(call.fps))});
            break;
        }
        case QuestionKind::kOrder: {
            auto markers = find_all(video, EventKind::kMarker);
            std::sort(markers.begin(), markers.end(),
                      [](const Event* a, const Event* b) { return a->time < b->time; });
            for (const Event* marker : markers) {
                ToolCall call;
                call.t_start = std::max(0.0, marker->time - 1.0);
                call.t_end = std::min(video.duration, marker->time + marker->span + 1.0);
                call.fps =
                    detect_fps(question, call.t_end - call.t_start, budget, video.native_fps);
                plan.push_back(
                    {call, fmt::format("I will pin down when '{}' occurs by zooming into {} at "
                                       "{} fps.",
                                       marker->payload, segment_text(call),
                                       format_double(call.fps))});
            }
            break;
        }
    }
    return plan;
}

std::pair<double, double> decisive_region(const SyntheticVideo& video, const Question& question) {
    double lo = video.duration;
    double hi = 0.0;
    const EventKind kind = question.kind == QuestionKind::kNeedle ? EventKind::kNeedle
                           : question.kind == QuestionKind::kCount ? EventKind::kRepeat
                                                                   : EventKind::kMarker;
    for (const Event& event : video.events) {
        if (event.kind == kind) {
            lo = std::min(lo, event.time);
            hi = std::max(hi, event.time + event.span);
        }
    }
    if (lo > hi) {
        lo = hi = 0.0;
    }
    return {lo, hi};
}

PlanCall wide_probe(const SyntheticVideo& video, const Question& question,
                    const BudgetConfig& budget, double glance_spacing) {
    const auto [lo, hi] = decisive_region(video, question);
    ToolCall call;
    call.t_start = std::max(0.0, lo - 60.0);
    call.t_end = std::min(video.duration, hi + 60.0);
    call.fps = fps_for_budget(call.t_end - call.t_start, budget.per_call_budget, video.native_fps);
    return {call, fmt::format("The glance spacing of {} s is too coarse to localize the decisive "
                              "moment. I will first probe a wide window {} at {} fps.",
                              format_double(glance_spacing), segment_text(call),
                              format_double(call.fps))};
}

PlanCall misplaced_probe(const SyntheticVideo& video, const Question& question,
                         const BudgetConfig& budget, MisplaceKind misplace) {
    if (misplace == MisplaceKind::kOverBudget) {
        ToolCall call;
        call.t_start = 0.0;
        call.t_end = video.duration;
        // Deliberately request more frames than one call may deliver.
        call.fps = (budget.per_call_budget + 5.0) / video.duration;
        return {call, fmt::format("I will inspect the entire video {} at {} fps to be safe.",
                                  segment_text(call), format_double(call.fps))};
    }
    const auto [lo, hi] = decisive_region(video, question);
    const double width = std::min(8.0, video.duration / 2.0);
    const double range = std::max(1e-9, video.duration - width);
    double start = std::fmod(lo + video.duration * 0.5, range);
    for (int i = 0; i < 100 && start < hi && start + width > lo; ++i) {
        start = std::fmod(start + width + 1.0, range);
    }
    ToolCall call;
    call.t_start = start;
    call.t_end = start + width;
    call.fps = detect_fps(question, width, budget, video.native_fps);
    return {call, fmt::format("The decisive moment may be around {}; I will inspect it at {} fps.",
                              segment_text(call), format_double(call.fps))};
}

std::string zoom_turn(const PlanCall& step) {
    return "<think>" + step.think + "</think>" + render_tool_call(step.call);
}

std::string answer_turn(const std::string& label) {
    return "<think>The frames gathered so far identify the answer.</think><answer>" + label +
           "</answer>";
}

std::string describe_flaw(const Trajectory* failed) {
    if (failed == nullptr || failed->calls.empty()) {
        return "no high-frame-rate inspection was made at all; the sparse glance cannot resolve "
               "the decisive moment.";
    }
    for (const CallRecord& record : failed->calls) {
        if (record.error == ZoomError::kBudgetExceeded) {
            return "it requested more frames than the per-call budget allows.";
        }
    }
    return "it focused on the wrong time segment.";
}

std::string reflection_target(const SyntheticVideo& video, const Question& question) {
    switch (question.kind) {
        case QuestionKind::kNeedle: {
            const Event* needle = find_first(video, EventKind::kNeedle);
            return needle != nullptr ? needle->payload : "the decisive object";
        }
        case QuestionKind::kCount: {
            const Event* rep = find_first(video, EventKind::kRepeat);
            return rep != nullptr ? fmt::format("the '{}' action", rep->payload)
                                  : "the repeated action";
        }
        case QuestionKind::kOrder:
            return "the order of the two events";
    }
    return "the decisive moment";
}

class ScriptedPolicy : public Policy {
public:
    std::string act(const PolicyContext& ctx) override {
        if (ctx.question == nullptr || ctx.video == nullptr) {
            throw PolicyFailure(PolicyFailure::Kind::kOther,
                                "scripted policy requires oracle task access");
        }
        if (ctx.mode == InteractionMode::kReflection) {
            return reflection_act(ctx);
        }
        return episode_act(ctx);
    }

protected:
    virtual std::vector<PlanCall> plan(const PolicyContext& ctx) const = 0;

    virtual std::string episode_act(const PolicyContext& ctx) const {
        const Question& question = *ctx.question;
        const auto current = answer_from_frames(ctx.observations, question);
        if (current && *current == question.gold) {
            return answer_turn(*current);
        }
        const auto steps = plan(ctx);
        const auto index = static_cast<std::size_t>(ctx.tool_attempts);
        if (index < steps.size()) {
            return zoom_turn(steps[index]);
        }
        return answer_turn(current.value_or(deterministic_guess(question)));
    }

    std::string reflection_act(const PolicyContext& ctx) const {
        const Question& question = *ctx.question;
        if (ctx.tool_attempts == 0) {
            const auto steps = decisive_plan(*ctx.video, question, ctx.budget);
            if (steps.empty()) {
                throw PolicyFailure(PolicyFailure::Kind::kOther, "no decisive plan available");
            }
            const ToolCall& fix = steps.front().call;
            return fmt::format(
                "<think>The previous tool call was incorrect because {}\nNow I will zoom in to "
                "inspect the motion of '{}' between {}s and {}s with higher temporal "
                "resolution.</think>{}",
                describe_flaw(ctx.failed), reflection_target(*ctx.video, question),
                format_double(fix.t_start), format_double(fix.t_end), render_tool_call(fix));
        }
        const auto current = answer_from_frames(ctx.observations, question);
        const std::string label = current.value_or(deterministic_guess(question));
        return fmt::format(
            "<think>In the corrected high-frame-rate clip, the decisive moment around '{}' is "
            "clearly visible.</think>\n<answer> \\boxed{{{}}} </answer>",
            reflection_target(*ctx.video, question), label);
    }
};

class DirectHitPolicy final : public ScriptedPolicy {
public:
    std::string name() const override { return "direct_hit"; }

protected:
    std::vector<PlanCall> plan(const PolicyContext& ctx) const override {
        return decisive_plan(*ctx.video, *ctx.question, ctx.budget);
    }
};

class ProgressivePolicy final : public ScriptedPolicy {
public:
    std::string name() const override { return "progressive"; }

protected:
    std::vector<PlanCall> plan(const PolicyContext& ctx) const override {
        const double spacing = ctx.video->duration / std::max(1, ctx.budget.glance_frames);
        std::vector<PlanCall> steps;
        steps.push_back(wide_probe(*ctx.video, *ctx.question, ctx.budget, spacing));
        for (auto& step : decisive_plan(*ctx.video, *ctx.question, ctx.budget)) {
            step.think = fmt::format(
                "The coarse probe narrows the search. I will zoom into {} at {} fps for a "
                "fine-grained look.",
                segment_text(step.call), format_double(step.call.fps));
            steps.push_back(std::move(step));
        }
        return steps;
    }
};

class SelfRefinePolicy final : public ScriptedPolicy {
public:
    explicit SelfRefinePolicy(MisplaceKind misplace) : misplace_(misplace) {}
    std::string name() const override { return "self_refine"; }

protected:
    std::vector<PlanCall> plan(const PolicyContext& ctx) const override {
        std::vector<PlanCall> steps;
        steps.push_back(misplaced_probe(*ctx.video, *ctx.question, ctx.budget, misplace_));
        bool first = true;
        for (auto& step : decisive_plan(*ctx.video, *ctx.question, ctx.budget)) {
            if (first) {
                step.think = fmt::format(
                    "The previous tool call was incorrect because it focused on the wrong time "
                    "segment. I will zoom into {} at {} fps instead.",
                    segment_text(step.call), format_double(step.call.fps));
                first = false;
            }
            steps.push_back(std::move(step));
        }
        return steps;
    }

private:
    MisplaceKind misplace_;
};

class NoToolPolicy final : public ScriptedPolicy {
public:
    std::string name() const override { return "no_tool"; }

protected:
    std::vector<PlanCall> plan(const PolicyContext&) const override { return {}; }

    std::string episode_act(const PolicyContext& ctx) const override {
        // Baseline contestant: answers whatever the frames reveal, no oracle
        // shortcuts and no zooming. Realizes the uniform-sampling curve.
        const auto current = answer_from_frames(ctx.observations, *ctx.question);
        return answer_turn(current.value_or(deterministic_guess(*ctx.question)));
    }
};

class AlwaysZoomPolicy final : public ScriptedPolicy {
public:
    explicit AlwaysZoomPolicy(bool oversize) : oversize_(oversize) {}
    std::string name() const override { return oversize_ ? "always_zoom_oversize" : "always_zoom"; }

protected:
    std::vector<PlanCall> plan(const PolicyContext&) const override { return {}; }

    std::string episode_act(const PolicyContext& ctx) const override {
        const SyntheticVideo& video = *ctx.video;
        const double width = std::min(static_cast<double>(ctx.budget.per_call_budget),
                                      video.duration * 0.9);
        const double range = std::max(1e-9, video.duration - width);
        ToolCall call;
        call.t_start = std::fmod(static_cast<double>(ctx.tool_attempts) * 97.0, range);
        call.t_end = call.t_start + width;
        if (oversize_) {
            call.fps = (2.0 * ctx.budget.per_call_budget + 0.5) / width;
        } else {
            call.fps = fps_for_budget(width, ctx.budget.per_call_budget, video.native_fps);
        }
        return zoom_turn({call, "I will keep scanning for more evidence."});
    }

private:
    bool oversize_;
};

}  // namespace

std::unique_ptr<Policy> make_direct_hit_policy() { return std::make_unique<DirectHitPolicy>(); }

std::unique_ptr<Policy> make_progressive_policy() { return std::make_unique<ProgressivePolicy>(); }

std::unique_ptr<Policy> make_self_refine_policy(MisplaceKind misplace) {
    return std::make_unique<SelfRefinePolicy>(misplace);
}

std::unique_ptr<Policy> make_no_tool_policy() { return std::make_unique<NoToolPolicy>(); }

std::unique_ptr<Policy> make_always_zoom_policy(bool oversize) {
    return std::make_unique<AlwaysZoomPolicy>(oversize);
}

std::unique_ptr<Policy> make_scripted_policy(const std::string& name) {
    if (name == "direct_hit") return make_direct_hit_policy();
    if (name == "progressive") return make_progressive_policy();
    if (name == "self_refine") return make_self_refine_policy();
    if (name == "no_tool") return make_no_tool_policy();
    if (name == "always_zoom") return make_always_zoom_policy();
    throw std::invalid_argument("unknown policy: " + name);
}

namespace {

// In-flight request cap shared across episodes. counting_semaphore needs a
// compile-time ceiling, so roll a small one.
class Semaphore {
public:
    explicit Semaphore(int count) : count_(count) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return count_ > 0; });
        --count_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            ++count_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int count_;
};

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(Semaphore& sem) : sem_(sem) { sem_.acquire(); }
    ~SemaphoreGuard() { sem_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    Semaphore& sem_;
};

class RemotePolicy final : public Policy {
public:
    explicit RemotePolicy(RemoteConfig config)
        : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
        const std::size_t scheme = config_.endpoint.find("://");
        const std::size_t slash =
            scheme == std::string::npos ? std::string::npos
                                        : config_.endpoint.find('/', scheme + 3);
        base_ = slash == std::string::npos ? config_.endpoint : config_.endpoint.substr(0, slash);
        prefix_ = slash == std::string::npos ? "" : config_.endpoint.substr(slash);
    }

    std::string name() const override { return "remote"; }

    std::string act(const PolicyContext& ctx) override {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw PolicyFailure(PolicyFailure::Kind::kAuth,
                                "missing API key in $" + config_.api_key_env);
        }

        nlohmann::json body;
        body["model"] = config_.model;
        body["temperature"] = config_.temperature;
        auto& messages = body["messages"] = nlohmann::json::array();
        for (const ChatMessage& message : ctx.messages) {
            messages.push_back({{"role", message.role}, {"content", message.content}});
        }
        const std::string payload = body.dump();
        const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

        SemaphoreGuard guard(in_flight_);
        std::string last_error = "transport failure";
        bool timed_out = false;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(
                    config_.initial_backoff_ms * (1 << (attempt - 1))));
            }
            httplib::Client client(base_);
            client.set_connection_timeout(config_.timeout_ms / 1000,
                                          (config_.timeout_ms % 1000) * 1000);
            client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
            client.set_write_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);

            auto res = client.Post(prefix_ + "/chat/completions", headers, payload,
                                   "application/json");
            if (!res) {
                timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                            res.error() == httplib::Error::Read || res.error() == httplib::Error::Write;
                last_error = std::string("TRANSPORT: ") + httplib::to_string(res.error());
                continue;  // transient, retry with backoff
            }
            if (res->status == 401 || res->status == 403) {
                throw PolicyFailure(PolicyFailure::Kind::kAuth,
                                    "AUTH: HTTP " + std::to_string(res->status));
            }
            if (res->status >= 500) {
                last_error = "TRANSPORT: HTTP " + std::to_string(res->status);
                timed_out = false;
                continue;  // server-side transient, retry
            }
            if (res->status != 200) {
                throw PolicyFailure(PolicyFailure::Kind::kTransport,
                                    "TRANSPORT: HTTP " + std::to_string(res->status));
            }
            const auto doc = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
            if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty() ||
                !doc["choices"][0].contains("message")) {
                throw PolicyFailure(PolicyFailure::Kind::kTransport,
                                    "TRANSPORT: malformed chat-completions response");
            }
            return doc["choices"][0]["message"].value("content", std::string());
        }
        throw PolicyFailure(timed_out ? PolicyFailure::Kind::kTimeout
                                      : PolicyFailure::Kind::kTransport,
                            last_error);
    }

private:
    RemoteConfig config_;
    std::string base_;
    std::string prefix_;
    Semaphore in_flight_;
};

}  // namespace

std::unique_ptr<Policy> make_remote_policy(const RemoteConfig& config) {
    return std::make_unique<RemotePolicy>(config);
}

}  // namespace zoomrl
