#include "zoomrl/videoworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "zoomrl/rng.hpp"

namespace zoomrl {

namespace {

using ordered_json = nlohmann::ordered_json;

// Payload pools. Disjoint across kinds so a decoy choice can never be
// "confirmed" by a distractor event. No ':' or '#', which delimit tokens.
const std::vector<std::string> kObjectPool = {
    "golden key",   "red umbrella",  "brass trumpet", "paper map",     "silver coin",
    "blue lantern", "wooden mask",   "glass bottle",  "green scarf",   "iron hourglass",
    "copper bell",  "folded letter", "pocket watch",  "amber ring",    "ivory chess piece",
    "tin whistle",  "velvet glove",  "clay figurine", "striped kite",  "leather satchel",
};

const std::vector<std::string> kActionPool = {
    "jumping jack", "hand wave", "door knock", "coin flip",
    "head nod",     "ball bounce", "single clap", "page turn",
};

const std::vector<std::string> kMarkerPool = {
    "door opens",  "phone rings",  "light turns on", "car departs",
    "whistle blows", "glass breaks", "dog barks",     "bell chimes",
};

const std::vector<std::string> kDistractorPool = {
    "passing pedestrian", "camera pan",     "background chatter", "traffic noise",
    "cloud shadow",       "flickering sign", "crowd movement",     "bird flyby",
};

std::vector<std::string> pick_distinct(Rng& rng, const std::vector<std::string>& pool,
                                       std::size_t count) {
    std::vector<std::string> shuffled = pool;
    rng.shuffle(shuffled);
    shuffled.resize(count);
    return shuffled;
}

bool overlaps(double a_start, double a_end, double b_start, double b_end) {
    return a_start < b_end && b_start < a_end;
}

void place_distractors(Rng& rng, SyntheticVideo& video, int count) {
    std::vector<std::pair<double, double>> placed;
    for (int i = 0; i < count; ++i) {
        const double span = rng.uniform(5.0, std::min(40.0, video.duration / 4.0));
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
            const double time = rng.uniform(0.0, video.duration - span);
            ok = std::none_of(placed.begin(), placed.end(), [&](const auto& p) {
                return overlaps(time, time + span, p.first, p.second);
            });
            if (ok) {
                placed.emplace_back(time, time + span);
                Event event;
                event.time = time;
                event.span = span;
                event.kind = EventKind::kDistractor;
                event.payload = kDistractorPool[rng.next_index(kDistractorPool.size())];
                video.events.push_back(event);
            }
        }
        if (!ok) {
            throw std::invalid_argument(
                "INVALID_PARAMS: cannot place distractor events without overlap");
        }
    }
}

void finalize_events(SyntheticVideo& video) {
    std::stable_sort(video.events.begin(), video.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    for (std::size_t i = 0; i < video.events.size(); ++i) {
        video.events[i].id = static_cast<int>(i);
    }
}

std::string token_for(const Event& event) {
    return fmt::format("{}:{}#{}", event_kind_name(event.kind), event.payload, event.id);
}

struct ParsedToken {
    std::string kind;
    std::string payload;
    int id = 0;
};

std::optional<ParsedToken> parse_token(const std::string& token) {
    const std::size_t colon = token.find(':');
    const std::size_t hash = token.rfind('#');
    if (colon == std::string::npos || hash == std::string::npos || hash < colon) {
        return std::nullopt;
    }
    ParsedToken parsed;
    parsed.kind = token.substr(0, colon);
    parsed.payload = token.substr(colon + 1, hash - colon - 1);
    try {
        parsed.id = std::stoi(token.substr(hash + 1));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    return parsed;
}

Observation zoom_error(ZoomError error, std::string message, const ToolCall& call) {
    Observation obs;
    obs.source = ObservationSource::kError;
    obs.error = error;
    obs.message = std::move(message);
    obs.call = call;
    return obs;
}

std::optional<std::string> label_for_choice_text(const Question& question,
                                                 const std::string& text) {
    for (const auto& [label, choice_text] : question.choices) {
        if (choice_text == text) {
            return label;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string_view event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::kNeedle: return "needle";
        case EventKind::kRepeat: return "repeat";
        case EventKind::kMarker: return "marker";
        case EventKind::kDistractor: return "distractor";
    }
    return "unknown";
}

std::string_view question_kind_name(QuestionKind kind) {
    switch (kind) {
        case QuestionKind::kNeedle: return "needle";
        case QuestionKind::kCount: return "count";
        case QuestionKind::kOrder: return "order";
    }
    return "unknown";
}

std::string_view zoom_error_name(ZoomError error) {
    switch (error) {
        case ZoomError::kBudgetExceeded: return "BUDGET_EXCEEDED";
        case ZoomError::kOutOfRange: return "OUT_OF_RANGE";
        case ZoomError::kEmptySegment: return "EMPTY_SEGMENT";
        case ZoomError::kFpsTooHigh: return "FPS_TOO_HIGH";
    }
    return "UNKNOWN";
}

Task generate(const GenParams& params, std::uint64_t seed) {
    if (params.duration <= 0.0) {
        throw std::invalid_argument("INVALID_PARAMS: duration must be positive");
    }
    const double min_span = 1.0 / params.native_fps;
    if (params.needle_span < min_span || params.marker_span < min_span ||
        params.repeat_span < min_span) {
        throw std::invalid_argument(
            "INVALID_PARAMS: event spans must be detectable at native fps");
    }
    if (params.needle_span >= params.duration || params.marker_span >= params.duration) {
        throw std::invalid_argument("INVALID_PARAMS: event span exceeds duration");
    }
    if (params.count_min < 1 || params.count_max < params.count_min) {
        throw std::invalid_argument("INVALID_PARAMS: bad repetition count range");
    }

    Rng rng(Rng::mix(seed, 0x5eed));
    Task task;
    task.task_id = fmt::format("task-{:08}", seed);
    task.video.duration = params.duration;
    task.video.native_fps = params.native_fps;
    task.video.background_seed = rng.next_u64();

    Question& question = task.question;
    question.kind = params.kind;

    switch (params.kind) {
        case QuestionKind::kNeedle: {
            auto payloads = pick_distinct(rng, kObjectPool, 4);
            const std::string needle_payload = payloads.front();
            Event needle;
            needle.time = rng.uniform(0.0, params.duration - params.needle_span);
            needle.span = params.needle_span;
            needle.kind = EventKind::kNeedle;
            needle.payload = needle_payload;
            task.video.events.push_back(needle);

            rng.shuffle(payloads);  // gold position uniform among the labels
            question.text = "Which object appears only briefly in the video?";
            static const char* kLabels[] = {"A", "B", "C", "D"};
            for (std::size_t i = 0; i < payloads.size(); ++i) {
                question.choices.emplace_back(kLabels[i], payloads[i]);
                if (payloads[i] == needle_payload) {
                    question.gold = kLabels[i];
                }
            }
            question.min_detect_fps = 1.0 / params.needle_span;
            break;
        }
        case QuestionKind::kCount: {
            const std::string action = kActionPool[rng.next_index(kActionPool.size())];
            const int repetitions = rng.uniform_int(params.count_min, params.count_max);
            // Start-to-start gaps in [span, 1.8*span]: never overlapping, and the
            // whole burst stays narrow enough to inspect within one tool call.
            std::vector<double> offsets = {0.0};
            for (int i = 1; i < repetitions; ++i) {
                offsets.push_back(offsets.back() + params.repeat_span * rng.uniform(1.0, 1.8));
            }
            const double width = offsets.back() + params.repeat_span;
            if (width >= params.duration) {
                throw std::invalid_argument("INVALID_PARAMS: repetition burst exceeds duration");
            }
            const double start = rng.uniform(0.0, params.duration - width);
            for (int i = 0; i < repetitions; ++i) {
                Event rep;
                rep.time = start + offsets[static_cast<std::size_t>(i)];
                rep.span = params.repeat_span;
                rep.kind = EventKind::kRepeat;
                rep.payload = action;
                task.video.events.push_back(rep);
            }
            question.text =
                fmt::format("How many times does the '{}' action occur in the video?", action);
            const int lowest = std::max(1, repetitions - 2);
            for (int value = lowest; value < lowest + 5; ++value) {
                question.choices.emplace_back(std::to_string(value),
                                              fmt::format("{} times", value));
            }
            question.gold = std::to_string(repetitions);
            question.min_detect_fps = 1.0 / params.repeat_span;
            break;
        }
        case QuestionKind::kOrder: {
            auto payloads = pick_distinct(rng, kMarkerPool, 2);
            const std::string& first_named = payloads[0];
            const std::string& second_named = payloads[1];
            double t_a = 0.0;
            double t_b = 0.0;
            bool ok = false;
            for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
                t_a = rng.uniform(0.0, params.duration - params.marker_span);
                t_b = rng.uniform(0.0, params.duration - params.marker_span);
                ok = std::abs(t_a - t_b) > params.marker_span + 1.0;
            }
            if (!ok) {
                throw std::invalid_argument(
                    "INVALID_PARAMS: cannot place order markers without overlap");
            }
            for (int i = 0; i < 2; ++i) {
                Event marker;
                marker.time = i == 0 ? t_a : t_b;
                marker.span = params.marker_span;
                marker.kind = EventKind::kMarker;
                marker.payload = payloads[static_cast<std::size_t>(i)];
                task.video.events.push_back(marker);
            }
            question.text = fmt::format(
                "What is the temporal order of '{}' and '{}' in the video?", first_named,
                second_named);
            question.choices.emplace_back(
                "A", fmt::format("{} before {}", first_named, second_named));
            question.choices.emplace_back(
                "B", fmt::format("{} before {}", second_named, first_named));
            question.gold = t_a < t_b ? "A" : "B";
            question.min_detect_fps = 1.0 / params.marker_span;
            break;
        }
    }

    place_distractors(rng, task.video, params.n_distractors);
    finalize_events(task.video);
    return task;
}

Observation uniform_glance(const SyntheticVideo& video, int n) {
    if (n < 1) {
        throw std::invalid_argument("uniform_glance: n must be >= 1");
    }
    Observation obs;
    obs.source = ObservationSource::kGlance;
    obs.frames.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Frame frame;
        frame.timestamp = (static_cast<double>(i) + 0.5) * video.duration / n;
        for (const Event& event : video.events) {
            if (event.covers(frame.timestamp)) {
                frame.descriptor.push_back(token_for(event));
            }
        }
        obs.frames.push_back(std::move(frame));
    }
    return obs;
}

Observation zoom(const SyntheticVideo& video, const ToolCall& call, const BudgetConfig& budget) {
    if (!std::isfinite(call.t_start) || !std::isfinite(call.t_end) || !std::isfinite(call.fps) ||
        call.fps <= 0.0 || call.t_end <= call.t_start) {
        return zoom_error(ZoomError::kEmptySegment,
                          "Error: empty zoom request; end_sec must be greater than start_sec and "
                          "fps must be positive.",
                          call);
    }
    if (call.t_start < 0.0 || call.t_end > video.duration) {
        return zoom_error(ZoomError::kOutOfRange, "Error: segment exceeds video duration.", call);
    }
    if (call.fps > video.native_fps) {
        return zoom_error(
            ZoomError::kFpsTooHigh,
            fmt::format("Error: requested fps exceeds the video's native frame rate of {}.",
                        format_double(video.native_fps)),
            call);
    }
    const std::int64_t requested = requested_frames(call);
    if (requested > budget.per_call_budget) {
        return zoom_error(
            ZoomError::kBudgetExceeded,
            fmt::format("Error: requested {} frames; (end_sec - start_sec) * fps <= {}.",
                        requested, budget.per_call_budget),
            call);
    }

    Observation obs;
    obs.source = ObservationSource::kZoom;
    obs.call = call;
    obs.frames.reserve(static_cast<std::size_t>(requested));
    for (std::int64_t k = 0; k < requested; ++k) {
        Frame frame;
        frame.timestamp =
            std::min(call.t_start + (static_cast<double>(k) + 0.5) / call.fps, call.t_end);
        for (const Event& event : video.events) {
            if (event.covers(frame.timestamp)) {
                frame.descriptor.push_back(token_for(event));
            }
        }
        obs.frames.push_back(std::move(frame));
    }
    return obs;
}

std::string dense_oracle(const SyntheticVideo& video, const Question& question) {
    switch (question.kind) {
        case QuestionKind::kNeedle: {
            for (const Event& event : video.events) {
                if (event.kind == EventKind::kNeedle) {
                    if (auto label = label_for_choice_text(question, event.payload)) {
                        return *label;
                    }
                }
            }
            return {};
        }
        case QuestionKind::kCount: {
            const auto count =
                std::count_if(video.events.begin(), video.events.end(), [](const Event& e) {
                    return e.kind == EventKind::kRepeat;
                });
            return std::to_string(count);
        }
        case QuestionKind::kOrder: {
            std::vector<const Event*> markers;
            for (const Event& event : video.events) {
                if (event.kind == EventKind::kMarker) {
                    markers.push_back(&event);
                }
            }
            if (markers.size() != 2) {
                return {};
            }
            if (markers[0]->time > markers[1]->time) {
                std::swap(markers[0], markers[1]);
            }
            const std::string observed =
                fmt::format("{} before {}", markers[0]->payload, markers[1]->payload);
            if (auto label = label_for_choice_text(question, observed)) {
                return *label;
            }
            return {};
        }
    }
    return {};
}

std::optional<std::string> answer_from_frames(const std::vector<Observation>& observations,
                                              const Question& question) {
    std::vector<const Observation*> pointers;
    pointers.reserve(observations.size());
    for (const Observation& obs : observations) {
        pointers.push_back(&obs);
    }
    return answer_from_frames(pointers, question);
}

std::optional<std::string> answer_from_frames(const std::vector<const Observation*>& observations,
                                              const Question& question) {
    std::optional<std::string> needle_payload;
    std::set<int> repeat_ids;
    std::map<std::string, double> marker_first_seen;

    for (const Observation* obs_ptr : observations) {
        const Observation& obs = *obs_ptr;
        for (const Frame& frame : obs.frames) {
            for (const std::string& token : frame.descriptor) {
                const auto parsed = parse_token(token);
                if (!parsed) {
                    continue;
                }
                if (parsed->kind == "needle" && !needle_payload) {
                    needle_payload = parsed->payload;
                } else if (parsed->kind == "repeat") {
                    repeat_ids.insert(parsed->id);
                } else if (parsed->kind == "marker") {
                    auto [it, inserted] =
                        marker_first_seen.try_emplace(parsed->payload, frame.timestamp);
                    if (!inserted) {
                        it->second = std::min(it->second, frame.timestamp);
                    }
                }
            }
        }
    }

    switch (question.kind) {
        case QuestionKind::kNeedle: {
            if (!needle_payload) {
                return std::nullopt;
            }
            return label_for_choice_text(question, *needle_payload);
        }
        case QuestionKind::kCount:
            // Covered repetitions only: partial coverage undercounts on purpose.
            return std::to_string(repeat_ids.size());
        case QuestionKind::kOrder: {
            if (marker_first_seen.size() != 2) {
                return std::nullopt;
            }
            auto it = marker_first_seen.begin();
            const auto& [payload_a, time_a] = *it;
            ++it;
            const auto& [payload_b, time_b] = *it;
            const std::string observed =
                time_a < time_b ? fmt::format("{} before {}", payload_a, payload_b)
                                : fmt::format("{} before {}", payload_b, payload_a);
            return label_for_choice_text(question, observed);
        }
    }
    return std::nullopt;
}

namespace {

QuestionKind question_kind_from_name(const std::string& name) {
    if (name == "needle") return QuestionKind::kNeedle;
    if (name == "count") return QuestionKind::kCount;
    if (name == "order") return QuestionKind::kOrder;
    throw std::invalid_argument("unknown question kind: " + name);
}

EventKind event_kind_from_name(const std::string& name) {
    if (name == "needle") return EventKind::kNeedle;
    if (name == "repeat") return EventKind::kRepeat;
    if (name == "marker") return EventKind::kMarker;
    if (name == "distractor") return EventKind::kDistractor;
    throw std::invalid_argument("unknown event kind: " + name);
}

}  // namespace

std::string task_to_json(const Task& task) {
    ordered_json events = ordered_json::array();
    for (const Event& event : task.video.events) {
        events.push_back({{"time", event.time},
                          {"span", event.span},
                          {"kind", std::string(event_kind_name(event.kind))},
                          {"payload", event.payload},
                          {"id", event.id}});
    }
    ordered_json choices = ordered_json::array();
    for (const auto& [label, text] : task.question.choices) {
        choices.push_back(ordered_json::array({label, text}));
    }
    const ordered_json doc = {
        {"task_id", task.task_id},
        {"video",
         {{"duration", task.video.duration},
          {"native_fps", task.video.native_fps},
          {"background_seed", task.video.background_seed},
          {"events", events}}},
        {"question",
         {{"text", task.question.text},
          {"choices", choices},
          {"gold", task.question.gold},
          {"kind", std::string(question_kind_name(task.question.kind))},
          {"min_detect_fps", task.question.min_detect_fps}}},
    };
    return doc.dump();
}

Task task_from_json(const std::string& line) {
    const auto doc = nlohmann::json::parse(line);
    Task task;
    task.task_id = doc.at("task_id").get<std::string>();
    const auto& video = doc.at("video");
    task.video.duration = video.at("duration").get<double>();
    task.video.native_fps = video.at("native_fps").get<double>();
    task.video.background_seed = video.at("background_seed").get<std::uint64_t>();
    for (const auto& event_doc : video.at("events")) {
        Event event;
        event.time = event_doc.at("time").get<double>();
        event.span = event_doc.at("span").get<double>();
        event.kind = event_kind_from_name(event_doc.at("kind").get<std::string>());
        event.payload = event_doc.at("payload").get<std::string>();
        event.id = event_doc.at("id").get<int>();
        task.video.events.push_back(std::move(event));
    }
    const auto& question = doc.at("question");
    task.question.text = question.at("text").get<std::string>();
    for (const auto& choice : question.at("choices")) {
        task.question.choices.emplace_back(choice.at(0).get<std::string>(),
                                           choice.at(1).get<std::string>());
    }
    task.question.gold = question.at("gold").get<std::string>();
    task.question.kind = question_kind_from_name(question.at("kind").get<std::string>());
    task.question.min_detect_fps = question.at("min_detect_fps").get<double>();
    return task;
}

std::vector<Task> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open corpus file: " + path);
    }
    std::vector<Task> tasks;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            tasks.push_back(task_from_json(line));
        }
    }
    return tasks;
}

void save_corpus(const std::vector<Task>& tasks, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open corpus file for writing: " + path);
    }
    for (const Task& task : tasks) {
        out << task_to_json(task) << '\n';
    }
}

}  // namespace zoomrl
