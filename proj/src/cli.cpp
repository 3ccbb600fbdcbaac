#include "zoomrl/cli.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "zoomrl/curation.hpp"
#include "zoomrl/episode.hpp"
#include "zoomrl/grpo.hpp"
#include "zoomrl/policy.hpp"
#include "zoomrl/reward.hpp"
#include "zoomrl/rng.hpp"
#include "zoomrl/videoworld.hpp"

namespace zoomrl {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t worker_count = std::min(static_cast<std::size_t>(jobs), count);
    workers.reserve(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (std::thread& worker : workers) {
        worker.join();
    }
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

// Every command echoes its resolved configuration next to its outputs.
void write_effective_config(const fs::path& path, const ordered_json& config) {
    write_text(path, config.dump(2) + "\n");
}

struct BudgetOptions {
    int glance_frames = 64;
    int per_call_budget = 16;
    int max_tool_calls = 4;
    int max_turns = 5;
    std::string on_malformed = "error";

    void attach(CLI::App* cmd) {
        cmd->add_option("--glance-frames", glance_frames, "Frames in the initial glance");
        cmd->add_option("--per-call-budget", per_call_budget, "Max frames per tool call (B)");
        cmd->add_option("--max-tool-calls", max_tool_calls, "Max tool calls per episode (N)");
        cmd->add_option("--max-turns", max_turns, "Max policy turns per episode");
        cmd->add_option("--on-malformed", on_malformed,
                        "Malformed-turn handling: error | terminate")
            ->check(CLI::IsMember({"error", "terminate"}));
    }

    EpisodeConfig episode_config() const {
        EpisodeConfig config;
        config.budget.glance_frames = glance_frames;
        config.budget.per_call_budget = per_call_budget;
        config.budget.max_tool_calls = max_tool_calls;
        config.max_turns = max_turns;
        config.on_malformed = on_malformed == "terminate" ? MalformedPolicy::kTerminate
                                                          : MalformedPolicy::kErrorObservation;
        return config;
    }

    ordered_json to_json() const {
        return {{"glance_frames", glance_frames},
                {"per_call_budget", per_call_budget},
                {"max_tool_calls", max_tool_calls},
                {"max_turns", max_turns},
                {"on_malformed", on_malformed}};
    }
};

struct RemoteOptions {
    std::string endpoint;
    std::string model = "default";
    double temperature = 0.0;
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_ms = 30000;
    int max_retries = 2;
    int max_in_flight = 4;

    void attach(CLI::App* cmd) {
        cmd->add_option("--endpoint", endpoint,
                        "Chat-completions base URL (e.g. http://host:8000/v1)");
        cmd->add_option("--model", model, "Remote model name");
        cmd->add_option("--temperature", temperature, "Sampling temperature");
        cmd->add_option("--api-key-env", api_key_env, "Environment variable holding the API key");
        cmd->add_option("--timeout-ms", timeout_ms, "Per-request timeout");
        cmd->add_option("--max-retries", max_retries, "Transient-failure retries");
        cmd->add_option("--max-inflight", max_in_flight, "Concurrent request cap");
    }

    RemoteConfig remote_config() const {
        RemoteConfig config;
        config.endpoint = endpoint;
        config.model = model;
        config.temperature = temperature;
        config.api_key_env = api_key_env;
        config.timeout_ms = timeout_ms;
        config.max_retries = max_retries;
        config.max_in_flight = max_in_flight;
        return config;
    }
};

std::unique_ptr<Policy> make_policy(const std::string& name, const RemoteOptions& remote) {
    if (name == "remote") {
        if (remote.endpoint.empty()) {
            throw std::invalid_argument("--endpoint is required for the remote policy");
        }
        return make_remote_policy(remote.remote_config());
    }
    return make_scripted_policy(name);
}

struct RolloutSummary {
    std::size_t tasks = 0;
    double accuracy = 0.0;
    double mean_frames = 0.0;
    double mean_tool_calls = 0.0;
    std::map<std::string, std::size_t> terminal_reasons;
    std::size_t unusable = 0;
};

RolloutSummary run_rollouts(Policy& policy, const std::vector<Task>& tasks,
                            const EpisodeConfig& config, int jobs,
                            std::vector<Trajectory>& trajectories) {
    trajectories.resize(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t i) {
        trajectories[i] =
            run_episode(policy, tasks[i].video, tasks[i].question, config, tasks[i].task_id);
    });

    RolloutSummary summary;
    summary.tasks = tasks.size();
    std::size_t correct = 0;
    double frames = 0.0;
    double calls = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Trajectory& trajectory = trajectories[i];
        correct +=
            static_cast<std::size_t>(accuracy_reward(trajectory, tasks[i].question.gold) == 1);
        frames += trajectory.total_frames;
        calls += trajectory.tool_calls_made;
        ++summary.terminal_reasons[std::string(terminal_reason_name(trajectory.terminal_reason))];
        summary.unusable += static_cast<std::size_t>(!trajectory.usable);
    }
    if (!tasks.empty()) {
        summary.accuracy = static_cast<double>(correct) / static_cast<double>(tasks.size());
        summary.mean_frames = frames / static_cast<double>(tasks.size());
        summary.mean_tool_calls = calls / static_cast<double>(tasks.size());
    }
    return summary;
}

ordered_json summary_to_json(const std::string& policy_name, const RolloutSummary& summary) {
    ordered_json reasons = ordered_json::object();
    for (const auto& [reason, count] : summary.terminal_reasons) {
        reasons[reason] = count;
    }
    return {{"policy", policy_name},
            {"tasks", summary.tasks},
            {"accuracy", summary.accuracy},
            {"mean_total_frames", summary.mean_frames},
            {"mean_tool_calls", summary.mean_tool_calls},
            {"terminal_reasons", reasons},
            {"unusable", summary.unusable}};
}

// ---- gen ----------------------------------------------------------------

struct GenOptions {
    std::string out;
    int count = 100;
    std::uint64_t seed = 1;
    double duration = 3600.0;
    double native_fps = 30.0;
    std::string kind = "needle";  // needle | count | order | mix
    std::string mix = "needle:0.34,count:0.33,order:0.33";
    double needle_span = 2.0;
    double marker_span = 2.0;
    double repeat_span = 1.0;
    int distractors = 8;
    int count_min = 3;
    int count_max = 7;
};

std::vector<std::pair<QuestionKind, double>> parse_mix(const std::string& spec) {
    std::vector<std::pair<QuestionKind, double>> mix;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        std::size_t comma = spec.find(',', pos);
        if (comma == std::string::npos) {
            comma = spec.size();
        }
        const std::string item = spec.substr(pos, comma - pos);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("bad mix item (want kind:weight): " + item);
        }
        const std::string name = item.substr(0, colon);
        const double weight = std::stod(item.substr(colon + 1));
        QuestionKind kind;
        if (name == "needle") {
            kind = QuestionKind::kNeedle;
        } else if (name == "count") {
            kind = QuestionKind::kCount;
        } else if (name == "order") {
            kind = QuestionKind::kOrder;
        } else {
            throw std::invalid_argument("unknown kind in mix: " + name);
        }
        if (weight < 0.0) {
            throw std::invalid_argument("negative weight in mix: " + item);
        }
        mix.emplace_back(kind, weight);
        pos = comma + 1;
    }
    double total = 0.0;
    for (const auto& [kind, weight] : mix) {
        (void)kind;
        total += weight;
    }
    if (mix.empty() || total <= 0.0) {
        throw std::invalid_argument("mix has no positive weights");
    }
    return mix;
}

int cmd_gen(const GenOptions& options) {
    GenParams params;
    params.duration = options.duration;
    params.native_fps = options.native_fps;
    params.n_distractors = options.distractors;
    params.needle_span = options.needle_span;
    params.marker_span = options.marker_span;
    params.repeat_span = options.repeat_span;
    params.count_min = options.count_min;
    params.count_max = options.count_max;

    std::vector<std::pair<QuestionKind, double>> mix;
    if (options.kind == "mix") {
        mix = parse_mix(options.mix);
    } else if (options.kind == "needle") {
        mix = {{QuestionKind::kNeedle, 1.0}};
    } else if (options.kind == "count") {
        mix = {{QuestionKind::kCount, 1.0}};
    } else if (options.kind == "order") {
        mix = {{QuestionKind::kOrder, 1.0}};
    } else {
        throw std::invalid_argument("unknown kind: " + options.kind);
    }
    double mix_total = 0.0;
    for (const auto& [kind, weight] : mix) {
        (void)kind;
        mix_total += weight;
    }

    Rng kind_rng(Rng::mix(options.seed, 0xA11));
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(options.count));
    std::map<std::string, std::size_t> kind_counts;
    for (int i = 0; i < options.count; ++i) {
        double draw = kind_rng.next_double() * mix_total;
        QuestionKind kind = mix.back().first;
        for (const auto& [candidate, weight] : mix) {
            if (draw < weight) {
                kind = candidate;
                break;
            }
            draw -= weight;
        }
        GenParams task_params = params;
        task_params.kind = kind;
        tasks.push_back(generate(task_params, options.seed + static_cast<std::uint64_t>(i)));
        ++kind_counts[std::string(question_kind_name(kind))];
    }
    save_corpus(tasks, options.out);

    const ordered_json config = {{"command", "gen"},
                                 {"out", options.out},
                                 {"count", options.count},
                                 {"seed", options.seed},
                                 {"duration", options.duration},
                                 {"native_fps", options.native_fps},
                                 {"kind", options.kind},
                                 {"mix", options.mix},
                                 {"needle_span", options.needle_span},
                                 {"marker_span", options.marker_span},
                                 {"repeat_span", options.repeat_span},
                                 {"distractors", options.distractors},
                                 {"count_min", options.count_min},
                                 {"count_max", options.count_max}};
    write_effective_config(options.out + ".config.json", config);

    fmt::print("wrote {} tasks to {}\n", tasks.size(), options.out);
    for (const auto& [kind, count] : kind_counts) {
        fmt::print("  {}: {}\n", kind, count);
    }
    return 0;
}

// ---- rollout ------------------------------------------------------------

struct RolloutOptions {
    std::string corpus;
    std::string out_dir;
    std::string policy = "direct_hit";
    int jobs = 1;
    BudgetOptions budget;
    RemoteOptions remote;
};

int cmd_rollout(const RolloutOptions& options) {
    const std::vector<Task> tasks = load_corpus(options.corpus);
    auto policy = make_policy(options.policy, options.remote);
    const EpisodeConfig config = options.budget.episode_config();

    std::vector<Trajectory> trajectories;
    const RolloutSummary summary = run_rollouts(*policy, tasks, config, options.jobs, trajectories);

    fs::create_directories(options.out_dir);
    const fs::path out_dir(options.out_dir);
    save_trajectories(trajectories, (out_dir / "trajectories.jsonl").string());

    std::string csv =
        "task_id,kind,correct,total_frames,tool_calls,tool_attempts,terminal_reason\n";
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Trajectory& trajectory = trajectories[i];
        csv += fmt::format("{},{},{},{},{},{},{}\n", trajectory.task_id,
                           question_kind_name(tasks[i].question.kind),
                           accuracy_reward(trajectory, tasks[i].question.gold),
                           trajectory.total_frames, trajectory.tool_calls_made,
                           trajectory.tool_attempts,
                           terminal_reason_name(trajectory.terminal_reason));
    }
    write_text(out_dir / "per_task.csv", csv);
    write_text(out_dir / "metrics.json", summary_to_json(options.policy, summary).dump(2) + "\n");

    const ordered_json config_echo = {{"command", "rollout"},
                                      {"corpus", options.corpus},
                                      {"out_dir", options.out_dir},
                                      {"policy", options.policy},
                                      {"jobs", options.jobs},
                                      {"budget", options.budget.to_json()}};
    write_effective_config(out_dir / "effective_config.json", config_echo);

    fmt::print("{}: accuracy {:.4f} | mean frames {:.2f} | mean tool calls {:.2f} | {} tasks\n",
               options.policy, summary.accuracy, summary.mean_frames, summary.mean_tool_calls,
               summary.tasks);
    return 0;
}

// ---- sweep --------------------------------------------------------------

struct SweepOptions {
    std::string corpus;
    std::string out_dir;
    std::string policy = "progressive";
    std::vector<int> budgets = {16, 32, 64, 128, 256};
    int jobs = 1;
    BudgetOptions budget;
};

int cmd_sweep(const SweepOptions& options) {
    const std::vector<Task> tasks = load_corpus(options.corpus);
    fs::create_directories(options.out_dir);
    const fs::path out_dir(options.out_dir);

    ordered_json rows = ordered_json::array();
    std::string csv = "policy,frame_budget,mean_frames,accuracy,mean_tool_calls\n";

    auto uniform = make_no_tool_policy();
    for (int frame_budget : options.budgets) {
        EpisodeConfig config = options.budget.episode_config();
        config.budget.glance_frames = frame_budget;
        std::vector<Trajectory> trajectories;
        const RolloutSummary summary =
            run_rollouts(*uniform, tasks, config, options.jobs, trajectories);
        rows.push_back({{"policy", "uniform"},
                        {"frame_budget", frame_budget},
                        {"mean_frames", summary.mean_frames},
                        {"accuracy", summary.accuracy},
                        {"mean_tool_calls", summary.mean_tool_calls}});
        csv += fmt::format("uniform,{},{:.2f},{:.4f},{:.2f}\n", frame_budget, summary.mean_frames,
                           summary.accuracy, summary.mean_tool_calls);
        fmt::print("uniform@{:<4} accuracy {:.4f} mean frames {:.2f}\n", frame_budget,
                   summary.accuracy, summary.mean_frames);
    }

    auto agentic = make_scripted_policy(options.policy);
    {
        const EpisodeConfig config = options.budget.episode_config();
        std::vector<Trajectory> trajectories;
        const RolloutSummary summary =
            run_rollouts(*agentic, tasks, config, options.jobs, trajectories);
        rows.push_back({{"policy", options.policy},
                        {"frame_budget", nullptr},
                        {"mean_frames", summary.mean_frames},
                        {"accuracy", summary.accuracy},
                        {"mean_tool_calls", summary.mean_tool_calls}});
        csv += fmt::format("{},adaptive,{:.2f},{:.4f},{:.2f}\n", options.policy,
                           summary.mean_frames, summary.accuracy, summary.mean_tool_calls);
        fmt::print("{:<12} accuracy {:.4f} mean frames {:.2f} (adaptive)\n", options.policy,
                   summary.accuracy, summary.mean_frames);
    }

    write_text(out_dir / "sweep.csv", csv);
    write_text(out_dir / "sweep.json", rows.dump(2) + "\n");
    const ordered_json config_echo = {{"command", "sweep"},
                                      {"corpus", options.corpus},
                                      {"out_dir", options.out_dir},
                                      {"policy", options.policy},
                                      {"budgets", options.budgets},
                                      {"jobs", options.jobs},
                                      {"budget", options.budget.to_json()}};
    write_effective_config(out_dir / "effective_config.json", config_echo);
    return 0;
}

// ---- score --------------------------------------------------------------

struct ScoreOptions {
    std::string in;
    std::string out;
    double w_acc = 0.9;
    double w_fmt = 0.1;
    double w_tool = 0.5;
};

int cmd_score(const ScoreOptions& options) {
    std::ifstream in(options.in);
    if (!in) {
        throw std::runtime_error("cannot open trajectory file: " + options.in);
    }
    std::ofstream out(options.out);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + options.out);
    }
    RewardWeights weights{options.w_acc, options.w_fmt, options.w_tool};

    std::string line;
    std::size_t count = 0;
    double total = 0.0;
    std::size_t correct = 0;
    std::size_t well_formed = 0;
    std::size_t tool_bonus = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const Trajectory trajectory = trajectory_from_json(line);
        const RewardBreakdown breakdown =
            total_reward(trajectory, trajectory.question.gold, weights);
        ordered_json doc = ordered_json::parse(line);
        doc["reward"] = {{"r_acc", breakdown.r_acc},
                         {"r_fmt", breakdown.r_fmt},
                         {"r_tool", breakdown.r_tool},
                         {"total", breakdown.total},
                         {"weights",
                          {{"w_acc", weights.w_acc},
                           {"w_fmt", weights.w_fmt},
                           {"w_tool", weights.w_tool}}}};
        out << doc.dump() << '\n';
        ++count;
        total += breakdown.total;
        correct += static_cast<std::size_t>(breakdown.r_acc);
        well_formed += static_cast<std::size_t>(breakdown.r_fmt);
        tool_bonus += static_cast<std::size_t>(breakdown.r_tool);
    }
    if (count > 0) {
        fmt::print("scored {} trajectories: mean reward {:.4f} | acc {:.4f} | fmt {:.4f} | tool "
                   "{:.4f}\n",
                   count, total / static_cast<double>(count),
                   static_cast<double>(correct) / static_cast<double>(count),
                   static_cast<double>(well_formed) / static_cast<double>(count),
                   static_cast<double>(tool_bonus) / static_cast<double>(count));
    } else {
        fmt::print("scored 0 trajectories\n");
    }
    return 0;
}

// ---- fps-report ----------------------------------------------------------

struct FpsReportOptions {
    std::string in;
    std::string out;
};

int cmd_fps_report(const FpsReportOptions& options) {
    const std::vector<Trajectory> trajectories = load_trajectories(options.in);
    struct Bin {
        std::string label;
        double low;
        double high;
    };
    const std::vector<Bin> bins = {
        {"(0, 1]", 0.0, 1.0}, {"(1, 2]", 1.0, 2.0},       {"(2, 4]", 2.0, 4.0},
        {"(4, 8]", 4.0, 8.0}, {"(8, inf)", 8.0, 1.0e300},
    };
    std::vector<std::size_t> counts(bins.size(), 0);
    std::size_t total = 0;
    for (const Trajectory& trajectory : trajectories) {
        for (const CallRecord& record : trajectory.calls) {
            for (std::size_t b = 0; b < bins.size(); ++b) {
                if (record.call.fps > bins[b].low && record.call.fps <= bins[b].high) {
                    ++counts[b];
                    ++total;
                    break;
                }
            }
        }
    }

    ordered_json report = ordered_json::array();
    if (total == 0) {
        fmt::print("no tool calls in {}\n", options.in);
    } else {
        fmt::print("{:<10} {:>8} {:>9}\n", "fps range", "calls", "percent");
        for (std::size_t b = 0; b < bins.size(); ++b) {
            const double pct = 100.0 * static_cast<double>(counts[b]) / static_cast<double>(total);
            fmt::print("{:<10} {:>8} {:>8.1f}%\n", bins[b].label, counts[b], pct);
            report.push_back({{"range", bins[b].label}, {"calls", counts[b]}, {"percent", pct}});
        }
    }
    if (!options.out.empty()) {
        write_text(options.out, report.dump(2) + "\n");
    }
    return 0;
}

// ---- grpo-check ----------------------------------------------------------

struct GrpoCheckOptions {
    std::string in;
    double clip_low = 0.2;
    double clip_high = 0.27;
    std::string std_convention = "population";
};

int cmd_grpo_check(const GrpoCheckOptions& options) {
    const auto groups = grpo::load_rollout_groups(options.in);
    grpo::ObjectiveConfig config;
    config.clip_low = options.clip_low;
    config.clip_high = options.clip_high;
    config.std_convention = options.std_convention == "sample"
                                ? grpo::StdConvention::kSample
                                : grpo::StdConvention::kPopulation;
    const grpo::CheckReport report = grpo::check_invariants(groups, config);
    fmt::print("checked {} groups ({} degenerate)\n", report.groups_checked,
               report.degenerate_groups);
    for (const std::string& violation : report.violations) {
        fmt::print("VIOLATION: {}\n", violation);
    }
    if (!report.ok()) {
        fmt::print("FAIL: {} violations\n", report.violations.size());
        return 1;
    }
    fmt::print("OK\n");
    return 0;
}

// ---- curate ---------------------------------------------------------------

struct CurateExemplarOptions {
    std::string corpus;
    std::string out_dir;
    std::string expert = "direct_hit";
    BudgetOptions budget;
    RemoteOptions remote;
};

ordered_json verdict_counts(const std::vector<CurationRecord>& records) {
    std::map<std::string, std::size_t> counts;
    for (const CurationRecord& record : records) {
        if (record.kept) {
            ++counts["KEPT"];
        } else {
            ++counts[std::string(drop_reason_name(*record.drop_reason))];
        }
    }
    ordered_json doc = ordered_json::object();
    for (const auto& [verdict, count] : counts) {
        doc[verdict] = count;
    }
    return doc;
}

int cmd_curate_exemplar(const CurateExemplarOptions& options) {
    const std::vector<Task> tasks = load_corpus(options.corpus);
    auto expert = make_policy(options.expert, options.remote);
    CurationConfig config;
    config.episode = options.budget.episode_config();

    const std::vector<CurationRecord> records = distill_exemplars(*expert, tasks, config);
    fs::create_directories(options.out_dir);
    const fs::path out_dir(options.out_dir);
    save_records(records, (out_dir / "records.jsonl").string());

    const ordered_json config_echo = {{"command", "curate exemplar"},
                                      {"corpus", options.corpus},
                                      {"out_dir", options.out_dir},
                                      {"expert", options.expert},
                                      {"budget", options.budget.to_json()}};
    write_effective_config(out_dir / "effective_config.json", config_echo);

    fmt::print("exemplar records: {}\n", verdict_counts(records).dump());
    return 0;
}

struct CurateReflectOptions {
    std::string corpus;
    std::string out_dir;
    std::string student = "no_tool";
    std::string expert = "direct_hit";
    int retries = 1;
    BudgetOptions budget;
    RemoteOptions remote;
};

int cmd_curate_reflect(const CurateReflectOptions& options) {
    const std::vector<Task> tasks = load_corpus(options.corpus);
    auto student = make_policy(options.student, options.remote);
    auto expert = make_policy(options.expert, options.remote);
    CurationConfig config;
    config.episode = options.budget.episode_config();
    config.reflect_retries = options.retries;

    const auto failures = mine_failures(*student, tasks, config);
    std::vector<CurationRecord> records;
    records.reserve(failures.size());
    for (const auto& [task_index, failed] : failures) {
        records.push_back(reflect(*expert, tasks[task_index], failed, config));
    }
    fs::create_directories(options.out_dir);
    const fs::path out_dir(options.out_dir);
    save_records(records, (out_dir / "records.jsonl").string());

    const ordered_json config_echo = {{"command", "curate reflect"},
                                      {"corpus", options.corpus},
                                      {"out_dir", options.out_dir},
                                      {"student", options.student},
                                      {"expert", options.expert},
                                      {"retries", options.retries},
                                      {"budget", options.budget.to_json()}};
    write_effective_config(out_dir / "effective_config.json", config_echo);

    fmt::print("mined {} failures from {} tasks\n", failures.size(), tasks.size());
    fmt::print("reflection records: {}\n", verdict_counts(records).dump());
    return 0;
}

struct CurateExportOptions {
    std::vector<std::string> records;
    std::string out;
    std::string stats;
    double mix_ratio = 3.0;
    int per_call_budget = 16;
};

int cmd_curate_export(const CurateExportOptions& options) {
    std::vector<CurationRecord> records;
    for (const std::string& path : options.records) {
        for (CurationRecord& record : load_records(path)) {
            records.push_back(std::move(record));
        }
    }
    CurationConfig config;
    config.episode.budget.per_call_budget = options.per_call_budget;
    config.mix_ratio = options.mix_ratio;
    const std::string stats_path =
        options.stats.empty() ? options.out + ".stats.json" : options.stats;
    const CorpusStats stats = export_sft(records, options.out, stats_path, config);
    fmt::print("exported {} records to {} (stats in {})\n", stats.records, options.out,
               stats_path);
    for (const auto& [origin, count] : stats.origin_counts) {
        fmt::print("  {}: {}\n", origin, count);
    }
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
    CLI::App app{"Glance-then-zoom agentic video QA: synthetic environment, scripted and remote "
                 "policies, reward scoring, GRPO math checks, and the cold-start data pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read option defaults from a TOML/INI file");

    GenOptions gen_options;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic task corpus");
    gen->add_option("--out", gen_options.out, "Output corpus JSONL path")->required();
    gen->add_option("--count", gen_options.count, "Number of tasks");
    gen->add_option("--seed", gen_options.seed, "Base seed");
    gen->add_option("--duration", gen_options.duration, "Video duration, seconds");
    gen->add_option("--native-fps", gen_options.native_fps, "Native frame rate cap");
    gen->add_option("--kind", gen_options.kind, "Task kind: needle | count | order | mix")
        ->check(CLI::IsMember({"needle", "count", "order", "mix"}));
    gen->add_option("--mix", gen_options.mix, "Kind mix, e.g. needle:0.5,count:0.3,order:0.2");
    gen->add_option("--needle-span", gen_options.needle_span, "Needle event span, seconds");
    gen->add_option("--marker-span", gen_options.marker_span, "Order marker span, seconds");
    gen->add_option("--repeat-span", gen_options.repeat_span, "Repetition span, seconds");
    gen->add_option("--distractors", gen_options.distractors, "Distractor events per video");
    gen->add_option("--count-min", gen_options.count_min, "Min repetitions for count tasks");
    gen->add_option("--count-max", gen_options.count_max, "Max repetitions for count tasks");

    RolloutOptions rollout_options;
    auto* rollout = app.add_subcommand("rollout", "Run a policy over a corpus");
    rollout->add_option("--corpus", rollout_options.corpus, "Task corpus JSONL")->required();
    rollout->add_option("--out-dir", rollout_options.out_dir, "Output directory")->required();
    rollout->add_option("--policy", rollout_options.policy,
                        "direct_hit | progressive | self_refine | no_tool | always_zoom | remote");
    rollout->add_option("--jobs", rollout_options.jobs, "Parallel episode workers");
    rollout_options.budget.attach(rollout);
    rollout_options.remote.attach(rollout);

    SweepOptions sweep_options;
    auto* sweep = app.add_subcommand("sweep", "Accuracy-vs-frames tradeoff table");
    sweep->add_option("--corpus", sweep_options.corpus, "Task corpus JSONL")->required();
    sweep->add_option("--out-dir", sweep_options.out_dir, "Output directory")->required();
    sweep->add_option("--policy", sweep_options.policy, "Agentic policy to compare");
    sweep->add_option("--budgets", sweep_options.budgets, "Uniform frame budgets");
    sweep->add_option("--jobs", sweep_options.jobs, "Parallel episode workers");
    sweep_options.budget.attach(sweep);

    ScoreOptions score_options;
    auto* score = app.add_subcommand("score", "Attach reward breakdowns to trajectories");
    score->add_option("--in", score_options.in, "Trajectories JSONL")->required();
    score->add_option("--out", score_options.out, "Scored trajectories JSONL")->required();
    score->add_option("--w-acc", score_options.w_acc, "Accuracy weight");
    score->add_option("--w-fmt", score_options.w_fmt, "Format weight");
    score->add_option("--w-tool", score_options.w_tool, "Tool bonus weight");

    FpsReportOptions fps_options;
    auto* fps = app.add_subcommand("fps-report", "Distribution of chosen zoom fps values");
    fps->add_option("--in", fps_options.in, "Trajectories JSONL")->required();
    fps->add_option("--out", fps_options.out, "Optional JSON report path");

    GrpoCheckOptions grpo_options;
    auto* grpo_check = app.add_subcommand("grpo-check", "Verify GRPO invariants on a batch file");
    grpo_check->add_option("--in", grpo_options.in, "Rollout-group JSONL")->required();
    grpo_check->add_option("--clip-low", grpo_options.clip_low, "Lower clip epsilon");
    grpo_check->add_option("--clip-high", grpo_options.clip_high, "Upper clip epsilon");
    grpo_check->add_option("--std", grpo_options.std_convention, "population | sample")
        ->check(CLI::IsMember({"population", "sample"}));

    auto* curate = app.add_subcommand("curate", "Cold-start data pipeline");
    curate->require_subcommand(1);

    CurateExemplarOptions exemplar_options;
    auto* exemplar = curate->add_subcommand("exemplar", "Distill verified expert trajectories");
    exemplar->add_option("--corpus", exemplar_options.corpus, "Task corpus JSONL")->required();
    exemplar->add_option("--out-dir", exemplar_options.out_dir, "Output directory")->required();
    exemplar->add_option("--expert", exemplar_options.expert, "Expert policy");
    exemplar_options.budget.attach(exemplar);
    exemplar_options.remote.attach(exemplar);

    CurateReflectOptions reflect_options;
    auto* reflect_cmd = curate->add_subcommand("reflect", "Correct mined student failures");
    reflect_cmd->add_option("--corpus", reflect_options.corpus, "Task corpus JSONL")->required();
    reflect_cmd->add_option("--out-dir", reflect_options.out_dir, "Output directory")->required();
    reflect_cmd->add_option("--student", reflect_options.student, "Student policy to mine");
    reflect_cmd->add_option("--expert", reflect_options.expert, "Expert policy for corrections");
    reflect_cmd->add_option("--retries", reflect_options.retries, "Correction retries");
    reflect_options.budget.attach(reflect_cmd);
    reflect_options.remote.attach(reflect_cmd);

    CurateExportOptions export_options;
    auto* export_cmd = curate->add_subcommand("export", "Export KEPT records as SFT JSONL");
    export_cmd->add_option("--records", export_options.records, "Record JSONL files")->required();
    export_cmd->add_option("--out", export_options.out, "SFT corpus output path")->required();
    export_cmd->add_option("--stats", export_options.stats, "Stats JSON path");
    export_cmd->add_option("--mix-ratio", export_options.mix_ratio,
                           "Max exemplar:reflection ratio");
    export_cmd->add_option("--per-call-budget", export_options.per_call_budget,
                           "Budget named in the exported system prompt");

    std::vector<const char*> argv;
    argv.push_back("zoomrl");
    for (const std::string& arg : args) {
        argv.push_back(arg.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(gen_options);
        if (rollout->parsed()) return cmd_rollout(rollout_options);
        if (sweep->parsed()) return cmd_sweep(sweep_options);
        if (score->parsed()) return cmd_score(score_options);
        if (fps->parsed()) return cmd_fps_report(fps_options);
        if (grpo_check->parsed()) return cmd_grpo_check(grpo_options);
        if (curate->parsed()) {
            if (exemplar->parsed()) return cmd_curate_exemplar(exemplar_options);
            if (reflect_cmd->parsed()) return cmd_curate_reflect(reflect_options);
            if (export_cmd->parsed()) return cmd_curate_export(export_options);
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 2;
}

}  // namespace zoomrl
