#include <doctest.h>

#include <map>

#include "zoomrl/episode.hpp"
#include "zoomrl/policy.hpp"
#include "zoomrl/reward.hpp"
#include "zoomrl/videoworld.hpp"

using namespace zoomrl;

namespace {

Task make_task(QuestionKind kind, std::uint64_t seed) {
    GenParams params;
    params.kind = kind;
    return generate(params, seed);
}

}  // namespace

TEST_SUITE_BEGIN("policy");

TEST_CASE("fps_for_budget never busts the frame budget") {
    for (double width : {0.5, 1.0, 7.3, 12.8, 120.0, 3600.0}) {
        for (int budget : {1, 4, 16, 64}) {
            const double fps = fps_for_budget(width, budget, 30.0);
            CHECK(fps > 0.0);
            CHECK(fps <= 30.0);
            CHECK(requested_frames({0.0, width, fps}) <= budget);
        }
    }
}

TEST_CASE("scripted oracles are sound across kinds and seeds") {
    // Soundness property: every generated default task is solved exactly.
    const EpisodeConfig config;
    for (const char* name : {"direct_hit", "progressive"}) {
        auto policy = make_scripted_policy(name);
        std::size_t solved = 0;
        std::size_t total = 0;
        for (int kind = 0; kind < 3; ++kind) {
            const int seeds = kind == 0 ? 500 : 250;  // 1000 tasks overall per policy
            for (int seed = 0; seed < seeds; ++seed) {
                const Task task =
                    make_task(static_cast<QuestionKind>(kind),
                              static_cast<std::uint64_t>(kind * 10000 + seed));
                const Trajectory trajectory =
                    run_episode(*policy, task.video, task.question, config, task.task_id);
                ++total;
                solved += static_cast<std::size_t>(
                    accuracy_reward(trajectory, task.question.gold) == 1);
                CHECK(trajectory.terminal_reason == TerminalReason::kAnswered);
            }
        }
        CAPTURE(name);
        CHECK(solved == total);
    }
}

TEST_CASE("self-refine corrects its own deliberate miss") {
    const EpisodeConfig config;
    auto policy = make_self_refine_policy();
    std::size_t with_correction = 0;
    for (int seed = 0; seed < 100; ++seed) {
        const Task task = make_task(QuestionKind::kNeedle, 4000 + static_cast<std::uint64_t>(seed));
        const Trajectory trajectory =
            run_episode(*policy, task.video, task.question, config, task.task_id);
        CHECK(accuracy_reward(trajectory, task.question.gold) == 1);
        if (trajectory.tool_attempts >= 2) {
            ++with_correction;
            // The first (misplaced) call must not have produced the answer.
            const Event* needle = nullptr;
            for (const Event& event : task.video.events) {
                if (event.kind == EventKind::kNeedle) {
                    needle = &event;
                }
            }
            REQUIRE(needle != nullptr);
            const CallRecord& first = trajectory.calls.front();
            const bool overlaps = first.call.t_start < needle->time + needle->span &&
                                  needle->time < first.call.t_end;
            CHECK_FALSE(overlaps);
        }
    }
    // The miss-then-fix pattern dominates; glance hits may shortcut a few.
    CHECK(with_correction >= 90);
}

TEST_CASE("self-refine over-budget variant recovers from the error observation") {
    const EpisodeConfig config;
    auto policy = make_self_refine_policy(MisplaceKind::kOverBudget);
    const Task task = make_task(QuestionKind::kNeedle, 4242);
    const Trajectory trajectory =
        run_episode(*policy, task.video, task.question, config, task.task_id);
    REQUIRE(trajectory.tool_attempts >= 2);
    CHECK(trajectory.calls.front().error == ZoomError::kBudgetExceeded);
    CHECK(accuracy_reward(trajectory, task.question.gold) == 1);
}

TEST_CASE("default scripted policies stay within the per-call budget") {
    const EpisodeConfig config;
    for (const char* name : {"direct_hit", "progressive", "self_refine", "no_tool"}) {
        auto policy = make_scripted_policy(name);
        for (int kind = 0; kind < 3; ++kind) {
            for (int seed = 0; seed < 60; ++seed) {
                const Task task =
                    make_task(static_cast<QuestionKind>(kind),
                              static_cast<std::uint64_t>(7000 + kind * 1000 + seed));
                const Trajectory trajectory =
                    run_episode(*policy, task.video, task.question, config, task.task_id);
                for (const CallRecord& record : trajectory.calls) {
                    CAPTURE(name);
                    CHECK(requested_frames(record.call) <= config.budget.per_call_budget);
                    CHECK_FALSE(record.error.has_value());
                }
            }
        }
    }
}

TEST_CASE("scripted fps choices are frugal") {
    // Smallest fps meeting the detection density: a 2 s needle needs 0.5 fps,
    // so the chosen rate stays in the lowest bin rather than at the cap.
    const EpisodeConfig config;
    auto policy = make_direct_hit_policy();
    for (int seed = 0; seed < 50; ++seed) {
        const Task task = make_task(QuestionKind::kNeedle, 8800 + static_cast<std::uint64_t>(seed));
        const Trajectory trajectory =
            run_episode(*policy, task.video, task.question, config, task.task_id);
        for (const CallRecord& record : trajectory.calls) {
            CHECK(record.call.fps <= 1.0);
            CHECK(record.call.fps >= task.question.min_detect_fps);
        }
    }
}

TEST_CASE("deterministic guess is stable and label-uniform in aggregate") {
    std::map<std::string, int> picks;
    for (int seed = 0; seed < 400; ++seed) {
        const Task task = make_task(QuestionKind::kNeedle, 9000 + static_cast<std::uint64_t>(seed));
        const std::string guess = deterministic_guess(task.question);
        CHECK(guess == deterministic_guess(task.question));
        bool valid = false;
        for (const auto& [label, text] : task.question.choices) {
            valid = valid || label == guess;
        }
        CHECK(valid);
        ++picks[guess];
    }
    // Roughly uniform across the four labels (3-sigma band around 100).
    for (const auto& [label, count] : picks) {
        CAPTURE(label);
        CHECK(count > 100 - 3 * 9);
        CHECK(count < 100 + 3 * 9);
    }
    CHECK(picks.size() == 4);
}

TEST_CASE("scripted policies require oracle access") {
    auto policy = make_direct_hit_policy();
    PolicyContext ctx;  // no question, no video
    CHECK_THROWS_AS(policy->act(ctx), PolicyFailure);
}

TEST_SUITE_END();
