#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "zoomrl/episode.hpp"
#include "zoomrl/policy.hpp"
#include "zoomrl/videoworld.hpp"

using namespace zoomrl;

namespace {

// Serves canned assistant replies in order, OpenAI chat-completions shaped.
class MockEndpoint {
public:
    explicit MockEndpoint(std::vector<std::string> replies) : replies_(std::move(replies)) {
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         const int n = request_count_.fetch_add(1);
                         {
                             std::lock_guard lock(body_mutex_);
                             last_body_ = req.body;
                         }
                         if (fail_first_ && n == 0) {
                             res.status = 500;
                             res.set_content("{\"error\": \"transient\"}", "application/json");
                             return;
                         }
                         if (always_status_ != 200) {
                             res.status = always_status_;
                             res.set_content("{}", "application/json");
                             return;
                         }
                         const std::size_t index =
                             std::min(reply_cursor_.fetch_add(1), replies_.size() - 1);
                         const nlohmann::json body = {
                             {"choices",
                              {{{"message",
                                 {{"role", "assistant"}, {"content", replies_[index]}}}}}}};
                         res.set_content(body.dump(), "application/json");
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    int requests() const { return request_count_.load(); }
    void set_fail_first(bool fail) { fail_first_ = fail; }
    void set_always_status(int status) { always_status_ = status; }
    std::string last_body() const {
        std::lock_guard lock(body_mutex_);
        return last_body_;
    }

private:
    std::vector<std::string> replies_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> request_count_{0};
    std::atomic<std::size_t> reply_cursor_{0};
    bool fail_first_ = false;
    int always_status_ = 200;
    mutable std::mutex body_mutex_;
    std::string last_body_;
};

RemoteConfig test_config(const MockEndpoint& mock) {
    RemoteConfig config;
    config.endpoint = mock.endpoint();
    config.model = "mock-model";
    config.api_key_env = "ZOOMRL_TEST_KEY";
    config.initial_backoff_ms = 1;
    config.timeout_ms = 5000;
    return config;
}

struct EnvKeyGuard {
    EnvKeyGuard() { setenv("ZOOMRL_TEST_KEY", "test-secret", 1); }
    ~EnvKeyGuard() { unsetenv("ZOOMRL_TEST_KEY"); }
};

Task make_needle_task(std::uint64_t seed) {
    GenParams params;
    params.kind = QuestionKind::kNeedle;
    return generate(params, seed);
}

}  // namespace

TEST_SUITE_BEGIN("remote");

TEST_CASE("remote policy replaying a scripted transcript produces an identical trajectory") {
    const Task task = make_needle_task(21);
    const EpisodeConfig config;

    auto scripted = make_direct_hit_policy();
    const Trajectory golden =
        run_episode(*scripted, task.video, task.question, config, task.task_id);

    std::vector<std::string> transcript;
    for (const Turn& turn : golden.turns) {
        if (turn.role == TurnRole::kPolicy) {
            transcript.push_back(turn.text);
        }
    }
    REQUIRE_FALSE(transcript.empty());

    EnvKeyGuard key;
    MockEndpoint mock(transcript);
    auto remote = make_remote_policy(test_config(mock));
    const Trajectory replayed =
        run_episode(*remote, task.video, task.question, config, task.task_id);

    CHECK(trajectory_to_json(replayed) == trajectory_to_json(golden));
    CHECK(mock.requests() == static_cast<int>(transcript.size()));
}

TEST_CASE("remote policy sends system and observation messages") {
    const Task task = make_needle_task(22);
    EnvKeyGuard key;
    MockEndpoint mock({"<think>done</think><answer>A</answer>"});
    auto remote = make_remote_policy(test_config(mock));
    const Trajectory trajectory =
        run_episode(*remote, task.video, task.question, EpisodeConfig{}, task.task_id);
    CHECK(trajectory.terminal_reason == TerminalReason::kAnswered);

    const auto body = nlohmann::json::parse(mock.last_body());
    CHECK(body.at("model") == "mock-model");
    CHECK(body.at("temperature") == 0.0);
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"].get<std::string>().find("<video_zoom>") !=
          std::string::npos);
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"].get<std::string>().find("Question:") !=
          std::string::npos);
}

TEST_CASE("a transient 500 is retried once and succeeds") {
    const Task task = make_needle_task(23);
    EnvKeyGuard key;
    MockEndpoint mock({"<think>done</think><answer>A</answer>"});
    mock.set_fail_first(true);
    auto remote = make_remote_policy(test_config(mock));
    const Trajectory trajectory =
        run_episode(*remote, task.video, task.question, EpisodeConfig{}, task.task_id);
    CHECK(trajectory.usable);
    CHECK(trajectory.terminal_reason == TerminalReason::kAnswered);
    CHECK(mock.requests() == 2);
}

TEST_CASE("a missing credential fails before any request") {
    const Task task = make_needle_task(24);
    MockEndpoint mock({"<think>done</think><answer>A</answer>"});
    unsetenv("ZOOMRL_TEST_KEY");
    auto remote = make_remote_policy(test_config(mock));

    PolicyContext ctx;
    ctx.question = &task.question;
    ctx.video = &task.video;
    try {
        remote->act(ctx);
        FAIL("expected PolicyFailure");
    } catch (const PolicyFailure& failure) {
        CHECK(failure.kind() == PolicyFailure::Kind::kAuth);
    }
    CHECK(mock.requests() == 0);

    // Surfaced through the episode as an unusable trajectory.
    const Trajectory trajectory =
        run_episode(*remote, task.video, task.question, EpisodeConfig{}, task.task_id);
    CHECK_FALSE(trajectory.usable);
    CHECK(trajectory.terminal_reason == TerminalReason::kPolicyFailure);
}

TEST_CASE("authorization rejections are not retried") {
    const Task task = make_needle_task(25);
    EnvKeyGuard key;
    MockEndpoint mock({"unused"});
    mock.set_always_status(401);
    auto remote = make_remote_policy(test_config(mock));
    PolicyContext ctx;
    ctx.question = &task.question;
    ctx.video = &task.video;
    try {
        remote->act(ctx);
        FAIL("expected PolicyFailure");
    } catch (const PolicyFailure& failure) {
        CHECK(failure.kind() == PolicyFailure::Kind::kAuth);
    }
    CHECK(mock.requests() == 1);
}

TEST_SUITE_END();
