#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "zoomrl/grpo.hpp"
#include "zoomrl/rng.hpp"

using namespace zoomrl;
using namespace zoomrl::grpo;

namespace {

TokenizedRollout make_rollout(Rng& rng, std::size_t tokens, double reward) {
    TokenizedRollout rollout;
    rollout.reward = reward;
    for (std::size_t t = 0; t < tokens; ++t) {
        const double logp_old = rng.uniform(-5.0, -0.1);
        rollout.logp_old.push_back(logp_old);
        rollout.logp_new.push_back(logp_old + rng.uniform(-0.4, 0.4));
        rollout.logp_ref.push_back(logp_old + rng.uniform(-0.2, 0.2));
        rollout.mask.push_back(rng.next_double() < 0.6 ? 1 : 0);
    }
    // Guarantee at least one trainable token.
    rollout.mask[rng.next_index(tokens)] = 1;
    return rollout;
}

RolloutGroup make_group(Rng& rng, std::size_t n, std::size_t tokens) {
    RolloutGroup group;
    group.prompt_id = "g" + std::to_string(rng.next_index(100000));
    for (std::size_t i = 0; i < n; ++i) {
        group.rollouts.push_back(make_rollout(rng, tokens, rng.next_double() < 0.5 ? 0.1 : 1.5));
    }
    bool constant = true;
    for (const auto& rollout : group.rollouts) {
        constant = constant && rollout.reward == group.rollouts.front().reward;
    }
    if (constant) {
        group.rollouts.front().reward += 1.0;  // keep the group non-degenerate
    }
    fill_advantages(group);
    return group;
}

}  // namespace

TEST_SUITE_BEGIN("grpo");

TEST_CASE("group advantages on the worked examples") {
    const auto simple = group_advantages({1.0, 0.0, 1.0, 0.0});
    CHECK_FALSE(simple.degenerate);
    REQUIRE(simple.advantages.size() == 4);
    CHECK(simple.advantages[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(simple.advantages[1] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(simple.advantages[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(simple.advantages[3] == doctest::Approx(-1.0).epsilon(1e-12));

    const auto constant = group_advantages({1.5, 1.5, 1.5, 1.5});
    CHECK(constant.degenerate);
    for (double a : constant.advantages) {
        CHECK(a == 0.0);
    }

    // Independent arithmetic route, written as a plain two-pass loop.
    const std::vector<double> rewards = {1.5, 0.1, 0.9, 0.1};
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= 4.0;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= 4.0;
    const double stddev = std::sqrt(var);
    const auto computed = group_advantages(rewards);
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        CHECK(std::abs(computed.advantages[i] - (rewards[i] - mean) / stddev) < 1e-12);
    }

    CHECK_THROWS_AS(group_advantages({1.0}), std::invalid_argument);
}

TEST_CASE("advantage normalization, shift and scale invariance") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.next_index(15);
        std::vector<double> rewards;
        for (std::size_t i = 0; i < n; ++i) {
            rewards.push_back(rng.uniform(-2.0, 2.0));
        }
        const auto result = group_advantages(rewards);
        if (result.degenerate) {
            continue;
        }
        double mean = 0.0;
        double sq = 0.0;
        for (double a : result.advantages) mean += a;
        mean /= static_cast<double>(n);
        for (double a : result.advantages) sq += (a - mean) * (a - mean);
        const double stddev = std::sqrt(sq / static_cast<double>(n));
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(stddev - 1.0) < 1e-9);

        std::vector<double> shifted = rewards;
        std::vector<double> scaled = rewards;
        const double shift = rng.uniform(-10.0, 10.0);
        const double scale = rng.uniform(0.1, 10.0);
        for (std::size_t i = 0; i < n; ++i) {
            shifted[i] += shift;
            scaled[i] *= scale;
        }
        const auto shifted_result = group_advantages(shifted);
        const auto scaled_result = group_advantages(scaled);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(shifted_result.advantages[i] - result.advantages[i]) < 1e-7);
            CHECK(std::abs(scaled_result.advantages[i] - result.advantages[i]) < 1e-7);
        }
    }
}

TEST_CASE("sample-std convention is a config switch") {
    const std::vector<double> rewards = {1.0, 0.0};
    const auto population = group_advantages(rewards, StdConvention::kPopulation);
    const auto sample = group_advantages(rewards, StdConvention::kSample);
    CHECK(population.advantages[0] == doctest::Approx(1.0));
    CHECK(sample.advantages[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("dynamic sampling drops degenerate groups") {
    Rng rng(11);
    std::vector<RolloutGroup> groups;
    groups.push_back(make_group(rng, 4, 8));
    RolloutGroup degenerate;
    degenerate.prompt_id = "flat";
    for (int i = 0; i < 4; ++i) {
        degenerate.rollouts.push_back(make_rollout(rng, 8, 1.5));
    }
    fill_advantages(degenerate);
    REQUIRE(degenerate.degenerate);
    groups.push_back(degenerate);
    groups.push_back(make_group(rng, 4, 8));

    FilterReport report;
    const auto kept = dynamic_sample_filter(std::move(groups), &report);
    CHECK(kept.size() == 2);
    CHECK(report.kept == 2);
    CHECK(report.dropped == 1);

    std::vector<RolloutGroup> all_flat;
    all_flat.push_back(degenerate);
    const auto empty = dynamic_sample_filter(std::move(all_flat));
    CHECK(empty.empty());
    CHECK_THROWS_AS(objective(empty, ObjectiveConfig{}), std::invalid_argument);
}

TEST_CASE("masked surrogate on the worked examples") {
    ObjectiveConfig config;

    TokenizedRollout identity;
    for (int t = 0; t < 5; ++t) {
        identity.logp_new.push_back(-1.0);
        identity.logp_old.push_back(-1.0);
        identity.logp_ref.push_back(-1.0);
        identity.mask.push_back(1);
    }
    const auto at_one = masked_surrogate(identity, 1.0, config);
    CHECK(at_one.loss == doctest::Approx(-1.0).epsilon(1e-12));
    for (double term : at_one.per_token) {
        CHECK(term == doctest::Approx(-1.0).epsilon(1e-12));
    }

    TokenizedRollout doubled = identity;
    for (auto& lp : doubled.logp_new) {
        lp += std::log(2.0);  // rho = 2 everywhere
    }
    const auto clipped = masked_surrogate(doubled, 1.0, config);
    CHECK(clipped.loss == doctest::Approx(-1.27).epsilon(1e-12));

    TokenizedRollout all_masked_off = identity;
    std::fill(all_masked_off.mask.begin(), all_masked_off.mask.end(), 0);
    CHECK_THROWS_AS(masked_surrogate(all_masked_off, 1.0, config), std::invalid_argument);

    TokenizedRollout inconsistent = identity;
    inconsistent.mask.pop_back();
    CHECK_THROWS_AS(masked_surrogate(inconsistent, 1.0, config), std::invalid_argument);
}

TEST_CASE("masked-out tokens have exactly zero influence") {
    Rng rng(2222);
    ObjectiveConfig config;
    for (int trial = 0; trial < 50; ++trial) {
        TokenizedRollout rollout = make_rollout(rng, 24, 1.0);
        const double advantage = rng.uniform(-2.0, 2.0);
        const auto base = masked_surrogate(rollout, advantage, config);
        const double base_kl = kl_term(rollout);

        TokenizedRollout perturbed = rollout;
        bool any = false;
        for (std::size_t t = 0; t < perturbed.token_count(); ++t) {
            if (perturbed.mask[t] == 0) {
                perturbed.logp_new[t] += rng.uniform(-3.0, 3.0);
                any = true;
            }
        }
        if (!any) {
            continue;
        }
        const auto shifted = masked_surrogate(perturbed, advantage, config);
        CHECK(shifted.loss == base.loss);  // bitwise
        CHECK(shifted.per_token == base.per_token);
        CHECK(kl_term(perturbed) == base_kl);
        for (std::size_t t = 0; t < rollout.token_count(); ++t) {
            if (rollout.mask[t] == 0) {
                CHECK(base.per_token[t] == 0.0);
            }
        }
    }
}

TEST_CASE("clip bounds hold for both advantage signs") {
    Rng rng(3333);
    ObjectiveConfig config;
    for (int trial = 0; trial < 100; ++trial) {
        TokenizedRollout rollout = make_rollout(rng, 16, 1.0);
        const double advantage = trial % 2 == 0 ? rng.uniform(0.05, 2.0) : rng.uniform(-2.0, -0.05);
        const auto result = masked_surrogate(rollout, advantage, config);
        for (std::size_t t = 0; t < rollout.token_count(); ++t) {
            if (rollout.mask[t] == 0) {
                continue;
            }
            const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
            const double term = result.per_token[t];
            if (advantage > 0.0) {
                CHECK(term >= -(1.0 + config.clip_high) * advantage - 1e-12);
                CHECK(term <= 1e-12);
            } else {
                CHECK(term >= -1e-12);
                if (rho < 1.0 - config.clip_low - 1e-9) {
                    CHECK(term ==
                          doctest::Approx(-(1.0 - config.clip_low) * advantage).epsilon(1e-9));
                }
            }
            if (std::abs(rho - 1.0) < 1e-12) {
                CHECK(term == doctest::Approx(-advantage).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("kl estimator on the worked examples") {
    TokenizedRollout rollout;
    for (int t = 0; t < 6; ++t) {
        rollout.logp_new.push_back(-2.0);
        rollout.logp_old.push_back(-2.0);
        rollout.logp_ref.push_back(-2.0);
        rollout.mask.push_back(1);
    }
    CHECK(kl_term(rollout) == doctest::Approx(0.0).epsilon(1e-15));

    for (auto& lp : rollout.logp_ref) {
        lp = -1.9;  // logp_ref - logp_new = 0.1 on every token
    }
    CHECK(kl_term(rollout) == doctest::Approx(0.005170918075647624).epsilon(1e-12));
    CHECK(kl_term(rollout) >= 0.0);

    std::fill(rollout.mask.begin(), rollout.mask.end(), 0);
    CHECK_THROWS_AS(kl_term(rollout), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(4444);
    ObjectiveConfig config;
    const double h = 1e-6;
    for (int trial = 0; trial < 40; ++trial) {
        const TokenizedRollout rollout = make_rollout(rng, 12, 1.0);
        double advantage = rng.uniform(-2.0, 2.0);
        if (std::abs(advantage) < 0.05) {
            advantage = 0.5;
        }
        const auto grad = surrogate_grad(rollout, advantage, config);
        const auto kl_gradient = kl_grad(rollout);
        for (std::size_t t = 0; t < rollout.token_count(); ++t) {
            if (rollout.mask[t] == 0) {
                CHECK(grad[t] == 0.0);
                CHECK(kl_gradient[t] == 0.0);
                continue;
            }
            const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
            if (std::abs(rho - (1.0 - config.clip_low)) < 1e-3 ||
                std::abs(rho - (1.0 + config.clip_high)) < 1e-3) {
                continue;  // no classical derivative at the clip kinks
            }
            TokenizedRollout plus = rollout;
            TokenizedRollout minus = rollout;
            plus.logp_new[t] += h;
            minus.logp_new[t] -= h;
            const double numeric = (masked_surrogate(plus, advantage, config).loss -
                                    masked_surrogate(minus, advantage, config).loss) /
                                   (2.0 * h);
            const double scale = std::max({std::abs(numeric), std::abs(grad[t]), 1e-8});
            CHECK(std::abs(numeric - grad[t]) / scale < 1e-5);

            const double kl_numeric = (kl_term(plus) - kl_term(minus)) / (2.0 * h);
            const double kl_scale =
                std::max({std::abs(kl_numeric), std::abs(kl_gradient[t]), 1e-6});
            CHECK(std::abs(kl_numeric - kl_gradient[t]) / kl_scale < 1e-4);
        }
    }
}

TEST_CASE("objective on the worked examples") {
    ObjectiveConfig config;

    // Two rollouts, rho = 1, rewards {1, 0}, equal token counts: the +1/-1
    // advantages cancel exactly under token-mean aggregation.
    RolloutGroup group;
    group.prompt_id = "canceling";
    for (double reward : {1.0, 0.0}) {
        TokenizedRollout rollout;
        rollout.reward = reward;
        for (int t = 0; t < 8; ++t) {
            rollout.logp_new.push_back(-1.5);
            rollout.logp_old.push_back(-1.5);
            rollout.logp_ref.push_back(-1.5);
            rollout.mask.push_back(1);
        }
        group.rollouts.push_back(std::move(rollout));
    }
    fill_advantages(group);
    const auto report = objective({group}, config);
    CHECK(report.policy_loss == 0.0);
    CHECK(report.kl == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(report.tokens_trained == 16);
    CHECK(report.groups_kept == 1);

    ObjectiveConfig plain;
    plain.kl_coef = 0.0;
    plain.entropy_coef = 0.0;
    const auto no_reg = objective({group}, plain);
    CHECK(no_reg.total == no_reg.policy_loss);

    // Doubling a masked-out stretch changes nothing.
    Rng rng(5555);
    RolloutGroup padded = make_group(rng, 4, 20);
    const auto before = objective({padded}, config);
    for (auto& rollout : padded.rollouts) {
        for (int extra = 0; extra < 10; ++extra) {
            rollout.logp_new.push_back(rng.uniform(-4.0, -0.5));
            rollout.logp_old.push_back(rng.uniform(-4.0, -0.5));
            rollout.logp_ref.push_back(rng.uniform(-4.0, -0.5));
            rollout.mask.push_back(0);
        }
    }
    const auto after = objective({padded}, config);
    CHECK(before.policy_loss == after.policy_loss);
    CHECK(before.kl == after.kl);
    CHECK(before.tokens_trained == after.tokens_trained);
}

TEST_CASE("entropy proxy is consumed when supplied and zero otherwise") {
    Rng rng(6666);
    RolloutGroup group = make_group(rng, 4, 10);
    ObjectiveConfig config;
    const auto without = objective({group}, config);
    CHECK(without.entropy_proxy == 0.0);

    for (auto& rollout : group.rollouts) {
        rollout.entropy.assign(rollout.token_count(), 2.0);
    }
    const auto with = objective({group}, config);
    CHECK(with.entropy_proxy == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(with.total == doctest::Approx(with.policy_loss + config.kl_coef * with.kl -
                                        config.entropy_coef * 2.0)
                            .epsilon(1e-12));
}

TEST_CASE("rollout-group JSONL round-trips and invariants check clean") {
    Rng rng(7777);
    std::vector<RolloutGroup> groups;
    for (int g = 0; g < 5; ++g) {
        groups.push_back(make_group(rng, 4, 12));
    }
    const auto path = std::filesystem::temp_directory_path() / "zoomrl_groups_test.jsonl";
    save_rollout_groups(groups, path.string());
    const auto loaded = load_rollout_groups(path.string());
    REQUIRE(loaded.size() == groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        CHECK(loaded[g].prompt_id == groups[g].prompt_id);
        CHECK(loaded[g].rollouts.size() == groups[g].rollouts.size());
        CHECK(loaded[g].rollouts[0].logp_new == groups[g].rollouts[0].logp_new);
    }

    const auto report = check_invariants(loaded, ObjectiveConfig{});
    CHECK(report.ok());
    CHECK(report.groups_checked == 5);

    // Corrupt a mask and expect a violation naming the rollout.
    auto corrupted = loaded;
    corrupted[2].rollouts[1].mask.pop_back();
    const auto bad = check_invariants(corrupted, ObjectiveConfig{});
    REQUIRE_FALSE(bad.ok());
    bool named = false;
    for (const auto& violation : bad.violations) {
        named = named || (violation.find(corrupted[2].prompt_id) != std::string::npos &&
                          violation.find("rollout 1") != std::string::npos);
    }
    CHECK(named);
    std::filesystem::remove(path);
}

TEST_SUITE_END();
