#include "zoomrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

namespace zoomrl::grpo {

namespace {

using ordered_json = nlohmann::ordered_json;

double clamp_ratio(double rho, const ObjectiveConfig& config) {
    return std::clamp(rho, 1.0 - config.clip_low, 1.0 + config.clip_high);
}

std::size_t masked_count(const TokenizedRollout& rollout) {
    return static_cast<std::size_t>(
        std::count(rollout.mask.begin(), rollout.mask.end(), std::uint8_t{1}));
}

void require_consistent(const TokenizedRollout& rollout) {
    if (!rollout.consistent()) {
        throw std::invalid_argument("rollout arrays disagree on token_count");
    }
}

double k3_estimator(double logp_ref, double logp_new) {
    const double delta = logp_ref - logp_new;
    return std::exp(delta) - delta - 1.0;
}

}  // namespace

AdvantageResult group_advantages(const std::vector<double>& rewards, StdConvention convention) {
    if (rewards.size() < 2) {
        throw std::invalid_argument("GROUP_TOO_SMALL: need at least 2 rollouts per group");
    }
    const auto n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) {
        mean += r;
    }
    mean /= n;
    double variance = 0.0;
    for (double r : rewards) {
        variance += (r - mean) * (r - mean);
    }
    variance /= convention == StdConvention::kPopulation ? n : n - 1.0;
    const double stddev = std::sqrt(variance);

    AdvantageResult result;
    result.advantages.resize(rewards.size(), 0.0);
    if (stddev == 0.0) {
        result.degenerate = true;
        return result;
    }
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        result.advantages[i] = (rewards[i] - mean) / stddev;
    }
    return result;
}

void fill_advantages(RolloutGroup& group, StdConvention convention) {
    std::vector<double> rewards;
    rewards.reserve(group.rollouts.size());
    for (const TokenizedRollout& rollout : group.rollouts) {
        rewards.push_back(rollout.reward);
    }
    AdvantageResult result = group_advantages(rewards, convention);
    group.advantages = std::move(result.advantages);
    group.degenerate = result.degenerate;
}

std::vector<RolloutGroup> dynamic_sample_filter(std::vector<RolloutGroup> groups,
                                                FilterReport* report) {
    std::vector<RolloutGroup> kept;
    kept.reserve(groups.size());
    std::size_t dropped = 0;
    for (auto& group : groups) {
        if (group.degenerate) {
            ++dropped;
        } else {
            kept.push_back(std::move(group));
        }
    }
    if (report != nullptr) {
        report->kept = kept.size();
        report->dropped = dropped;
    }
    return kept;
}

SurrogateResult masked_surrogate(const TokenizedRollout& rollout, double advantage,
                                 const ObjectiveConfig& config) {
    require_consistent(rollout);
    const std::size_t trainable = masked_count(rollout);
    if (trainable == 0) {
        throw std::invalid_argument("NO_TRAINABLE_TOKENS: mask is all-false");
    }
    SurrogateResult result;
    result.per_token.resize(rollout.token_count(), 0.0);
    double sum = 0.0;
    for (std::size_t t = 0; t < rollout.token_count(); ++t) {
        if (rollout.mask[t] == 0) {
            continue;
        }
        const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
        const double unclipped = rho * advantage;
        const double clipped = clamp_ratio(rho, config) * advantage;
        const double term = -std::min(unclipped, clipped);
        result.per_token[t] = term;
        sum += term;
    }
    result.loss = sum / static_cast<double>(trainable);
    return result;
}

double kl_term(const TokenizedRollout& rollout) {
    require_consistent(rollout);
    const std::size_t trainable = masked_count(rollout);
    if (trainable == 0) {
        throw std::invalid_argument("NO_TRAINABLE_TOKENS: mask is all-false");
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < rollout.token_count(); ++t) {
        if (rollout.mask[t] != 0) {
            sum += k3_estimator(rollout.logp_ref[t], rollout.logp_new[t]);
        }
    }
    return sum / static_cast<double>(trainable);
}

std::vector<double> surrogate_grad(const TokenizedRollout& rollout, double advantage,
                                   const ObjectiveConfig& config) {
    require_consistent(rollout);
    const std::size_t trainable = masked_count(rollout);
    if (trainable == 0) {
        throw std::invalid_argument("NO_TRAINABLE_TOKENS: mask is all-false");
    }
    std::vector<double> grad(rollout.token_count(), 0.0);
    for (std::size_t t = 0; t < rollout.token_count(); ++t) {
        if (rollout.mask[t] == 0) {
            continue;
        }
        const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
        const double unclipped = rho * advantage;
        const double clipped = clamp_ratio(rho, config) * advantage;
        // min picks the unclipped branch (ties included): d/dx -rho*A = -A*rho.
        // Otherwise the clipped branch is active with rho outside the clamp
        // window, where the clamp is constant and the derivative vanishes.
        grad[t] = unclipped <= clipped ? -advantage * rho / static_cast<double>(trainable) : 0.0;
    }
    return grad;
}

std::vector<double> kl_grad(const TokenizedRollout& rollout) {
    require_consistent(rollout);
    const std::size_t trainable = masked_count(rollout);
    if (trainable == 0) {
        throw std::invalid_argument("NO_TRAINABLE_TOKENS: mask is all-false");
    }
    std::vector<double> grad(rollout.token_count(), 0.0);
    for (std::size_t t = 0; t < rollout.token_count(); ++t) {
        if (rollout.mask[t] != 0) {
            const double delta = rollout.logp_ref[t] - rollout.logp_new[t];
            grad[t] = (1.0 - std::exp(delta)) / static_cast<double>(trainable);
        }
    }
    return grad;
}

ObjectiveReport objective(const std::vector<RolloutGroup>& groups, const ObjectiveConfig& config) {
    if (groups.empty()) {
        throw std::invalid_argument("EMPTY_BATCH: no rollout groups after filtering");
    }
    ObjectiveReport report;
    report.groups_kept = groups.size();
    double loss_sum = 0.0;
    double kl_sum = 0.0;
    double entropy_sum = 0.0;
    std::size_t tokens = 0;
    for (const RolloutGroup& group : groups) {
        if (group.advantages.size() != group.rollouts.size()) {
            throw std::invalid_argument("advantages not computed for group " + group.prompt_id);
        }
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            const TokenizedRollout& rollout = group.rollouts[i];
            require_consistent(rollout);
            const double advantage = group.advantages[i];
            for (std::size_t t = 0; t < rollout.token_count(); ++t) {
                if (rollout.mask[t] == 0) {
                    continue;
                }
                ++tokens;
                const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
                loss_sum += -std::min(rho * advantage, clamp_ratio(rho, config) * advantage);
                kl_sum += k3_estimator(rollout.logp_ref[t], rollout.logp_new[t]);
                if (!rollout.entropy.empty()) {
                    entropy_sum += rollout.entropy[t];
                }
            }
        }
    }
    if (tokens == 0) {
        throw std::invalid_argument("NO_TRAINABLE_TOKENS: batch mask is all-false");
    }
    const auto denom = static_cast<double>(tokens);
    report.policy_loss = loss_sum / denom;
    report.kl = kl_sum / denom;
    report.entropy_proxy = entropy_sum / denom;
    report.total =
        report.policy_loss + config.kl_coef * report.kl - config.entropy_coef * report.entropy_proxy;
    report.tokens_trained = tokens;
    return report;
}

std::string rollout_group_to_json(const RolloutGroup& group) {
    ordered_json rollouts = ordered_json::array();
    for (const TokenizedRollout& rollout : group.rollouts) {
        ordered_json doc = {{"reward", rollout.reward},
                            {"logp_new", rollout.logp_new},
                            {"logp_old", rollout.logp_old},
                            {"logp_ref", rollout.logp_ref}};
        ordered_json mask = ordered_json::array();
        for (std::uint8_t m : rollout.mask) {
            mask.push_back(static_cast<int>(m));
        }
        doc["mask"] = mask;
        if (!rollout.entropy.empty()) {
            doc["entropy"] = rollout.entropy;
        }
        rollouts.push_back(std::move(doc));
    }
    const ordered_json doc = {{"prompt_id", group.prompt_id}, {"rollouts", rollouts}};
    return doc.dump();
}

RolloutGroup rollout_group_from_json(const std::string& line) {
    const auto doc = nlohmann::json::parse(line);
    RolloutGroup group;
    group.prompt_id = doc.at("prompt_id").get<std::string>();
    for (const auto& rollout_doc : doc.at("rollouts")) {
        TokenizedRollout rollout;
        rollout.reward = rollout_doc.at("reward").get<double>();
        rollout.logp_new = rollout_doc.at("logp_new").get<std::vector<double>>();
        rollout.logp_old = rollout_doc.at("logp_old").get<std::vector<double>>();
        rollout.logp_ref = rollout_doc.at("logp_ref").get<std::vector<double>>();
        for (const auto& m : rollout_doc.at("mask")) {
            rollout.mask.push_back(m.is_boolean() ? (m.get<bool>() ? 1 : 0)
                                                  : (m.get<int>() != 0 ? 1 : 0));
        }
        if (rollout_doc.contains("entropy")) {
            rollout.entropy = rollout_doc.at("entropy").get<std::vector<double>>();
        }
        group.rollouts.push_back(std::move(rollout));
    }
    return group;
}

std::vector<RolloutGroup> load_rollout_groups(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open rollout-group file: " + path);
    }
    std::vector<RolloutGroup> groups;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            groups.push_back(rollout_group_from_json(line));
        }
    }
    return groups;
}

void save_rollout_groups(const std::vector<RolloutGroup>& groups, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open rollout-group file for writing: " + path);
    }
    for (const RolloutGroup& group : groups) {
        out << rollout_group_to_json(group) << '\n';
    }
}

CheckReport check_invariants(const std::vector<RolloutGroup>& groups,
                             const ObjectiveConfig& config) {
    CheckReport report;
    for (const RolloutGroup& group : groups) {
        ++report.groups_checked;
        const std::string& id = group.prompt_id;
        if (group.rollouts.size() < 2) {
            report.violations.push_back(fmt::format("group {}: GROUP_TOO_SMALL", id));
            continue;
        }
        bool arrays_ok = true;
        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            const TokenizedRollout& rollout = group.rollouts[i];
            if (!rollout.consistent()) {
                report.violations.push_back(
                    fmt::format("group {} rollout {}: inconsistent array lengths", id, i));
                arrays_ok = false;
                continue;
            }
            const auto finite = [](const std::vector<double>& xs) {
                return std::all_of(xs.begin(), xs.end(),
                                   [](double x) { return std::isfinite(x); });
            };
            if (!finite(rollout.logp_new) || !finite(rollout.logp_old) ||
                !finite(rollout.logp_ref) || !std::isfinite(rollout.reward)) {
                report.violations.push_back(
                    fmt::format("group {} rollout {}: non-finite values", id, i));
                arrays_ok = false;
            }
        }
        if (!arrays_ok) {
            continue;
        }

        std::vector<double> rewards;
        for (const TokenizedRollout& rollout : group.rollouts) {
            rewards.push_back(rollout.reward);
        }
        const AdvantageResult adv = group_advantages(rewards, config.std_convention);
        if (adv.degenerate) {
            ++report.degenerate_groups;
            continue;  // flagged, would be dropped by dynamic sampling
        }
        double mean = 0.0;
        double sq = 0.0;
        for (double a : adv.advantages) {
            mean += a;
        }
        mean /= static_cast<double>(adv.advantages.size());
        for (double a : adv.advantages) {
            sq += (a - mean) * (a - mean);
        }
        const double denom = config.std_convention == StdConvention::kPopulation
                                 ? static_cast<double>(adv.advantages.size())
                                 : static_cast<double>(adv.advantages.size()) - 1.0;
        const double stddev = std::sqrt(sq / denom);
        if (std::abs(mean) >= 1e-9 || std::abs(stddev - 1.0) >= 1e-9) {
            report.violations.push_back(fmt::format(
                "group {}: advantage normalization off (mean={}, std={})", id, mean, stddev));
        }

        for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
            const TokenizedRollout& rollout = group.rollouts[i];
            if (masked_count(rollout) == 0) {
                report.violations.push_back(
                    fmt::format("group {} rollout {}: NO_TRAINABLE_TOKENS", id, i));
                continue;
            }
            const double advantage = adv.advantages[i];
            const SurrogateResult base = masked_surrogate(rollout, advantage, config);

            // Mask zero-influence: perturbing masked-out logp_new must change
            // nothing, bitwise.
            TokenizedRollout perturbed = rollout;
            bool has_masked_out = false;
            for (std::size_t t = 0; t < perturbed.token_count(); ++t) {
                if (perturbed.mask[t] == 0) {
                    perturbed.logp_new[t] += 1.0;
                    has_masked_out = true;
                }
            }
            if (has_masked_out) {
                const SurrogateResult shifted = masked_surrogate(perturbed, advantage, config);
                if (shifted.loss != base.loss || shifted.per_token != base.per_token ||
                    kl_term(perturbed) != kl_term(rollout)) {
                    report.violations.push_back(fmt::format(
                        "group {} rollout {}: masked tokens influence the loss", id, i));
                }
            }

            // Clip bounds: for positive advantage the magnitude never exceeds
            // (1+eps_h)*A; for negative advantage the clipped branch pins the
            // term at (1-eps_l)*|A| while the unclipped branch stays pessimistic.
            for (std::size_t t = 0; t < rollout.token_count(); ++t) {
                if (rollout.mask[t] == 0) {
                    continue;
                }
                const double term = base.per_token[t];
                const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
                bool bad = false;
                if (advantage > 0.0) {
                    bad = term < -(1.0 + config.clip_high) * advantage - 1e-12 || term > 1e-12;
                } else {
                    bad = term < -1e-12;
                    if (!bad && rho < 1.0 - config.clip_low - 1e-9) {
                        bad = std::abs(term + (1.0 - config.clip_low) * advantage) > 1e-9;
                    }
                }
                if (bad) {
                    report.violations.push_back(fmt::format(
                        "group {} rollout {} token {}: clipped term out of bounds", id, i, t));
                    break;
                }
            }

            // Analytic gradient versus central differences away from clip kinks.
            const std::vector<double> grad = surrogate_grad(rollout, advantage, config);
            const double h = 1e-6;
            for (std::size_t t = 0; t < rollout.token_count(); ++t) {
                if (rollout.mask[t] == 0) {
                    continue;
                }
                const double rho = std::exp(rollout.logp_new[t] - rollout.logp_old[t]);
                if (std::abs(rho - (1.0 - config.clip_low)) < 1e-3 ||
                    std::abs(rho - (1.0 + config.clip_high)) < 1e-3 ||
                    std::abs(advantage) < 1e-6) {
                    continue;  // kink neighborhoods have no classical derivative
                }
                TokenizedRollout plus = rollout;
                TokenizedRollout minus = rollout;
                plus.logp_new[t] += h;
                minus.logp_new[t] -= h;
                const double numeric =
                    (masked_surrogate(plus, advantage, config).loss -
                     masked_surrogate(minus, advantage, config).loss) /
                    (2.0 * h);
                const double scale = std::max({std::abs(numeric), std::abs(grad[t]), 1e-8});
                if (std::abs(numeric - grad[t]) / scale > 1e-5) {
                    report.violations.push_back(
                        fmt::format("group {} rollout {} token {}: gradient mismatch "
                                    "(analytic={}, numeric={})",
                                    id, i, t, grad[t], numeric));
                    break;
                }
            }
        }
    }
    return report;
}

}  // namespace zoomrl::grpo
