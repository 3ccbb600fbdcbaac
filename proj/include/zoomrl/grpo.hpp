#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zoomrl::grpo {

// Per-token log-probability view of one rollout as a trainer would supply it.
// No tokenizer lives here; mask is false on every token the environment
// injected (observations, tool responses), true on policy-generated tokens.
struct TokenizedRollout {
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
    std::vector<std::uint8_t> mask;
    std::vector<double> entropy;  // optional per-token proxy; empty = absent
    double reward = 0.0;

    std::size_t token_count() const { return logp_new.size(); }
    bool consistent() const {
        return logp_old.size() == logp_new.size() && logp_ref.size() == logp_new.size() &&
               mask.size() == logp_new.size() &&
               (entropy.empty() || entropy.size() == logp_new.size());
    }
};

struct RolloutGroup {
    std::string prompt_id;
    std::vector<TokenizedRollout> rollouts;
    std::vector<double> advantages;  // filled by fill_advantages
    bool degenerate = false;         // all rewards equal: no gradient signal
};

enum class StdConvention { kPopulation, kSample };

struct AdvantageResult {
    std::vector<double> advantages;
    bool degenerate = false;
};

// (r_i - mean) / std over the group. Zero-variance groups come back all-zero
// and flagged degenerate. Throws std::invalid_argument (GROUP_TOO_SMALL) for
// fewer than two rewards.
AdvantageResult group_advantages(const std::vector<double>& rewards,
                                 StdConvention convention = StdConvention::kPopulation);

void fill_advantages(RolloutGroup& group,
                     StdConvention convention = StdConvention::kPopulation);

struct FilterReport {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

// Dynamic sampling: degenerate groups carry zero advantage signal and are
// dropped, never padded.
std::vector<RolloutGroup> dynamic_sample_filter(std::vector<RolloutGroup> groups,
                                                FilterReport* report = nullptr);

struct ObjectiveConfig {
    double clip_low = 0.2;    // epsilon_l; lower ratio bound 1 - 0.2
    double clip_high = 0.27;  // epsilon_h; clip-higher upper bound 1 + 0.27
    double kl_coef = 0.001;   // beta
    double entropy_coef = 0.001;
    StdConvention std_convention = StdConvention::kPopulation;
};

struct SurrogateResult {
    double loss = 0.0;                // mean over masked tokens
    std::vector<double> per_token;    // exactly 0 wherever mask is false
};

// Clipped surrogate with asymmetric bounds:
//   per-token = -min(rho * A, clamp(rho, 1-eps_l, 1+eps_h) * A),
// rho = exp(logp_new - logp_old). Throws std::invalid_argument
// (NO_TRAINABLE_TOKENS) when the mask is all-false.
SurrogateResult masked_surrogate(const TokenizedRollout& rollout, double advantage,
                                 const ObjectiveConfig& config);

// Masked mean of the non-negative k3 estimator
//   exp(logp_ref - logp_new) - (logp_ref - logp_new) - 1.
double kl_term(const TokenizedRollout& rollout);

// Analytic d(loss)/d(logp_new_t) companions, so trainers can cross-check
// against finite differences. Zero on masked-out tokens.
std::vector<double> surrogate_grad(const TokenizedRollout& rollout, double advantage,
                                   const ObjectiveConfig& config);
std::vector<double> kl_grad(const TokenizedRollout& rollout);

struct ObjectiveReport {
    double policy_loss = 0.0;
    double kl = 0.0;
    double entropy_proxy = 0.0;
    double total = 0.0;  // policy_loss + beta * kl - entropy_coef * entropy_proxy
    std::size_t tokens_trained = 0;
    std::size_t groups_kept = 0;
};

// Token-mean aggregation across kept groups in fixed iteration order, so the
// result is bitwise reproducible. Throws std::invalid_argument (EMPTY_BATCH
// or NO_TRAINABLE_TOKENS).
ObjectiveReport objective(const std::vector<RolloutGroup>& groups,
                          const ObjectiveConfig& config);

// JSONL interchange: one group object per line.
std::string rollout_group_to_json(const RolloutGroup& group);
RolloutGroup rollout_group_from_json(const std::string& line);
std::vector<RolloutGroup> load_rollout_groups(const std::string& path);
void save_rollout_groups(const std::vector<RolloutGroup>& groups, const std::string& path);

struct CheckReport {
    std::size_t groups_checked = 0;
    std::size_t degenerate_groups = 0;
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Recomputes every module invariant on a batch: array consistency, advantage
// normalization, mask zero-influence, clip bounds, and an analytic-vs-numeric
// gradient spot check.
CheckReport check_invariants(const std::vector<RolloutGroup>& groups,
                             const ObjectiveConfig& config);

}  // namespace zoomrl::grpo
