#pragma once
// Single-head attention base model. Token embeddings and the positional bank
// live in orthogonal coordinate blocks; the only trainable object is the
// positional block W, so attention logits are s_l(j) = p_j^T W p_{c_l} plus
// the legality mask. CoT state z_m occupies sequence position d+1+m, hence
// the query at depth l is c_l = d+l.

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "art/ledger.hpp"
#include "art/tree.hpp"

namespace art {

constexpr double kMaskSentinel = -1e30;

struct ModelParams {
    TaskSpec spec;
    int dx = 0;    // token width, K+1
    int npos = 0;  // bank size, d+1+L
    Eigen::MatrixXd U;  // d_E x (K+1)
    Eigen::MatrixXd P;  // d_E x npos
    Eigen::MatrixXd W;  // npos x npos, positional coordinates
    double beta = 0.1;

    int dE() const { return dx + npos; }
    int query_position(int l) const { return spec.d() + l; }

    // p_j^T W p_c for 1-based positions
    double logit(int j, int c) const { return table_(j - 1, c - 1); }
    double gram(int j, int r) const { return identity_bank_ ? (j == r ? 1.0 : 0.0) : gram_(j - 1, r - 1); }
    // positional coordinates of p_j
    Eigen::VectorXd pos(int j) const { return P.col(j - 1).tail(npos); }

    // Recompute cached tables after W (or P) changed.
    void refresh();

private:
    Eigen::MatrixXd table_;
    Eigen::MatrixXd gram_;
    bool identity_bank_ = true;
};

// Base weights: W = 0 (every legal logit equal), positional bank either the
// canonical basis or a seeded random rotation of it.
ModelParams build_base_model(const TaskSpec& spec, double beta = 0.1,
                             std::optional<std::uint64_t> bank_seed = std::nullopt);

void to_json(nlohmann::json& j, const ModelParams& m);
void from_json(const nlohmann::json& j, ModelParams& m);
void save_checkpoint(const ModelParams& m, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

// Attention and vocabulary probabilities restricted to the legal set.
struct LegalDistribution {
    int depth = 0;
    int query = 0;
    std::vector<int> legal;
    std::vector<double> alpha;  // attention weights on legal keys
    std::vector<double> vocab;  // next-index probabilities on legal keys
    std::size_t find(int j) const;
};

LegalDistribution legal_distribution(const ModelParams& m, const std::vector<int>& vars, int l);

struct StepDistribution {
    int depth = 0;
    int query = 0;
    std::vector<int> legal;
    Eigen::VectorXd logits;  // s_l(j) with mask, indexed by position-1
    Eigen::VectorXd alpha;
    Eigen::VectorXd pooled;  // p-hat in d_E coordinates
    Eigen::VectorXd vocab;
    int index = 0;
    int token = -1;          // visible token (EOS token on termination)
    bool eos = false;
    Eigen::VectorXd state;   // token-block embedding of z_l
};

// One autoregressive step from the variable prefix `vars` with previous
// state z_{l-1} (token id). Samples an index and applies the depth FFN.
StepDistribution forward_step(const ModelParams& m, const std::vector<int>& x, const std::vector<int>& vars,
                              int prev_state, int l, Rng& rng);

// Parity FFN: W2 ReLU(W1 (a + b)) on 3-dim token embeddings.
Eigen::Vector3d ffn_xor(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// Kernel FFN on token-block embeddings (width K+1). Xor uses ffn_xor, other
// kernels a decode / apply / embed lookup.
Eigen::VectorXd apply_ffn(const ModelParams& m, const Eigen::VectorXd& value, const Eigen::VectorXd& state);

Eigen::VectorXd token_embedding(const ModelParams& m, int token);
// Nearest vocab column; throws when farther than 1e-8.
int decode_token(const ModelParams& m, const Eigen::VectorXd& e);

// Append one step, computing the state through the model's FFN.
void model_push(const ModelParams& m, Trajectory& t, int index, double p, bool forced);

// Inverse-CDF draw from a probability vector.
std::size_t sample_categorical(const std::vector<double>& p, Rng& rng);

struct RolloutOptions {
    std::vector<int> force_prefix;
    int truncate_at = -1;  // < 0 disables truncation
    int max_len = -1;      // < 0 means L+1
    std::int64_t retry_cap = 1'000'000;
};

struct BudgetExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RolloutStats {
    std::int64_t emitted = 0;
    std::int64_t discarded = 0;
};

// Sample a CoT. Forced prefix steps and the EOS appended on truncation are
// not emissions; every sampled step, including those of discarded attempts,
// is counted into `ledger` (t_comp) and `stats`.
Trajectory rollout(const ModelParams& m, const std::vector<int>& x, const RolloutOptions& opt, Rng& rng,
                   BudgetLedger* ledger = nullptr, RolloutStats* stats = nullptr);

// Continue a partial trajectory (not yet terminated) to EOS.
void continue_rollout(const ModelParams& m, Trajectory& t, Rng& rng, BudgetLedger* ledger = nullptr);

struct WeightedPath {
    Trajectory traj;
    double weight = 0.0;
};

// Exact law of model rollouts on x. Under truncation the weights are
// conditional on the rollout not being discarded.
std::vector<WeightedPath> enumerate_model(const ModelParams& m, const std::vector<int>& x,
                                          const RolloutOptions& opt = {},
                                          std::int64_t cap = kEnumerationCap);

}  // namespace art
