#pragma once
// REINFORCE on the positional block W: score decomposition into orthogonal
// (depth, index) blocks, Monte Carlo and exact expected gradients, the
// one-step update with its margin diagnostics, and the three schedules.

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "art/ledger.hpp"
#include "art/model.hpp"
#include "art/oracles.hpp"

namespace art {

struct GradientBlocks {
    int depths = 0;  // L+1
    int npos = 0;
    std::vector<double> coef;  // c_{l,j} at (l-1)*npos + (j-1)
    std::vector<double> var;   // sample variance of the per-sample summands (MC only)
    std::int64_t n = 0;

    static GradientBlocks zeros(const ModelParams& m);
    double& at(int l, int j) { return coef[static_cast<std::size_t>((l - 1) * npos + (j - 1))]; }
    double at(int l, int j) const { return coef[static_cast<std::size_t>((l - 1) * npos + (j - 1))]; }
    double stderr_at(int l, int j) const;
    // sum_{l,j} c_{l,j} p_j p_{c_l}^T in positional coordinates
    Eigen::MatrixXd aggregate(const ModelParams& m) const;
    // <G, p_j p_{c_l}^T>
    double project(const ModelParams& m, const Eigen::MatrixXd& G, int l, int j) const;
};

// Sum of log-probabilities of the sampled (not forced) steps.
double log_prob(const ModelParams& m, const Trajectory& t);

// grad_W log pi(t) = sum_l sum_k alpha_l(k) eta_l(k) p_k p_{c_l}^T, restricted
// to depth `score_depth` when positive. Throws on trajectories whose recorded
// step probabilities were not produced by `m`.
GradientBlocks score_gradient(const ModelParams& m, const Trajectory& t, int score_depth = 0);

// eta_l(k) for every legal k at depth l of t (diagnostics and bounds).
std::vector<double> eta_values(const ModelParams& m, const Trajectory& t, int l);

struct SampleOptions {
    RolloutOptions rollout;
    OracleKind oracle = OracleKind::Terminal;
    int family_depth = -1;  // < 0: realized termination depth
    int score_depth = 0;    // 0: every sampled step
};

struct ReinforceEstimate {
    GradientBlocks blocks;
    double mean_reward = 0.0;
    std::int64_t discarded = 0;
};

ReinforceEstimate reinforce_estimate(const ModelParams& m, const SampleOptions& opt, std::int64_t n, Rng& rng,
                                     BudgetLedger* ledger = nullptr);

struct ExactGradient {
    GradientBlocks blocks;
    double success = 0.0;  // E[R]
};

// Exact expectation over x ~ Unif([K]^d) and the model's rollout law.
ExactGradient expected_gradient_exact(const ModelParams& m, const SampleOptions& opt,
                                      std::int64_t cap = kEnumerationCap);

struct Threshold {
    bool feasible = false;
    double alpha_req = 0.0;
    double gamma = std::numeric_limits<double>::infinity();
};

// alpha_req = 1/2 + (beta/2) log(M(1-eps)/eps), Gamma = log((d_l-1)/(1/alpha_req - 1)).
Threshold margin_threshold(int d_l, double beta, int M, double eps_l);

struct DepthMargin {
    int depth = 0;
    int legal_size = 0;
    double delta = 0.0;  // logit gap on the correct prefix
    double gamma = std::numeric_limits<double>::quiet_NaN();  // block margin, when blocks given
    int runner_up = 0;   // lowest-index maximizer among wrong children
    Threshold threshold;
};

struct MarginReport {
    std::vector<DepthMargin> depths;
    const DepthMargin& at(int l) const;
};

MarginReport margin_report(const ModelParams& m, const GradientBlocks* blocks, double eps_l);

struct UpdateResult {
    ModelParams params;
    MarginReport report;
    double identity_error = 0.0;  // max |s_new - s_old - eta c| over all blocks
};

// W <- W + eta G; verifies that every logit moved by exactly eta c_{l,j}.
UpdateResult apply_update(const ModelParams& m, const GradientBlocks& blocks, double eta, double eps_l = 0.1);

enum class Schedule { None, DepthIncreasing, HintDecreasing };
std::string to_string(Schedule s);
Schedule schedule_from_string(const std::string& s);

struct ScheduleConfig {
    Schedule mode = Schedule::DepthIncreasing;
    std::vector<std::int64_t> n;  // per stage
    std::vector<double> eta;      // per stage
    double eps = 0.1;
    double delta = 0.1;
    std::int64_t eval_inputs = 10000;

    void validate(int stages) const;
};

// Sample sizes c_n d^2 log d per curriculum stage (the no-curriculum batch
// gets the same total); rates c_eta beta log d d^2 for curriculum stages and
// c_eta beta log d d^{k*+1} for the single no-curriculum step.
ScheduleConfig theorem_scaled_config(Schedule mode, const TaskSpec& spec, double beta, double c_n, double c_eta);

int schedule_stages(Schedule mode, const TaskSpec& spec);

struct StageRecord {
    int stage = 0;
    int trained_depth = 0;  // 0: all depths
    std::int64_t n_used = 0;
    std::int64_t discarded = 0;
    double eta = 0.0;
    double delta_min = 0.0;  // min logit gap over depths trained so far
    double gamma_hat = 0.0;  // block margin at the trained depth(s)
    bool margins_met = false;  // Delta >= Gamma on every depth trained so far
    double accuracy = std::numeric_limits<double>::quiet_NaN();  // final stage only
    std::int64_t t_data = 0;
    std::int64_t t_comp = 0;
};

struct ScheduleResult {
    ModelParams params;
    std::vector<StageRecord> stages;
    std::vector<MarginReport> reports;
    BudgetLedger ledger;
    double accuracy = 0.0;
};

// Terminal-oracle accuracy of rollouts on fresh inputs.
double terminal_accuracy(const ModelParams& m, std::int64_t n, Rng& rng);

ScheduleResult run_schedule(const ModelParams& base, const ScheduleConfig& cfg, Rng& rng);

// Stage options used by the schedules (exposed for exact margin analysis).
SampleOptions stage_options(Schedule mode, const TaskSpec& spec, int stage);

}  // namespace art
