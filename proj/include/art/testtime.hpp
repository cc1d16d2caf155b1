#pragma once
// Test-time search for the target path with outcome-only rewards: forced
// rejection sampling of a single step, best-arm identification with the
// terminal oracle, and the layer-wise truncated accept-reject procedure.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "art/ledger.hpp"
#include "art/model.hpp"
#include "art/oracles.hpp"

namespace art {

// Resample the depth-l step (l = |prefix| + 1) until it selects `candidate`.
// Every try is an emitted token. Returns nullopt after t_max failed tries.
// On success the returned trajectory holds prefix (forced) + candidate and is
// not yet extended further.
std::optional<Trajectory> fxrs(const ModelParams& m, const std::vector<int>& x, const std::vector<int>& prefix,
                               int candidate, std::int64_t t_max, Rng& rng, BudgetLedger* ledger = nullptr,
                               std::int64_t* tries = nullptr);

struct ArmStats {
    int index = 0;
    std::int64_t pulls = 0;
    std::int64_t accepts = 0;
    double p_hat() const { return pulls ? static_cast<double>(accepts) / static_cast<double>(pulls) : 0.0; }
};

struct DepthRecord {
    int depth = 0;
    std::int64_t per_arm = 0;  // repetitions per arm
    std::vector<ArmStats> arms;
    int committed = 0;
    std::int64_t t_data = 0;
    std::int64_t t_comp = 0;
};

struct IdentificationResult {
    std::vector<int> path;  // committed indices
    bool success = false;   // path == S*
    BudgetLedger ledger;
    std::vector<DepthRecord> depths;
};

struct SearchConfig {
    double delta = 0.1;
    double c = 1.0;          // per-arm budget constant
    double c_tmax = 4.0;     // forcing cap t_max = ceil(c_tmax d log(d/delta))
    std::int64_t fxrs_restarts = 1000;  // "repeat until success" cap
    std::int64_t pilot = 10000;         // rollouts per depth for the spurious-rate plug-in
    // Terminal or the synthetic ExactPath oracle (best-arm search only)
    OracleKind bai_oracle = OracleKind::Terminal;
};

// Per-arm repetitions.
std::int64_t bai_budget(int d, int k_star, int l, double c, double delta);
std::int64_t ltar_budget(int d, double rho, double c, double delta);
std::int64_t fxrs_cap(int d, double c_tmax, double delta);

// Terminal-oracle best-arm identification across depths.
IdentificationResult bai_terminal(const ModelParams& m, const SearchConfig& cfg, Rng& rng);

// Layer-wise truncated accept-reject with the family oracle.
IdentificationResult ltar(const ModelParams& m, const SearchConfig& cfg, Rng& rng);

// Spurious acceptance plug-in: exactly 1/2 for parity; otherwise the mean
// family-oracle acceptance of uniformly chosen arms after `prefix`, over
// pilot rollouts (charged to `ledger`), capped at 0.9.
double spurious_rate(const ModelParams& m, const std::vector<int>& prefix, std::int64_t pilot, Rng& rng,
                     BudgetLedger* ledger);

enum class AcceptMode { Terminal, Family };

struct AcceptanceGap {
    std::vector<int> arms;
    std::vector<double> alpha;  // exact acceptance probability per arm
    int correct = 0;
    double gap = 0.0;  // alpha_{j*} - max_{j != j*} alpha_j
};

// Exact per-arm acceptance at depth l on the correct prefix S^{l-1}, with the
// arm forced and the suffix either rolled out (terminal) or truncated as in
// the layer-wise procedure (family), averaged over every input.
AcceptanceGap acceptance_gap_exact(const ModelParams& m, int l, AcceptMode mode,
                                   std::int64_t cap = kEnumerationCap);

// Lowest-index argmax of p_hat.
int commit_arm(const std::vector<ArmStats>& arms);

}  // namespace art
