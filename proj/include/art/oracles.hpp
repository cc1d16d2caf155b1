#pragma once
// Outcome-only 0/1 reward oracles. Ground truth is obtained by running the
// kernel directly along the target path; oracles only ever see
// (x, final pre-EOS state, depth).

#include <vector>

#include "art/ledger.hpp"
#include "art/tree.hpp"

namespace art {

// f_{S^r}(x): kernel recursion along the first r target indices.
int subtask_value(const TaskSpec& spec, const std::vector<int>& x, int r);

// 1 iff final == f_{S*}(x).
int terminal_reward(const TaskSpec& spec, const std::vector<int>& x, int final_state);
int terminal_reward(const TaskSpec& spec, const Trajectory& t);

// 1 iff final == f_{S^depth}(x) for a member of the subtask family
// (depth in [k*], or depth 0 when k* = 0); 0 for any other depth.
int family_reward(const TaskSpec& spec, const std::vector<int>& x, int final_state, int depth);
// Realized termination depth.
int family_reward(const TaskSpec& spec, const Trajectory& t);

enum class OracleKind { Terminal, Family, ExactPath };

// Oracle handle used by the training and search procedures. For Family the
// queried depth is chosen by the caller; negative means "realized
// termination depth". ExactPath is a synthetic rho = 0 oracle accepting only
// the exact target path; it exists for testing search procedures.
struct Oracle {
    OracleKind kind = OracleKind::Terminal;
    const TaskSpec* spec = nullptr;

    int operator()(const Trajectory& t, int family_depth = -1) const;
};

// Uniform-branching probe behind the closed form for P(U_r): steps 1..r
// choose among d-s+1 children (child 0 correct), step r+1 offers d-r
// children plus EOS. Wrong children are realized as distinct decoy indices
// outside the target so that a wrong prefix matches with probability 1/2.
// Returns 1 when the probe stops at depth r and the family oracle accepts.
int uniform_probe_accepts(int d, int r, Rng& rng);

double ur_closed_form(int d, int r);

}  // namespace art
