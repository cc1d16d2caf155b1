#include "art/oracles.hpp"

#include <algorithm>
#include <numeric>

namespace art {

int subtask_value(const TaskSpec& spec, const std::vector<int>& x, int r) {
    if (r < 0 || r > spec.k_star()) throw ContractError("subtask depth out of range");
    int z = spec.eos_token();
    for (int m = 0; m < r; ++m) z = apply_kernel(spec, z, x.at(spec.target_path[m] - 1));
    return z;
}

int terminal_reward(const TaskSpec& spec, const std::vector<int>& x, int final_state) {
    return final_state == subtask_value(spec, x, spec.k_star()) ? 1 : 0;
}

int terminal_reward(const TaskSpec& spec, const Trajectory& t) {
    if (!t.terminated()) throw ContractError("oracle queried on an unterminated trajectory");
    return terminal_reward(spec, t.x, t.final_state(spec.eos_token()));
}

int family_reward(const TaskSpec& spec, const std::vector<int>& x, int final_state, int depth) {
    const int k = spec.k_star();
    bool member = k == 0 ? depth == 0 : (depth >= 1 && depth <= k);
    if (!member) return 0;
    return final_state == subtask_value(spec, x, depth) ? 1 : 0;
}

int family_reward(const TaskSpec& spec, const Trajectory& t) {
    if (!t.terminated()) throw ContractError("oracle queried on an unterminated trajectory");
    return family_reward(spec, t.x, t.final_state(spec.eos_token()), t.depth());
}

int Oracle::operator()(const Trajectory& t, int family_depth) const {
    if (!t.terminated()) throw ContractError("oracle queried on an unterminated trajectory");
    switch (kind) {
        case OracleKind::Terminal: return terminal_reward(*spec, t);
        case OracleKind::Family: {
            int depth = family_depth < 0 ? t.depth() : family_depth;
            return family_reward(*spec, t.x, t.final_state(spec->eos_token()), depth);
        }
        case OracleKind::ExactPath: return t.indices == spec->target_path ? 1 : 0;
    }
    return 0;
}

int uniform_probe_accepts(int d, int r, Rng& rng) {
    if (r < 1 || 2 * r > d) throw ContractError("probe needs 1 <= r <= d/2");
    std::vector<int> target(r);
    std::iota(target.begin(), target.end(), 1);
    const TaskSpec spec = parity_task(d, r, target);
    // wrong children map to decoys drawn from r+1..d without replacement
    std::vector<int> decoys(d - r);
    std::iota(decoys.begin(), decoys.end(), r + 1);
    std::shuffle(decoys.begin(), decoys.end(), rng);
    auto x = sample_input(spec, rng);
    int z = spec.eos_token(), next_decoy = 0;
    for (int s = 1; s <= r; ++s) {
        int child = std::uniform_int_distribution<int>(0, d - s)(rng);
        int idx = child == 0 ? s : decoys[next_decoy++];
        z = apply_kernel(spec, z, x[idx - 1]);
    }
    // step r+1: d-r children plus EOS
    if (std::uniform_int_distribution<int>(0, d - r)(rng) != 0) return 0;
    return family_reward(spec, x, z, r);
}

double ur_closed_form(int d, int r) {
    double prev = 1.0;
    for (int s = 1; s < r; ++s) prev /= (d - s + 1);
    double a = d - r + 1;
    return prev * (d - r + 2) / (2.0 * a * a) + (1.0 - prev) / (2.0 * a);
}

}  // namespace art
