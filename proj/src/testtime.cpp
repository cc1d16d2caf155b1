#include "art/testtime.hpp"

#include <algorithm>
#include <cmath>

namespace art {

std::optional<Trajectory> fxrs(const ModelParams& m, const std::vector<int>& x, const std::vector<int>& prefix,
                               int candidate, std::int64_t t_max, Rng& rng, BudgetLedger* ledger,
                               std::int64_t* tries) {
    const int l = static_cast<int>(prefix.size()) + 1;
    auto ld = legal_distribution(m, prefix, l);
    auto it = std::find(ld.legal.begin(), ld.legal.end(), candidate);
    if (it == ld.legal.end()) throw ContractError("forcing candidate is not a legal child");
    const double p = ld.vocab[static_cast<std::size_t>(it - ld.legal.begin())];
    // i.i.d. tries until the first hit: the number of tries is geometric
    std::int64_t n = t_max + 1;
    if (p >= 1.0) {
        n = 1;
    } else if (p > 0.0) {
        n = 1 + std::geometric_distribution<std::int64_t>(p)(rng);
    }
    const bool ok = n <= t_max;
    const std::int64_t spent = ok ? n : t_max;
    if (ledger) ledger->add_comp(spent);
    if (tries) *tries += spent;
    if (!ok) return std::nullopt;
    Trajectory t;
    t.x = x;
    for (int i : prefix) model_push(m, t, i, 1.0, true);
    model_push(m, t, candidate, p, false);
    return t;
}

int commit_arm(const std::vector<ArmStats>& arms) {
    if (arms.empty()) throw ContractError("no arms to commit");
    std::size_t best = 0;
    for (std::size_t a = 1; a < arms.size(); ++a) {
        double pa = arms[a].p_hat(), pb = arms[best].p_hat();
        if (pa > pb || (pa == pb && arms[a].index < arms[best].index)) best = a;
    }
    return arms[best].index;
}

std::int64_t bai_budget(int d, int k_star, int l, double c, double delta) {
    return static_cast<std::int64_t>(std::ceil(c * std::pow(d, 2.0 * (k_star + 1 - l)) * std::log(d / delta)));
}

std::int64_t ltar_budget(int d, double rho, double c, double delta) {
    if (!(rho >= 0.0 && rho < 1.0)) throw ContractError("spurious rate must lie in [0,1)");
    return static_cast<std::int64_t>(
        std::ceil(c * static_cast<double>(d) * d / ((1.0 - rho) * (1.0 - rho)) * std::log(d / delta)));
}

std::int64_t fxrs_cap(int d, double c_tmax, double delta) {
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(c_tmax * d * std::log(d / delta))));
}

namespace {

Trajectory forced_repetition(const ModelParams& m, const std::vector<int>& x, const std::vector<int>& prefix,
                             int arm, const SearchConfig& cfg, Rng& rng, BudgetLedger& ledger) {
    const std::int64_t t_max = fxrs_cap(m.spec.d(), cfg.c_tmax, cfg.delta);
    for (std::int64_t r = 0; r < cfg.fxrs_restarts; ++r) {
        auto t = fxrs(m, x, prefix, arm, t_max, rng, &ledger);
        if (t) return *t;
    }
    throw BudgetExhausted("forcing failed at depth " + std::to_string(prefix.size() + 1) + ", arm " +
                          std::to_string(arm));
}

void check_search(const ModelParams& m, const SearchConfig& cfg) {
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ContractError("delta must lie in (0,1)");
    if (!(cfg.c > 0.0)) throw ContractError("budget constant must be positive");
    if (m.spec.d() < 2) throw ContractError("search needs d >= 2");
}

// Shared depth loop: per depth, every legal arm gets `budget` forced
// repetitions scored by `repeat`; the lowest-index argmax is committed.
template <class Budget, class Repeat>
IdentificationResult identify(const ModelParams& m, const SearchConfig& cfg, Rng& rng, Budget budget,
                              Repeat repeat) {
    check_search(m, cfg);
    const auto& spec = m.spec;
    IdentificationResult res;
    std::vector<int> prefix;
    for (int l = 1; l <= spec.k_star() + 1; ++l) {
        res.ledger.begin_stage("depth " + std::to_string(l));
        DepthRecord rec;
        rec.depth = l;
        rec.per_arm = budget(l, prefix, res.ledger);
        for (int arm : legal_children(spec, prefix, l)) {
            ArmStats st;
            st.index = arm;
            for (std::int64_t r = 0; r < rec.per_arm; ++r) {
                auto x = sample_input(spec, rng);
                auto t = forced_repetition(m, x, prefix, arm, cfg, rng, res.ledger);
                st.accepts += repeat(t, l, res.ledger);
                res.ledger.add_data(1);
                ++st.pulls;
            }
            rec.arms.push_back(st);
        }
        rec.committed = commit_arm(rec.arms);
        // commit: resample the step once more until it lands on the chosen arm
        forced_repetition(m, sample_input(spec, rng), prefix, rec.committed, cfg, rng, res.ledger);
        rec.t_data = res.ledger.stages().back().t_data;
        rec.t_comp = res.ledger.stages().back().t_comp;
        res.depths.push_back(rec);
        res.path.push_back(rec.committed);
        if (rec.committed == spec.eos_index()) break;
        prefix.push_back(rec.committed);
    }
    res.success = res.path == spec.target_path;
    return res;
}

}  // namespace

IdentificationResult bai_terminal(const ModelParams& m, const SearchConfig& cfg, Rng& rng) {
    const auto& spec = m.spec;
    if (cfg.bai_oracle == OracleKind::Family) throw ContractError("best-arm search takes a terminal oracle");
    const Oracle oracle{cfg.bai_oracle, &spec};
    return identify(
        m, cfg, rng,
        [&](int l, const std::vector<int>&, BudgetLedger&) {
            return bai_budget(spec.d(), spec.k_star(), l, cfg.c, cfg.delta);
        },
        [&](Trajectory& t, int, BudgetLedger& ledger) {
            if (!t.terminated()) continue_rollout(m, t, rng, &ledger);
            return oracle(t);
        });
}

double spurious_rate(const ModelParams& m, const std::vector<int>& prefix, std::int64_t pilot, Rng& rng,
                     BudgetLedger* ledger) {
    const auto& spec = m.spec;
    if (spec.kernel == KernelId::Xor) return 0.5;
    if (pilot < 1) throw ContractError("pilot size must be >= 1");
    const int l = static_cast<int>(prefix.size()) + 1;
    const auto legal = legal_children(spec, prefix, l);
    std::int64_t hits = 0;
    for (std::int64_t k = 0; k < pilot; ++k) {
        auto x = sample_input(spec, rng);
        int arm = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
        Trajectory t;
        t.x = x;
        for (int i : prefix) model_push(m, t, i, 1.0, true);
        model_push(m, t, arm, 1.0, true);
        if (!t.terminated()) {
            if (l < spec.k_star() + 1) model_push(m, t, spec.eos_index(), 1.0, true);
            else continue_rollout(m, t, rng, ledger);
        }
        hits += family_reward(spec, x, t.final_state(spec.eos_token()), std::min(l, spec.k_star()));
        if (ledger) ledger->add_data(1);
    }
    return std::min(0.9, static_cast<double>(hits) / static_cast<double>(pilot));
}

IdentificationResult ltar(const ModelParams& m, const SearchConfig& cfg, Rng& rng) {
    const auto& spec = m.spec;
    const int k = spec.k_star();
    return identify(
        m, cfg, rng,
        [&](int, const std::vector<int>& prefix, BudgetLedger& ledger) {
            return ltar_budget(spec.d(), spurious_rate(m, prefix, cfg.pilot, rng, &ledger), cfg.c, cfg.delta);
        },
        [&](Trajectory& t, int l, BudgetLedger& ledger) {
            if (!t.terminated()) {
                if (l < k + 1) model_push(m, t, spec.eos_index(), 1.0, true);  // appended, not emitted
                else continue_rollout(m, t, rng, &ledger);
            }
            return family_reward(spec, t.x, t.final_state(spec.eos_token()), std::min(l, k));
        });
}

namespace {

double expected_reward(const TaskSpec& spec, const std::vector<std::vector<int>>& xs, const Trajectory& t,
                       AcceptMode mode, int depth) {
    const auto vars = t.vars();
    double acc = 0.0;
    for (const auto& x : xs) {
        int z = spec.eos_token();
        for (int i : vars) z = apply_kernel(spec, z, x[i - 1]);
        acc += mode == AcceptMode::Terminal ? terminal_reward(spec, x, z) : family_reward(spec, x, z, depth);
    }
    return acc / static_cast<double>(xs.size());
}

}  // namespace

AcceptanceGap acceptance_gap_exact(const ModelParams& m, int l, AcceptMode mode, std::int64_t cap) {
    const auto& spec = m.spec;
    const int k = spec.k_star();
    if (l < 1 || l > k + 1) throw ContractError("depth outside 1..k*+1");
    const auto xs = all_inputs(spec);
    const auto prefix = spec.prefix(l - 1);
    AcceptanceGap out;
    out.correct = spec.target_path[l - 1];
    out.arms = legal_children(spec, prefix, l);
    for (int arm : out.arms) {
        RolloutOptions opt;
        opt.force_prefix = prefix;
        opt.force_prefix.push_back(arm);
        if (mode == AcceptMode::Family && l < k + 1) opt.truncate_at = l;
        double a = 0.0;
        for (const auto& wp : enumerate_model(m, std::vector<int>(spec.d(), 0), opt, cap))
            a += wp.weight * expected_reward(spec, xs, wp.traj, mode, std::min(l, k));
        out.alpha.push_back(a);
    }
    double best_wrong = -1.0, right = 0.0;
    for (std::size_t a = 0; a < out.arms.size(); ++a) {
        if (out.arms[a] == out.correct) right = out.alpha[a];
        else best_wrong = std::max(best_wrong, out.alpha[a]);
    }
    out.gap = best_wrong < 0.0 ? right : right - best_wrong;
    return out;
}

}  // namespace art
