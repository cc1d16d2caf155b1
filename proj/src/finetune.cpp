#include "art/finetune.hpp"

#include <algorithm>
#include <cmath>

namespace art {

GradientBlocks GradientBlocks::zeros(const ModelParams& m) {
    GradientBlocks g;
    g.depths = m.spec.L() + 1;
    g.npos = m.npos;
    g.coef.assign(static_cast<std::size_t>(g.depths * g.npos), 0.0);
    return g;
}

double GradientBlocks::stderr_at(int l, int j) const {
    if (var.empty() || n <= 0) return 0.0;
    return std::sqrt(var[static_cast<std::size_t>((l - 1) * npos + (j - 1))] / static_cast<double>(n));
}

Eigen::MatrixXd GradientBlocks::aggregate(const ModelParams& m) const {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(npos, npos);
    for (int l = 1; l <= depths; ++l) {
        int c = m.query_position(l);
        for (int j = 1; j <= npos; ++j) C(j - 1, c - 1) += at(l, j);
    }
    Eigen::MatrixXd Q = m.P.bottomRows(m.npos);
    return Q * C * Q.transpose();
}

double GradientBlocks::project(const ModelParams& m, const Eigen::MatrixXd& G, int l, int j) const {
    return m.pos(j).dot(G * m.pos(m.query_position(l)));
}

namespace {

// eta_l(k) for the legal set of one step, given the chosen index.
std::vector<double> step_eta(const ModelParams& m, const LegalDistribution& ld, int chosen) {
    const std::size_t n = ld.legal.size();
    // <p_k, sum_r pv(r) p_r> and <p_k, p_i>
    std::vector<double> mix(n, 0.0), hit(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t r = 0; r < n; ++r) mix[k] += ld.vocab[r] * m.gram(ld.legal[k], ld.legal[r]);
        hit[k] = m.gram(ld.legal[k], chosen);
    }
    double phat_hit = 0.0, phat_mix = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        phat_hit += ld.alpha[k] * hit[k];
        phat_mix += ld.alpha[k] * mix[k];
    }
    std::vector<double> eta(n);
    for (std::size_t k = 0; k < n; ++k) eta[k] = ((hit[k] - mix[k]) - (phat_hit - phat_mix)) / m.beta;
    return eta;
}

void check_on_policy(const LegalDistribution& ld, std::size_t k, double recorded) {
    double p = ld.vocab[k];
    if (std::abs(p - recorded) > 1e-9 * std::max(1.0, p))
        throw ContractError("off-policy trajectory: recorded step probability does not match the model");
}

}  // namespace

double log_prob(const ModelParams& m, const Trajectory& t) {
    double lp = 0.0;
    std::vector<int> vars;
    for (std::size_t s = 0; s < t.indices.size(); ++s) {
        int i = t.indices[s];
        if (!t.forced[s]) {
            auto ld = legal_distribution(m, vars, static_cast<int>(s) + 1);
            lp += std::log(ld.vocab[ld.find(i)]);
        }
        if (i != m.spec.eos_index()) vars.push_back(i);
    }
    return lp;
}

GradientBlocks score_gradient(const ModelParams& m, const Trajectory& t, int score_depth) {
    auto g = GradientBlocks::zeros(m);
    g.n = 1;
    std::vector<int> vars;
    for (std::size_t s = 0; s < t.indices.size(); ++s) {
        const int l = static_cast<int>(s) + 1;
        const int i = t.indices[s];
        if (!t.forced[s] && (score_depth <= 0 || l == score_depth)) {
            auto ld = legal_distribution(m, vars, l);
            std::size_t ki = ld.find(i);
            check_on_policy(ld, ki, t.step_probs[s]);
            auto eta = step_eta(m, ld, i);
            for (std::size_t k = 0; k < ld.legal.size(); ++k) g.at(l, ld.legal[k]) += ld.alpha[k] * eta[k];
        }
        if (i != m.spec.eos_index()) vars.push_back(i);
    }
    return g;
}

std::vector<double> eta_values(const ModelParams& m, const Trajectory& t, int l) {
    std::vector<int> vars(t.indices.begin(), t.indices.begin() + (l - 1));
    auto ld = legal_distribution(m, vars, l);
    return step_eta(m, ld, t.indices.at(l - 1));
}

ReinforceEstimate reinforce_estimate(const ModelParams& m, const SampleOptions& opt, std::int64_t n, Rng& rng,
                                     BudgetLedger* ledger) {
    if (n < 1) throw ContractError("reinforce_estimate needs n >= 1");
    const Oracle oracle{opt.oracle, &m.spec};
    ReinforceEstimate est;
    est.blocks = GradientBlocks::zeros(m);
    std::vector<double> sum(est.blocks.coef.size(), 0.0), sq(est.blocks.coef.size(), 0.0);
    double rsum = 0.0;
    RolloutStats stats;
    for (std::int64_t k = 0; k < n; ++k) {
        auto x = sample_input(m.spec, rng);
        auto t = rollout(m, x, opt.rollout, rng, ledger, &stats);
        int r = oracle(t, opt.family_depth);
        if (ledger) ledger->add_data(1);
        rsum += r;
        if (r == 0) continue;
        auto g = score_gradient(m, t, opt.score_depth);
        for (std::size_t b = 0; b < sum.size(); ++b) {
            sum[b] += g.coef[b];
            sq[b] += g.coef[b] * g.coef[b];
        }
    }
    const double dn = static_cast<double>(n);
    est.blocks.n = n;
    est.blocks.var.assign(sum.size(), 0.0);
    for (std::size_t b = 0; b < sum.size(); ++b) {
        double mean = sum[b] / dn;
        est.blocks.coef[b] = mean;
        if (n > 1) est.blocks.var[b] = std::max(0.0, (sq[b] - dn * mean * mean) / (dn - 1.0));
    }
    est.mean_reward = rsum / dn;
    est.discarded = stats.discarded;
    return est;
}

ExactGradient expected_gradient_exact(const ModelParams& m, const SampleOptions& opt, std::int64_t cap) {
    const auto& spec = m.spec;
    const auto xs = all_inputs(spec);
    // the rollout law does not depend on x; only rewards do
    auto paths = enumerate_model(m, std::vector<int>(spec.d(), 0), opt.rollout, cap);
    ExactGradient out;
    out.blocks = GradientBlocks::zeros(m);
    for (const auto& wp : paths) {
        const auto& t = wp.traj;
        const auto vars = t.vars();
        double er = 0.0;
        if (opt.oracle == OracleKind::ExactPath) {
            er = t.indices == spec.target_path ? 1.0 : 0.0;
        } else {
            const int depth = opt.family_depth < 0 ? t.depth() : opt.family_depth;
            for (const auto& x : xs) {
                int z = spec.eos_token();
                for (int i : vars) z = apply_kernel(spec, z, x[i - 1]);
                er += opt.oracle == OracleKind::Terminal ? terminal_reward(spec, x, z)
                                                         : family_reward(spec, x, z, depth);
            }
            er /= static_cast<double>(xs.size());
        }
        out.success += wp.weight * er;
        if (er == 0.0) continue;
        auto g = score_gradient(m, t, opt.score_depth);
        for (std::size_t b = 0; b < g.coef.size(); ++b) out.blocks.coef[b] += wp.weight * er * g.coef[b];
    }
    return out;
}

Threshold margin_threshold(int d_l, double beta, int M, double eps_l) {
    if (!(eps_l > 0.0 && eps_l < 1.0)) throw ContractError("eps_l must lie in (0,1)");
    Threshold th;
    th.alpha_req = 0.5 + 0.5 * beta * std::log(M * (1.0 - eps_l) / eps_l);
    if (th.alpha_req >= 1.0) return th;  // infeasible
    th.feasible = true;
    if (d_l <= 1) {
        th.gamma = -std::numeric_limits<double>::infinity();
        return th;
    }
    th.gamma = std::log((d_l - 1) / (1.0 / th.alpha_req - 1.0));
    return th;
}

const DepthMargin& MarginReport::at(int l) const {
    for (const auto& dm : depths)
        if (dm.depth == l) return dm;
    throw ContractError("no margin recorded for this depth");
}

MarginReport margin_report(const ModelParams& m, const GradientBlocks* blocks, double eps_l) {
    const auto& spec = m.spec;
    MarginReport rep;
    for (int l = 1; l <= spec.k_star() + 1; ++l) {
        auto vars = spec.prefix(l - 1);
        auto legal = legal_children(spec, vars, l);
        const int star = spec.target_path[l - 1];
        const int c = m.query_position(l);
        DepthMargin dm;
        dm.depth = l;
        dm.legal_size = static_cast<int>(legal.size());
        double best = -std::numeric_limits<double>::infinity();
        double best_c = -std::numeric_limits<double>::infinity();
        for (int j : legal) {
            if (j == star) continue;
            if (m.logit(j, c) > best) {
                best = m.logit(j, c);
                dm.runner_up = j;
            }
            if (blocks) best_c = std::max(best_c, blocks->at(l, j));
        }
        dm.delta = m.logit(star, c) - best;
        if (blocks) dm.gamma = blocks->at(l, star) - best_c;
        dm.threshold = margin_threshold(dm.legal_size, m.beta, spec.K() + 1, eps_l);
        rep.depths.push_back(dm);
    }
    return rep;
}

UpdateResult apply_update(const ModelParams& m, const GradientBlocks& blocks, double eta, double eps_l) {
    if (eta < 0.0) throw ContractError("learning rate must be nonnegative");
    UpdateResult out;
    out.params = m;
    out.params.W += eta * blocks.aggregate(m);
    out.params.refresh();
    double scale = 1.0;
    for (double c : blocks.coef) scale = std::max(scale, std::abs(eta * c));
    for (int l = 1; l <= blocks.depths; ++l) {
        int c = m.query_position(l);
        for (int j = 1; j <= m.npos; ++j) {
            double diff = out.params.logit(j, c) - m.logit(j, c) - eta * blocks.at(l, j);
            out.identity_error = std::max(out.identity_error, std::abs(diff));
        }
    }
    if (out.identity_error > 1e-10 * scale)
        throw std::logic_error("logit increments are not affine in W");
    out.report = margin_report(out.params, &blocks, eps_l);
    return out;
}

std::string to_string(Schedule s) {
    switch (s) {
        case Schedule::None: return "none";
        case Schedule::DepthIncreasing: return "depth";
        case Schedule::HintDecreasing: return "hint";
    }
    return "?";
}

Schedule schedule_from_string(const std::string& s) {
    if (s == "none") return Schedule::None;
    if (s == "depth") return Schedule::DepthIncreasing;
    if (s == "hint") return Schedule::HintDecreasing;
    throw ContractError("unknown schedule: " + s);
}

int schedule_stages(Schedule mode, const TaskSpec& spec) {
    return mode == Schedule::None ? 1 : spec.k_star() + 1;
}

void ScheduleConfig::validate(int stages) const {
    if (static_cast<int>(n.size()) != stages || static_cast<int>(eta.size()) != stages)
        throw ContractError("schedule needs one sample size and one rate per stage");
    for (auto v : n)
        if (v < 1) throw ContractError("stage sample size must be >= 1");
    for (auto v : eta)
        if (!(v > 0.0)) throw ContractError("stage learning rate must be > 0");
    if (!(eps > 0.0 && eps < 1.0)) throw ContractError("eps must lie in (0,1)");
    if (eval_inputs < 1) throw ContractError("eval_inputs must be >= 1");
}

ScheduleConfig theorem_scaled_config(Schedule mode, const TaskSpec& spec, double beta, double c_n, double c_eta) {
    const double d = spec.d();
    const double logd = std::log(d);
    const int stages = spec.k_star() + 1;
    const auto n_stage = static_cast<std::int64_t>(std::ceil(c_n * d * d * logd));
    ScheduleConfig cfg;
    cfg.mode = mode;
    if (mode == Schedule::None) {
        cfg.n = {n_stage * stages};
        cfg.eta = {c_eta * beta * logd * std::pow(d, spec.k_star() + 1)};
    } else {
        cfg.n.assign(stages, n_stage);
        cfg.eta.assign(stages, c_eta * beta * logd * d * d);
    }
    return cfg;
}

SampleOptions stage_options(Schedule mode, const TaskSpec& spec, int stage) {
    const int k = spec.k_star();
    SampleOptions o;
    switch (mode) {
        case Schedule::None:
            o.oracle = OracleKind::Terminal;
            break;
        case Schedule::DepthIncreasing:
            o.oracle = OracleKind::Family;
            o.rollout.truncate_at = stage <= k ? stage : -1;
            o.family_depth = std::min(stage, k);
            o.score_depth = stage;
            break;
        case Schedule::HintDecreasing: {
            const int hint = k + 1 - stage;
            o.oracle = OracleKind::Family;
            o.rollout.force_prefix = spec.prefix(hint);
            o.family_depth = k;
            o.score_depth = hint + 1;
            break;
        }
    }
    return o;
}

double terminal_accuracy(const ModelParams& m, std::int64_t n, Rng& rng) {
    std::int64_t hits = 0;
    for (std::int64_t k = 0; k < n; ++k) {
        auto x = sample_input(m.spec, rng);
        hits += terminal_reward(m.spec, rollout(m, x, {}, rng));
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

ScheduleResult run_schedule(const ModelParams& base, const ScheduleConfig& cfg, Rng& rng) {
    const auto& spec = base.spec;
    const int stages = schedule_stages(cfg.mode, spec);
    cfg.validate(stages);
    const double eps_l = cfg.eps / (spec.k_star() + 1);
    ScheduleResult res;
    res.params = base;
    std::vector<int> trained;
    for (int s = 1; s <= stages; ++s) {
        res.ledger.begin_stage("stage " + std::to_string(s));
        auto opt = stage_options(cfg.mode, spec, s);
        ReinforceEstimate est;
        try {
            est = reinforce_estimate(res.params, opt, cfg.n[s - 1], rng, &res.ledger);
        } catch (const BudgetExhausted& e) {
            throw BudgetExhausted("stage " + std::to_string(s) + ": " + e.what());
        }
        auto upd = apply_update(res.params, est.blocks, cfg.eta[s - 1], eps_l);
        res.params = upd.params;

        StageRecord rec;
        rec.stage = s;
        rec.n_used = cfg.n[s - 1];
        rec.discarded = est.discarded;
        rec.eta = cfg.eta[s - 1];
        if (cfg.mode == Schedule::None) {
            for (int l = 1; l <= spec.k_star() + 1; ++l) trained.push_back(l);
        } else {
            rec.trained_depth = opt.score_depth;
            trained.push_back(opt.score_depth);
        }
        rec.delta_min = std::numeric_limits<double>::infinity();
        rec.gamma_hat = std::numeric_limits<double>::infinity();
        rec.margins_met = true;
        for (int l : trained) {
            const auto& dm = upd.report.at(l);
            rec.delta_min = std::min(rec.delta_min, dm.delta);
            rec.margins_met = rec.margins_met && dm.threshold.feasible && dm.delta >= dm.threshold.gamma;
        }
        if (cfg.mode == Schedule::None) {
            for (const auto& dm : upd.report.depths) rec.gamma_hat = std::min(rec.gamma_hat, dm.gamma);
        } else {
            rec.gamma_hat = upd.report.at(opt.score_depth).gamma;
        }
        rec.t_data = res.ledger.stages().back().t_data;
        rec.t_comp = res.ledger.stages().back().t_comp;
        res.stages.push_back(rec);
        res.reports.push_back(upd.report);
    }
    res.accuracy = terminal_accuracy(res.params, cfg.eval_inputs, rng);
    res.stages.back().accuracy = res.accuracy;
    return res;
}

}  // namespace art
