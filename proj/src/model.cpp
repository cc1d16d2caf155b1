#include "art/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace art {

namespace {

std::vector<double> softmax(const std::vector<double>& s) {
    double mx = *std::max_element(s.begin(), s.end());
    std::vector<double> p(s.size());
    double z = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) z += (p[k] = std::exp(s[k] - mx));
    for (auto& v : p) v /= z;
    return p;
}

}  // namespace

std::size_t sample_categorical(const std::vector<double>& p, Rng& rng) {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u < acc) return k;
    }
    // rounding left u above the total; take the last positive entry
    for (std::size_t k = p.size(); k-- > 0;)
        if (p[k] > 0.0) return k;
    return p.size() - 1;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
    std::vector<double> v(a.data(), a.data() + a.size());
    return {{"rows", a.rows()}, {"cols", a.cols()}, {"data", v}};
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
    auto r = j.at("rows").get<Eigen::Index>();
    auto c = j.at("cols").get<Eigen::Index>();
    auto v = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != r * c) throw ContractError("checkpoint matrix size mismatch");
    return Eigen::Map<Eigen::MatrixXd>(v.data(), r, c);
}

}  // namespace

void model_push(const ModelParams& m, Trajectory& t, int index, double p, bool forced) {
    const auto& spec = m.spec;
    t.indices.push_back(index);
    t.step_probs.push_back(p);
    t.forced.push_back(forced ? 1 : 0);
    if (index == spec.eos_index()) {
        t.states.push_back(spec.eos_token());
        t.eos_step = static_cast<int>(t.indices.size());
        return;
    }
    int prev = t.states.empty() ? spec.eos_token() : t.states.back();
    auto e = apply_ffn(m, token_embedding(m, t.x.at(index - 1)), token_embedding(m, prev));
    t.states.push_back(decode_token(m, e));
}

void ModelParams::refresh() {
    Eigen::MatrixXd Q = P.bottomRows(npos);
    table_ = Q.transpose() * W * Q;
    gram_ = Q.transpose() * Q;
    identity_bank_ = (Q.array() == Eigen::MatrixXd::Identity(npos, npos).array()).all();
}

ModelParams build_base_model(const TaskSpec& spec, double beta, std::optional<std::uint64_t> bank_seed) {
    spec.validate();
    if (!(beta > 0.0)) throw ContractError("beta must be positive");
    ModelParams m;
    m.spec = spec;
    m.dx = spec.K() + 1;
    m.npos = spec.d() + 1 + spec.L();
    m.beta = beta;
    m.U = Eigen::MatrixXd::Zero(m.dE(), m.dx);
    m.U.topRows(m.dx).setIdentity();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(m.npos, m.npos);
    if (bank_seed) {
        Rng rng(*bank_seed);
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::MatrixXd A(m.npos, m.npos);
        for (Eigen::Index k = 0; k < A.size(); ++k) A.data()[k] = g(rng);
        Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ();
    }
    m.P = Eigen::MatrixXd::Zero(m.dE(), m.npos);
    m.P.bottomRows(m.npos) = Q;
    m.W = Eigen::MatrixXd::Zero(m.npos, m.npos);
    m.refresh();
    return m;
}

void to_json(nlohmann::json& j, const ModelParams& m) {
    j = nlohmann::json{{"spec", m.spec},
                       {"kernel", to_string(m.spec.kernel)},
                       {"mask", {{"selector", to_string(m.spec.selector)},
                                 {"eos_at_root", m.spec.eos_at_root},
                                 {"depth_bound", m.spec.L()}}},
                       {"beta", m.beta},
                       {"U", matrix_json(m.U)},
                       {"P", matrix_json(m.P)},
                       {"W", matrix_json(m.W)}};
}

void from_json(const nlohmann::json& j, ModelParams& m) {
    m.spec = j.at("spec").get<TaskSpec>();
    m.beta = j.at("beta").get<double>();
    m.dx = m.spec.K() + 1;
    m.npos = m.spec.d() + 1 + m.spec.L();
    m.U = matrix_from(j.at("U"));
    m.P = matrix_from(j.at("P"));
    m.W = matrix_from(j.at("W"));
    if (m.U.rows() != m.dE() || m.P.cols() != m.npos || m.W.rows() != m.npos)
        throw ContractError("checkpoint shape does not match spec");
    m.refresh();
}

void save_checkpoint(const ModelParams& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << nlohmann::json(m).dump();
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    return nlohmann::json::parse(f).get<ModelParams>();
}

std::size_t LegalDistribution::find(int j) const {
    auto it = std::find(legal.begin(), legal.end(), j);
    if (it == legal.end()) throw ContractError("index not legal at this depth");
    return static_cast<std::size_t>(it - legal.begin());
}

LegalDistribution legal_distribution(const ModelParams& m, const std::vector<int>& vars, int l) {
    LegalDistribution ld;
    ld.depth = l;
    ld.query = m.query_position(l);
    ld.legal = legal_children(m.spec, vars, l);
    std::vector<double> s(ld.legal.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        s[k] = m.logit(ld.legal[k], ld.query);
        if (!std::isfinite(s[k])) throw std::runtime_error("non-finite attention logit");
    }
    ld.alpha = softmax(s);
    // <p-hat, p_r> / beta for every legal r
    std::vector<double> v(ld.legal.size());
    for (std::size_t r = 0; r < v.size(); ++r) {
        double ip = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) ip += ld.alpha[k] * m.gram(ld.legal[k], ld.legal[r]);
        v[r] = ip / m.beta;
    }
    ld.vocab = softmax(v);
    return ld;
}

Eigen::Vector3d ffn_xor(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    auto on_vocab = [](const Eigen::Vector3d& v) {
        for (int k = 0; k < 3; ++k)
            if ((v - Eigen::Vector3d::Unit(k)).norm() <= 1e-8) return true;
        return false;
    };
    if (!on_vocab(a) || !on_vocab(b)) throw ContractError("ffn_xor input is not a vocabulary embedding");
    Eigen::Matrix3d W1;
    W1 << 0.5, 0.5, 0.5,
          0.0, 1.0, 0.0,
         -0.5, 0.5, -0.5;
    Eigen::Matrix3d W2;
    W2 << 1.0, -1.0, 2.0,
          0.0, 1.0, -2.0,
          0.0, 0.0, 0.0;
    Eigen::Vector3d h = (W1 * (a + b)).cwiseMax(0.0);
    return W2 * h;
}

Eigen::VectorXd token_embedding(const ModelParams& m, int token) {
    if (token < 0 || token >= m.dx) throw ContractError("token outside vocabulary");
    return m.U.col(token).head(m.dx);
}

int decode_token(const ModelParams& m, const Eigen::VectorXd& e) {
    for (int t = 0; t < m.dx; ++t)
        if ((e - m.U.col(t).head(m.dx)).norm() <= 1e-8) return t;
    throw ContractError("embedding is not a vocabulary column");
}

Eigen::VectorXd apply_ffn(const ModelParams& m, const Eigen::VectorXd& value, const Eigen::VectorXd& state) {
    if (m.spec.kernel == KernelId::Xor) return ffn_xor(value, state);
    switch (m.spec.kernel) {
        case KernelId::Copy:
        case KernelId::MarkovChain:
        case KernelId::CausalMap: {
            int v = decode_token(m, value);
            int z = decode_token(m, state);
            return token_embedding(m, apply_kernel(m.spec, z, v));
        }
        default: throw ContractError("unsupported kernel");
    }
}

StepDistribution forward_step(const ModelParams& m, const std::vector<int>& x, const std::vector<int>& vars,
                              int prev_state, int l, Rng& rng) {
    auto ld = legal_distribution(m, vars, l);
    StepDistribution sd;
    sd.depth = l;
    sd.query = ld.query;
    sd.legal = ld.legal;
    sd.logits = Eigen::VectorXd::Constant(m.npos, 0.0);
    sd.alpha = Eigen::VectorXd::Zero(m.npos);
    sd.vocab = Eigen::VectorXd::Zero(m.npos);
    for (int j = 1; j <= m.npos; ++j) sd.logits(j - 1) = m.logit(j, ld.query) + kMaskSentinel;
    for (std::size_t k = 0; k < ld.legal.size(); ++k) {
        int j = ld.legal[k];
        sd.logits(j - 1) = m.logit(j, ld.query);
        sd.alpha(j - 1) = ld.alpha[k];
        sd.vocab(j - 1) = ld.vocab[k];
    }
    sd.pooled = m.P * sd.alpha;
    sd.index = ld.legal[sample_categorical(ld.vocab, rng)];
    if (sd.index == m.spec.eos_index()) {
        sd.eos = true;
        sd.token = m.spec.eos_token();
        sd.state = token_embedding(m, sd.token);
    } else {
        sd.token = x.at(sd.index - 1);
        sd.state = apply_ffn(m, token_embedding(m, sd.token), token_embedding(m, prev_state));
    }
    return sd;
}

namespace {

// Sample steps until EOS or until depth `stop` has been sampled; returns false
// when EOS arrived at a depth <= discard_upto.
bool sample_until(const ModelParams& m, Trajectory& t, int stop, int discard_upto, Rng& rng,
                  BudgetLedger* ledger, RolloutStats* stats) {
    std::vector<int> vars = t.vars();
    while (!t.terminated() && static_cast<int>(t.indices.size()) < stop) {
        int l = static_cast<int>(t.indices.size()) + 1;
        auto ld = legal_distribution(m, vars, l);
        std::size_t k = sample_categorical(ld.vocab, rng);
        int i = ld.legal[k];
        if (ledger) ledger->add_comp(1);
        if (stats) ++stats->emitted;
        model_push(m, t, i, ld.vocab[k], false);
        if (i == m.spec.eos_index()) return l > discard_upto;
        vars.push_back(i);
    }
    return true;
}

void check_forced(const ModelParams& m, const std::vector<int>& prefix) {
    std::vector<int> vars;
    for (std::size_t s = 0; s < prefix.size(); ++s) {
        auto legal = legal_children(m.spec, vars, static_cast<int>(s) + 1);
        if (std::find(legal.begin(), legal.end(), prefix[s]) == legal.end())
            throw ContractError("forced prefix is not a legal path");
        if (prefix[s] == m.spec.eos_index() && s + 1 != prefix.size())
            throw ContractError("forced prefix continues after EOS");
        vars.push_back(prefix[s]);
    }
}

}  // namespace

Trajectory rollout(const ModelParams& m, const std::vector<int>& x, const RolloutOptions& opt, Rng& rng,
                   BudgetLedger* ledger, RolloutStats* stats) {
    const int max_len = opt.max_len < 0 ? m.spec.L() + 1 : opt.max_len;
    if (opt.truncate_at >= 0 && opt.truncate_at > max_len) throw ContractError("truncate_at exceeds max_len");
    if (static_cast<int>(x.size()) != m.spec.d()) throw ContractError("input length mismatch");
    check_forced(m, opt.force_prefix);
    const int nforce = static_cast<int>(opt.force_prefix.size());
    for (std::int64_t attempt = 0; attempt <= opt.retry_cap; ++attempt) {
        Trajectory t;
        t.x = x;
        for (int s = 0; s < nforce && !t.terminated(); ++s) model_push(m, t, opt.force_prefix[s], 1.0, true);
        if (opt.truncate_at < 0) {
            sample_until(m, t, max_len, 0, rng, ledger, stats);
            if (!t.terminated()) throw ContractError("rollout exceeded max_len");
            return t;
        }
        if (t.terminated() || sample_until(m, t, opt.truncate_at, opt.truncate_at, rng, ledger, stats)) {
            if (!t.terminated()) model_push(m, t, m.spec.eos_index(), 1.0, true);
            return t;
        }
        if (stats) ++stats->discarded;
    }
    throw BudgetExhausted("truncation discard loop exceeded retry cap");
}

void continue_rollout(const ModelParams& m, Trajectory& t, Rng& rng, BudgetLedger* ledger) {
    sample_until(m, t, m.spec.L() + 1, 0, rng, ledger, nullptr);
    if (!t.terminated()) throw ContractError("rollout exceeded depth bound");
}

namespace {

void enum_model_rec(const ModelParams& m, Trajectory& t, const RolloutOptions& opt,
                    std::vector<Trajectory>& out, double& kept, std::int64_t cap) {
    const int l = static_cast<int>(t.indices.size()) + 1;
    auto emit = [&](Trajectory&& done) {
        if (static_cast<std::int64_t>(out.size()) >= cap)
            throw EnumerationCapError("instance too large for enumeration");
        kept += done.prob();
        out.push_back(std::move(done));
    };
    if (l <= static_cast<int>(opt.force_prefix.size())) {
        Trajectory n = t;
        model_push(m, n, opt.force_prefix[l - 1], 1.0, true);
        if (n.terminated()) emit(std::move(n));
        else enum_model_rec(m, n, opt, out, kept, cap);
        return;
    }
    if (opt.truncate_at >= 0 && l == opt.truncate_at + 1) {
        Trajectory n = t;
        model_push(m, n, m.spec.eos_index(), 1.0, true);
        emit(std::move(n));
        return;
    }
    auto ld = legal_distribution(m, t.vars(), l);
    for (std::size_t k = 0; k < ld.legal.size(); ++k) {
        if (ld.vocab[k] == 0.0) continue;
        int i = ld.legal[k];
        if (i == m.spec.eos_index() && opt.truncate_at >= 0 && l <= opt.truncate_at) continue;
        Trajectory n = t;
        model_push(m, n, i, ld.vocab[k], false);
        if (n.terminated()) emit(std::move(n));
        else enum_model_rec(m, n, opt, out, kept, cap);
    }
}

}  // namespace

std::vector<WeightedPath> enumerate_model(const ModelParams& m, const std::vector<int>& x,
                                         const RolloutOptions& opt, std::int64_t cap) {
    check_forced(m, opt.force_prefix);
    std::vector<Trajectory> paths;
    Trajectory root;
    root.x = x;
    double kept = 0.0;
    enum_model_rec(m, root, opt, paths, kept, cap);
    if (kept <= 0.0) throw BudgetExhausted("every path is discarded by truncation");
    // with truncation, weights are conditional on surviving the discard rule
    std::vector<WeightedPath> out;
    out.reserve(paths.size());
    for (auto& t : paths) {
        double w = t.prob() / kept;
        out.push_back({std::move(t), w});
    }
    return out;
}

}  // namespace art
