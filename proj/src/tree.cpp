#include "art/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace art {

std::string to_string(KernelId k) {
    switch (k) {
        case KernelId::Xor: return "Xor";
        case KernelId::Copy: return "Copy";
        case KernelId::MarkovChain: return "MarkovChain";
        case KernelId::CausalMap: return "CausalMap";
    }
    return "?";
}

std::string to_string(SelectorId s) {
    return s == SelectorId::StrictlyIncreasing ? "StrictlyIncreasing" : "UniformSimplified";
}

KernelId kernel_from_string(const std::string& s) {
    for (auto k : {KernelId::Xor, KernelId::Copy, KernelId::MarkovChain, KernelId::CausalMap})
        if (to_string(k) == s) return k;
    throw ContractError("unknown kernel: " + s);
}

SelectorId selector_from_string(const std::string& s) {
    if (s == "StrictlyIncreasing") return SelectorId::StrictlyIncreasing;
    if (s == "UniformSimplified") return SelectorId::UniformSimplified;
    throw ContractError("unknown selector: " + s);
}

std::vector<int> TaskSpec::target_vars() const {
    if (target_path.empty()) return {};
    return {target_path.begin(), target_path.end() - 1};
}

std::vector<int> TaskSpec::prefix(int l) const {
    if (l < 0 || l > k_star()) throw ContractError("prefix length out of range");
    return {target_path.begin(), target_path.begin() + l};
}

void TaskSpec::validate() const {
    if (dict_size < 1) throw ContractError("dict_size must be positive");
    if (input_len < 1) throw ContractError("input_len must be positive");
    if (depth_bound < 1) throw ContractError("depth_bound must be positive");
    if (kernel == KernelId::Xor && dict_size != 2) throw ContractError("Xor kernel needs K = 2");
    if (kernel == KernelId::MarkovChain || kernel == KernelId::CausalMap) {
        if (static_cast<int>(kernel_table.size()) != dict_size)
            throw ContractError("kernel_table must have K entries");
        for (int v : kernel_table)
            if (v < 0 || v >= dict_size) throw ContractError("kernel_table entry outside [K]");
    }
    if (target_path.empty() || target_path.back() != eos_index())
        throw ContractError("target_path must end with the EOS index d+1");
    if (k_star() > depth_bound) throw ContractError("target longer than depth bound");
    if (k_star() == 0 && !eos_at_root) throw ContractError("empty target needs eos_at_root");
    for (int m = 0; m < k_star(); ++m) {
        int i = target_path[m];
        if (i < 1 || i > input_len) throw ContractError("target index outside [d]");
        if (selector == SelectorId::StrictlyIncreasing && m > 0 && i <= target_path[m - 1])
            throw ContractError("target not strictly increasing");
    }
}

TaskSpec parity_task(int d, int L, std::vector<int> target_vars, bool eos_at_root) {
    TaskSpec s;
    s.dict_size = 2;
    s.input_len = d;
    s.depth_bound = L;
    s.kernel = KernelId::Xor;
    s.selector = SelectorId::StrictlyIncreasing;
    s.target_path = std::move(target_vars);
    s.target_path.push_back(d + 1);
    s.eos_at_root = eos_at_root;
    s.validate();
    return s;
}

void to_json(nlohmann::json& j, const TaskSpec& s) {
    j = nlohmann::json{{"dict_size", s.dict_size},
                       {"input_len", s.input_len},
                       {"depth_bound", s.depth_bound},
                       {"kernel", to_string(s.kernel)},
                       {"kernel_table", s.kernel_table},
                       {"selector", to_string(s.selector)},
                       {"target_path", s.target_path},
                       {"eos_at_root", s.eos_at_root}};
}

void from_json(const nlohmann::json& j, TaskSpec& s) {
    s.dict_size = j.at("dict_size").get<int>();
    s.input_len = j.at("input_len").get<int>();
    s.depth_bound = j.at("depth_bound").get<int>();
    s.kernel = kernel_from_string(j.at("kernel").get<std::string>());
    s.kernel_table = j.value("kernel_table", std::vector<int>{});
    s.selector = selector_from_string(j.value("selector", std::string("StrictlyIncreasing")));
    s.target_path = j.at("target_path").get<std::vector<int>>();
    s.eos_at_root = j.value("eos_at_root", false);
    s.validate();
}

int apply_kernel(const TaskSpec& spec, int z, int v) {
    const int eos = spec.eos_token();
    switch (spec.kernel) {
        case KernelId::Xor: return z == eos ? v : (z ^ v);
        case KernelId::Copy: return v;
        case KernelId::MarkovChain: return z == eos ? v : spec.kernel_table[z];
        case KernelId::CausalMap: return spec.kernel_table[v];
    }
    return v;
}

int Trajectory::depth() const {
    return terminated() ? eos_step - 1 : static_cast<int>(indices.size());
}

int Trajectory::final_state(int eos_token) const {
    int r = depth();
    return r == 0 ? eos_token : states[r - 1];
}

double Trajectory::prob() const {
    double p = 1.0;
    for (double q : step_probs) p *= q;
    return p;
}

std::vector<int> Trajectory::vars() const {
    return {indices.begin(), indices.begin() + depth()};
}

std::vector<int> legal_children(const TaskSpec& spec, const std::vector<int>& vars, int l) {
    if (l < 1 || l > spec.L() + 1) throw ContractError("depth beyond L+1");
    if (static_cast<int>(vars.size()) != l - 1) throw ContractError("prefix length does not match depth");
    const int d = spec.d();
    std::vector<int> out;
    if (l == spec.L() + 1) return {d + 1};
    if (spec.selector == SelectorId::UniformSimplified) {
        for (int j = 1; j <= d - l + 1; ++j) out.push_back(j);
        if (out.empty()) out.push_back(d + 1);
        return out;
    }
    int first = vars.empty() ? 1 : vars.back() + 1;
    for (int j = first; j <= d; ++j) out.push_back(j);
    if (l > 1 || spec.eos_at_root) out.push_back(d + 1);
    return out;
}

void push_step(const TaskSpec& spec, Trajectory& t, int index, double p, bool forced) {
    if (t.terminated()) throw ContractError("step after EOS");
    t.indices.push_back(index);
    t.step_probs.push_back(p);
    t.forced.push_back(forced ? 1 : 0);
    if (index == spec.eos_index()) {
        t.states.push_back(spec.eos_token());
        t.eos_step = static_cast<int>(t.indices.size());
    } else {
        int z = t.states.empty() ? spec.eos_token() : t.states.back();
        t.states.push_back(apply_kernel(spec, z, t.x.at(index - 1)));
    }
}

std::vector<int> sample_input(const TaskSpec& spec, Rng& rng) {
    std::uniform_int_distribution<int> u(0, spec.K() - 1);
    std::vector<int> x(spec.d());
    for (auto& v : x) v = u(rng);
    return x;
}

std::vector<std::vector<int>> all_inputs(const TaskSpec& spec) {
    double count = std::pow(static_cast<double>(spec.K()), spec.d());
    if (count > static_cast<double>(1 << 20)) throw EnumerationCapError("input space too large for enumeration");
    std::vector<std::vector<int>> xs;
    std::vector<int> x(spec.d(), 0);
    while (true) {
        xs.push_back(x);
        int p = 0;
        while (p < spec.d() && ++x[p] == spec.K()) x[p++] = 0;
        if (p == spec.d()) break;
    }
    return xs;
}

Trajectory part_sample(const TaskSpec& spec, const std::vector<int>& x, Rng& rng) {
    Trajectory t;
    t.x = x;
    std::vector<int> vars;
    for (int l = 1; !t.terminated(); ++l) {
        auto legal = legal_children(spec, vars, l);
        std::uniform_int_distribution<std::size_t> u(0, legal.size() - 1);
        int i = legal[u(rng)];
        push_step(spec, t, i, 1.0 / static_cast<double>(legal.size()));
        if (i != spec.eos_index()) vars.push_back(i);
    }
    return t;
}

namespace {

void enumerate_rec(const TaskSpec& spec, Trajectory& t, std::vector<int>& vars,
                   std::vector<Trajectory>& out, std::int64_t cap) {
    int l = static_cast<int>(vars.size()) + 1;
    auto legal = legal_children(spec, vars, l);
    double p = 1.0 / static_cast<double>(legal.size());
    for (int i : legal) {
        Trajectory next = t;
        push_step(spec, next, i, p);
        if (next.terminated()) {
            if (static_cast<std::int64_t>(out.size()) >= cap)
                throw EnumerationCapError("instance too large for enumeration");
            out.push_back(std::move(next));
        } else {
            vars.push_back(i);
            enumerate_rec(spec, next, vars, out, cap);
            vars.pop_back();
        }
    }
}

}  // namespace

std::vector<Trajectory> enumerate_trajectories(const TaskSpec& spec, const std::vector<int>& x,
                                               std::int64_t cap) {
    if (static_cast<int>(x.size()) != spec.d()) throw ContractError("input length mismatch");
    std::vector<Trajectory> out;
    Trajectory root;
    root.x = x;
    std::vector<int> vars;
    enumerate_rec(spec, root, vars, out, cap);
    return out;
}

std::string enumeration_csv(const TaskSpec& spec, const std::vector<Trajectory>& ts) {
    std::ostringstream os;
    os.precision(17);
    os << "indices,prob,final_state\n";
    for (const auto& t : ts) {
        for (std::size_t k = 0; k < t.indices.size(); ++k) os << (k ? " " : "") << t.indices[k];
        os << ',' << t.prob() << ',' << t.final_state(spec.eos_token()) << '\n';
    }
    return os.str();
}

double pass_rate_exact(const TaskSpec& spec, const std::vector<int>& vars) {
    double p = 1.0;
    std::vector<int> pre;
    for (std::size_t s = 0; s <= vars.size(); ++s) {
        int want = s < vars.size() ? vars[s] : spec.eos_index();
        auto legal = legal_children(spec, pre, static_cast<int>(s) + 1);
        if (std::find(legal.begin(), legal.end(), want) == legal.end())
            throw ContractError("prefix is not a legal path");
        p *= 1.0 / static_cast<double>(legal.size());
        pre.push_back(want);
    }
    return p;
}

Estimate pass_rate_mc(const TaskSpec& spec, const std::vector<int>& vars, std::int64_t n, Rng& rng) {
    if (n <= 0) throw ContractError("Monte Carlo pass rate needs N > 0");
    std::vector<int> x(spec.d(), 0);
    std::int64_t hits = 0;
    for (std::int64_t k = 0; k < n; ++k) {
        auto t = part_sample(spec, x, rng);
        if (t.vars() == vars) ++hits;
    }
    Estimate e;
    e.n = n;
    e.mean = static_cast<double>(hits) / static_cast<double>(n);
    e.stderr_ = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(n));
    return e;
}

double PathPolicy::prob(const TaskSpec& spec, const std::vector<int>& path) const {
    double p = 1.0;
    std::vector<int> pre;
    for (std::size_t s = 0; s < path.size(); ++s) {
        int c = path[s];
        if (s < forced.size()) {
            if (c != forced[s]) return 0.0;
        } else if (force_eos && s == forced.size()) {
            if (c != spec.eos_index()) return 0.0;
        } else {
            auto legal = legal_children(spec, pre, static_cast<int>(s) + 1);
            p *= 1.0 / static_cast<double>(legal.size());
        }
        pre.push_back(c);
    }
    return p;
}

double coverage_coefficient(const TaskSpec& spec, const PathPolicy& num, const PathPolicy& den,
                            std::int64_t cap) {
    auto paths = enumerate_trajectories(spec, std::vector<int>(spec.d(), 0), cap);
    double sup = 0.0;
    for (const auto& t : paths) {
        double pn = num.prob(spec, t.indices);
        if (pn == 0.0) continue;
        double pd = den.prob(spec, t.indices);
        if (pd == 0.0) {
            std::ostringstream os;
            os << "not absolutely continuous: witness path (";
            for (std::size_t k = 0; k < t.indices.size(); ++k) os << (k ? "," : "") << t.indices[k];
            os << ")";
            throw ContractError(os.str());
        }
        sup = std::max(sup, pn / pd);
    }
    return sup;
}

CurriculumAnalysis curriculum_chain(const TaskSpec& spec, int l) {
    auto vars = spec.prefix(l);
    std::vector<PathPolicy> chain{PathPolicy::part()};
    for (int s = 1; s <= l; ++s) chain.push_back(PathPolicy{spec.prefix(s), false});
    chain.push_back(PathPolicy::subtask(vars));
    std::vector<double> stages;
    for (std::size_t s = 1; s < chain.size(); ++s)
        stages.push_back(coverage_coefficient(spec, chain[s], chain[s - 1]));
    double total = coverage_coefficient(spec, chain.back(), chain.front());
    return curriculum_vs_direct(stages, total);
}

CurriculumAnalysis curriculum_vs_direct(const std::vector<double>& stage_coverage, double total_coverage) {
    CurriculumAnalysis a;
    a.stage_coverage = stage_coverage;
    a.total_coverage = total_coverage;
    a.direct_cost = total_coverage;
    a.curriculum_cost = 0.0;
    for (double c : stage_coverage) a.curriculum_cost += c;
    return a;
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

double expected_random_task_pass_rate(int d, int k) {
    if (d < 1 || k < 1 || k > d) throw ContractError("expected pass rate needs 1 <= k' <= d");
    std::vector<double> e(k + 1, 0.0);
    e[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
        double w = 1.0 / j;
        for (int t = std::min(j, k); t >= 1; --t) e[t] += w * e[t - 1];
    }
    return e[k] / (d * binomial(d, k));
}

}  // namespace art
