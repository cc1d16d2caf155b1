#pragma once
// Two-state autoregressive reasoning trees: task definition, the uniform
// reference policy (PART), exact enumeration, pass rates and coverage.
//
// Conventions used throughout:
//   tokens  0..K-1 are dictionary values, token K is EOS;
//   indices 1..d address the input, index d+1 is EOS;
//   z_0 = EOS and z_l = Phi(z_{l-1}, x_{i_l}).

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace art {

using Rng = std::mt19937_64;

// Contract / domain failures surface as this type so callers can tell them
// apart from I/O problems.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

enum class KernelId { Xor, Copy, MarkovChain, CausalMap };
enum class SelectorId { StrictlyIncreasing, UniformSimplified };

std::string to_string(KernelId k);
std::string to_string(SelectorId s);
KernelId kernel_from_string(const std::string& s);
SelectorId selector_from_string(const std::string& s);

struct TaskSpec {
    int dict_size = 2;  // K
    int input_len = 4;  // d
    int depth_bound = 2;  // L
    KernelId kernel = KernelId::Xor;
    std::vector<int> kernel_table;  // phi for MarkovChain / CausalMap, size K
    SelectorId selector = SelectorId::StrictlyIncreasing;
    std::vector<int> target_path;  // i_1..i_k*, d+1
    bool eos_at_root = false;

    int K() const { return dict_size; }
    int d() const { return input_len; }
    int L() const { return depth_bound; }
    int eos_index() const { return input_len + 1; }
    int eos_token() const { return dict_size; }
    int k_star() const { return static_cast<int>(target_path.size()) - 1; }
    // non-EOS part of the target
    std::vector<int> target_vars() const;
    // S^l without its EOS
    std::vector<int> prefix(int l) const;

    void validate() const;
};

// Parity task with strictly increasing selector; target given without EOS.
TaskSpec parity_task(int d, int L, std::vector<int> target_vars, bool eos_at_root = false);

void to_json(nlohmann::json& j, const TaskSpec& s);
void from_json(const nlohmann::json& j, TaskSpec& s);

// Phi_l(z, v) for a dictionary value v. EOS absorption is handled by the
// caller (choosing EOS terminates).
int apply_kernel(const TaskSpec& spec, int z, int v);

struct Trajectory {
    std::vector<int> x;
    std::vector<int> indices;       // i_1..i_T
    std::vector<int> states;        // z_1..z_T (z_T = EOS token once terminated)
    std::vector<double> step_probs; // selection probability of each step
    std::vector<char> forced;       // step pinned externally (hint / appended EOS)
    int eos_step = 0;               // T, 0 while unterminated

    bool terminated() const { return eos_step > 0; }
    // realized termination depth r (number of variable steps)
    int depth() const;
    // pre-EOS state z_r; EOS token when r = 0
    int final_state(int eos_token) const;
    double prob() const;
    std::vector<int> vars() const;  // indices without the EOS
};

// Legal children at depth l after the variable prefix `vars` (l = |vars|+1).
std::vector<int> legal_children(const TaskSpec& spec, const std::vector<int>& vars, int l);

// Extend a trajectory by choosing `index` with probability `p`.
void push_step(const TaskSpec& spec, Trajectory& t, int index, double p, bool forced = false);

std::vector<int> sample_input(const TaskSpec& spec, Rng& rng);

// Every x in [K]^d (small instances only).
std::vector<std::vector<int>> all_inputs(const TaskSpec& spec);

Trajectory part_sample(const TaskSpec& spec, const std::vector<int>& x, Rng& rng);

constexpr std::int64_t kEnumerationCap = 10'000'000;

struct EnumerationCapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every legal CoT with its PART probability (states evaluated on x).
std::vector<Trajectory> enumerate_trajectories(const TaskSpec& spec, const std::vector<int>& x,
                                               std::int64_t cap = kEnumerationCap);

// CSV dump with columns indices,prob,final_state.
std::string enumeration_csv(const TaskSpec& spec, const std::vector<Trajectory>& ts);

// Probability that PART emits exactly `vars` then EOS.
double pass_rate_exact(const TaskSpec& spec, const std::vector<int>& vars);

struct Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::int64_t n = 0;
};

Estimate pass_rate_mc(const TaskSpec& spec, const std::vector<int>& vars, std::int64_t n, Rng& rng);

// A policy that pins a prefix (and optionally the EOS right after it) and
// copies PART elsewhere. The empty policy is PART itself.
struct PathPolicy {
    std::vector<int> forced;
    bool force_eos = false;

    static PathPolicy part() { return {}; }
    static PathPolicy subtask(std::vector<int> vars) { return {std::move(vars), true}; }
    // probability of an EOS-terminated path
    double prob(const TaskSpec& spec, const std::vector<int>& path) const;
};

// sup over legal paths of num(path)/den(path).
double coverage_coefficient(const TaskSpec& spec, const PathPolicy& num, const PathPolicy& den,
                            std::int64_t cap = kEnumerationCap);

struct CurriculumAnalysis {
    std::vector<double> stage_coverage;
    double total_coverage = 0.0;
    double direct_cost = 0.0;
    double curriculum_cost = 0.0;
    double ratio() const { return curriculum_cost / direct_cost; }
};

// Chain PART -> pin i_1 -> ... -> pin i_1..i_l -> pi_{S^l}; stage values are
// the successive sup ratios and multiply to ||pi_{S^l}/PART||.
CurriculumAnalysis curriculum_chain(const TaskSpec& spec, int l);

CurriculumAnalysis curriculum_vs_direct(const std::vector<double>& stage_coverage, double total_coverage);

// e_{k'}(1, 1/2, .., 1/d) / (d * C(d, k'))
double expected_random_task_pass_rate(int d, int k);

double binomial(int n, int k);


}  // namespace art
