#pragma once
// Experiment orchestration: configs, the named verification suites, a small
// worker pool, a wall-clock guard and CSV / JSON emission.

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "art/stats.hpp"

namespace art {

struct ExperimentConfig {
    std::string suite;
    std::vector<int> d;
    std::vector<int> k;
    std::vector<int> d_bai;  // second d grid (terminal-oracle search)
    std::vector<double> beta{0.1};
    std::vector<double> delta{0.1};
    std::vector<double> eps{0.1};
    std::vector<std::uint64_t> seeds;
    std::int64_t samples = 0;  // suite-specific Monte Carlo size (0: suite default)
    // budget multipliers
    double c_n = 4.0;
    double c_eta = 8.0;
    double c_bai = 2.0;
    double c_ltar = 1.0 / 64.0;
    std::string out_dir = "results";
    int workers = 0;               // 0: LAB_WORKERS or hardware concurrency
    double wall_limit_sec = 900.0;

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);

// Suite names in criterion order; suite i checks criterion i+1.
const std::vector<std::string>& suite_names();
int suite_criterion(const std::string& suite);
ExperimentConfig default_config(const std::string& suite);

struct CriterionResult {
    int id = 0;
    std::string suite;
    bool pass = false;
    std::vector<std::string> checks;  // "PASS|FAIL <what>" lines
    std::string summary;
};

struct SlopeRecord {
    std::string quantity;
    SlopeFit fit;
    double target = 0.0;
    double tol = 0.0;
    bool pass = false;
    bool informational = false;
};

struct SuiteResult {
    CriterionResult criterion;
    std::vector<SlopeRecord> fits;
    std::vector<std::string> files;
    bool aborted = false;
    double wall_sec = 0.0;
};

// Runs one named suite and writes its CSV files under cfg.out_dir.
SuiteResult run_suite(const ExperimentConfig& cfg);

// JSON record: config echo, per-check outcomes, fits, wall clock, build id.
nlohmann::json experiment_record(const ExperimentConfig& cfg, const SuiteResult& r);

std::string build_id();

int worker_count(int requested);

// Evaluate fn(0..n-1) on a pool of `workers` threads; results come back in
// index order regardless of scheduling.
template <class T>
std::vector<T> parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& fn);

struct WallGuard {
    std::chrono::steady_clock::time_point deadline;
    explicit WallGuard(double seconds);
    bool expired() const { return std::chrono::steady_clock::now() > deadline; }
};

struct WallLimitReached : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace art

#include "art/detail/parallel.hpp"
