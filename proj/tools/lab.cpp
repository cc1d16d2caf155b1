// lab: command-line front end for the verification suites, sweeps, and the
// finetuning / test-time search experiments.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "art/finetune.hpp"
#include "art/harness.hpp"
#include "art/testtime.hpp"

using namespace art;

namespace {

std::vector<int> random_target(int d, int k, Rng& rng) {
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 1);
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<int> v(all.begin(), all.begin() + k);
    std::sort(v.begin(), v.end());
    return v;
}

int report(const std::vector<SuiteResult>& results) {
    bool all = true;
    for (const auto& r : results) {
        const auto& c = r.criterion;
        std::cout << "criterion " << c.id << " [" << c.suite << "]: " << (c.pass ? "PASS" : "FAIL") << " ("
                  << c.summary << ", " << r.wall_sec << " s)\n";
        for (const auto& line : c.checks) std::cout << "    " << line << '\n';
        all = all && c.pass;
    }
    return all ? 0 : 1;
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::stringstream is(item);
        T v;
        if (!(is >> v)) throw CLI::ValidationError("bad list element: " + item);
        out.push_back(v);
    }
    return out;
}

void apply_param(ExperimentConfig& cfg, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--param expects name=v1,v2,...");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "d") cfg.d = parse_list<int>(val);
    else if (key == "k") cfg.k = parse_list<int>(val);
    else if (key == "d_bai") cfg.d_bai = parse_list<int>(val);
    else if (key == "beta") cfg.beta = parse_list<double>(val);
    else if (key == "delta") cfg.delta = parse_list<double>(val);
    else if (key == "eps") cfg.eps = parse_list<double>(val);
    else if (key == "seeds") cfg.seeds = parse_list<std::uint64_t>(val);
    else throw CLI::ValidationError("unknown sweep parameter: " + key);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"verification and experiment driver"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run the suite described by a JSON config");
    run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

    std::string suite = "all", out_dir = "results";
    int workers = 0;
    auto* verify = app.add_subcommand("verify", "run one suite (or all) with default settings");
    verify->add_option("--suite", suite, "suite name or 'all'");
    verify->add_option("--out", out_dir, "output directory");
    verify->add_option("--workers", workers, "worker threads (default: LAB_WORKERS)");

    std::vector<std::string> params;
    auto* sweep = app.add_subcommand("sweep", "run a suite over an overridden grid");
    sweep->add_option("--suite", suite, "suite name")->required();
    sweep->add_option("--param", params, "name=v1,v2,... (d, k, d_bai, beta, delta, eps, seeds)")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--workers", workers, "worker threads");

    std::string schedule = "depth", out_csv;
    int d = 16, k = 2, seeds = 10;
    double beta = 0.1, c_n = 4.0, c_eta = 8.0, eps = 0.1;  // frozen calibration
    std::int64_t eval = 10000;
    auto* ft = app.add_subcommand("finetune", "run a finetuning schedule over seeds");
    ft->add_option("--schedule", schedule, "none | depth | hint")->check(CLI::IsMember({"none", "depth", "hint"}));
    ft->add_option("--d", d, "input length")->check(CLI::Range(2, 64));
    ft->add_option("--k", k, "target depth k*")->check(CLI::Range(0, 16));
    ft->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
    ft->add_option("--beta", beta, "softmax temperature");
    ft->add_option("--c-n", c_n, "sample-size constant");
    ft->add_option("--c-eta", c_eta, "learning-rate constant");
    ft->add_option("--eps", eps, "target error");
    ft->add_option("--eval", eval, "fresh inputs for the accuracy estimate");
    ft->add_option("--out", out_csv, "CSV output")->required();

    std::string method = "ltar";
    double delta = 0.1, c_budget = -1.0;
    auto* tt = app.add_subcommand("testtime", "run test-time path identification over seeds");
    tt->add_option("--method", method, "bai-terminal | ltar")->check(CLI::IsMember({"bai-terminal", "ltar"}));
    tt->add_option("--d", d, "input length")->check(CLI::Range(2, 64));
    tt->add_option("--k", k, "target depth k*")->check(CLI::Range(0, 16));
    tt->add_option("--delta", delta, "failure probability");
    tt->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
    tt->add_option("--c", c_budget, "per-arm budget constant (default: frozen calibration)");
    tt->add_option("--out", out_csv, "CSV output")->required();

    std::string what = "bai";
    auto* cal = app.add_subcommand("calibrate", "grid-search budget constants at the calibration point");
    cal->add_option("--what", what, "bai | ltar | finetune")->check(CLI::IsMember({"bai", "ltar", "finetune"}));
    cal->add_option("--seeds", seeds, "seeds per grid point");

    int L = 3;
    std::vector<int> target;
    auto* en = app.add_subcommand("enumerate", "dump every legal CoT with its reference probability");
    en->add_option("--d", d, "input length")->required();
    en->add_option("--L", L, "depth bound")->required();
    en->add_option("--target", target, "target indices (without EOS)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return report({run_suite(load_config(config_path))});

        if (*verify) {
            std::vector<SuiteResult> out;
            std::vector<std::string> names = suite == "all" ? suite_names() : std::vector<std::string>{suite};
            for (const auto& n : names) {
                auto cfg = default_config(n);
                cfg.out_dir = out_dir;
                cfg.workers = workers;
                out.push_back(run_suite(cfg));
            }
            return report(out);
        }

        if (*sweep) {
            auto cfg = default_config(suite);
            cfg.out_dir = out_dir;
            cfg.workers = workers;
            for (const auto& p : params) apply_param(cfg, p);
            return report({run_suite(cfg)});
        }

        if (*ft) {
            std::ofstream f(out_csv);
            f << "seed,stage,n_used,eta,delta_min,gamma_hat,accuracy,t_data,t_comp\n";
            const auto mode = schedule_from_string(schedule);
            for (int s = 1; s <= seeds; ++s) {
                Rng rng(static_cast<std::uint64_t>(s));
                auto spec = parity_task(d, k + 1, random_target(d, k, rng), k == 0);
                auto cfg = theorem_scaled_config(mode, spec, beta, c_n, c_eta);
                cfg.eps = eps;
                cfg.eval_inputs = eval;
                auto r = run_schedule(build_base_model(spec, beta), cfg, rng);
                for (const auto& st : r.stages)
                    f << s << ',' << st.stage << ',' << st.n_used << ',' << st.eta << ',' << st.delta_min << ','
                      << st.gamma_hat << ',' << st.accuracy << ',' << st.t_data << ',' << st.t_comp << '\n';
                std::cout << "seed " << s << " accuracy " << r.accuracy << '\n';
            }
            return 0;
        }

        if (*tt) {
            const auto defaults = default_config("testtime-scaling");
            std::ofstream f(out_csv);
            f << "seed,method,success,t_data,t_comp,depth_budgets\n";
            int ok = 0;
            for (int s = 1; s <= seeds; ++s) {
                Rng rng(static_cast<std::uint64_t>(s));
                auto spec = parity_task(d, k + 1, random_target(d, k, rng), k == 0);
                auto m = build_base_model(spec, beta);
                SearchConfig sc;
                sc.delta = delta;
                sc.c = c_budget > 0 ? c_budget : (method == "ltar" ? defaults.c_ltar : defaults.c_bai);
                auto r = method == "ltar" ? ltar(m, sc, rng) : bai_terminal(m, sc, rng);
                std::string budgets;
                for (std::size_t i = 0; i < r.depths.size(); ++i)
                    budgets += (i ? " " : "") + std::to_string(r.depths[i].t_data);
                f << s << ',' << method << ',' << r.success << ',' << r.ledger.t_data() << ',' << r.ledger.t_comp()
                  << ',' << budgets << '\n';
                ok += r.success;
            }
            std::cout << method << ": " << ok << "/" << seeds << " identified\n";
            return 0;
        }

        if (*cal) {
            const double dl = 0.1;
            if (what == "finetune") {
                // smallest (c_n, c_eta) where, for both curricula, the Wilson lower bound on the
                // fraction of seeds reaching 0.9 is at least 0.9 (d = 8, k* = 2)
                for (double cn : {2.0, 4.0, 8.0, 16.0})
                    for (double ce : {1.0, 2.0, 4.0, 8.0}) {
                        int good = 0;
                        for (auto mode : {Schedule::DepthIncreasing, Schedule::HintDecreasing}) {
                            int hit = 0;
                            for (int s = 1; s <= seeds; ++s) {
                                Rng rng(static_cast<std::uint64_t>(s));
                                auto spec = parity_task(8, 3, random_target(8, 2, rng));
                                auto cfg = theorem_scaled_config(mode, spec, 0.1, cn, ce);
                                hit += run_schedule(build_base_model(spec, 0.1), cfg, rng).accuracy >= 0.9;
                            }
                            good += wilson_interval(hit, seeds).lo >= 0.9;
                            std::cout << "c_n " << cn << " c_eta " << ce << " " << to_string(mode) << " " << hit << "/"
                                      << seeds << '\n';
                        }
                        if (good == 2) {
                            std::cout << "selected c_n = " << cn << ", c_eta = " << ce << '\n';
                            return 0;
                        }
                    }
                return 1;
            }
            // smallest c (powers of two) whose Wilson lower bound on success is >= 1 - delta
            // at d = 8, k* = 1
            for (double c = 1.0 / 64; c <= 64.0; c *= 2) {
                int ok = 0;
                for (int s = 1; s <= seeds; ++s) {
                    Rng rng(static_cast<std::uint64_t>(s));
                    auto spec = parity_task(8, 2, random_target(8, 1, rng));
                    auto m = build_base_model(spec, 0.1);
                    SearchConfig sc;
                    sc.delta = dl;
                    sc.c = c;
                    ok += (what == "ltar" ? ltar(m, sc, rng) : bai_terminal(m, sc, rng)).success;
                }
                std::cout << what << " c = " << c << ": " << ok << "/" << seeds << '\n';
                if (wilson_interval(ok, seeds).lo >= 1.0 - dl) {
                    std::cout << "selected c = " << c << '\n';
                    return 0;
                }
            }
            return 1;
        }

        if (*en) {
            auto spec = parity_task(d, L, target);
            std::cout << enumeration_csv(spec, enumerate_trajectories(spec, std::vector<int>(d, 0)));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
