#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "art/harness.hpp"
#include "art/tree.hpp"

using namespace art;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("log-log slope fit") {
    std::vector<double> x{4, 8, 16, 32}, y;
    for (double v : x) y.push_back(7.0 * std::pow(v, -3.0));
    auto f = fit_loglog_slope(x, y);
    CHECK(f.slope == doctest::Approx(-3.0).epsilon(1e-9));
    CHECK(std::exp(f.intercept) == doctest::Approx(7.0).epsilon(1e-9));
    CHECK(f.stderr_ <= 1e-9);
    CHECK_THROWS_AS(fit_loglog_slope({1, 2}, {1, 2}), ContractError);
    CHECK_THROWS_AS(fit_loglog_slope({1, 2, 3}, {1, 0, 2}), ContractError);
    CHECK_THROWS_AS(fit_loglog_slope({2, 2, 2}, {1, 2, 3}), ContractError);
}

TEST_CASE("statistics helpers") {
    CHECK(chi_square_pvalue(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(chi_square_pvalue(0.0, 3) == doctest::Approx(1.0));
    auto c = chi_square_test({50, 30, 20}, {0.5, 0.3, 0.2});
    CHECK(c.statistic == doctest::Approx(0.0));
    CHECK(c.dof == 2);
    CHECK(mean({1, 2, 3, 4}) == 2.5);
    CHECK(variance({1, 2, 3, 4}) == doctest::Approx(5.0 / 3));
    auto w = wilson_interval(97, 100);
    CHECK(w.lo == doctest::Approx(0.9154).epsilon(1e-3));
    CHECK(w.hi == doctest::Approx(0.9898).epsilon(1e-3));
    CHECK(wilson_interval(0, 10).lo == doctest::Approx(0.0));
}

TEST_CASE("suite registry and configuration") {
    const auto& names = suite_names();
    REQUIRE(names.size() == 12);
    for (std::size_t i = 0; i < names.size(); ++i) {
        CHECK(suite_criterion(names[i]) == static_cast<int>(i) + 1);
        auto cfg = default_config(names[i]);
        CHECK(cfg.suite == names[i]);
        CHECK_NOTHROW(cfg.validate());
    }
    CHECK_THROWS_AS(default_config("nope"), ContractError);

    auto cfg = default_config("testtime-scaling");
    nlohmann::json j = cfg;
    auto back = j.get<ExperimentConfig>();
    CHECK(back.d == cfg.d);
    CHECK(back.d_bai == cfg.d_bai);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.c_ltar == cfg.c_ltar);
    CHECK(back.wall_limit_sec == cfg.wall_limit_sec);

    auto bad = cfg;
    bad.seeds = {1, 1};
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.d.clear();
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.suite = "nope";
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.delta = {1.0};
    CHECK_THROWS_AS(bad.validate(), ContractError);

    const std::string path = "test_harness_config.json";
    {
        std::ofstream f(path);
        f << R"({"suite": "coverage", "seeds": [5, 6]})";
    }
    auto loaded = load_config(path);
    std::remove(path.c_str());
    CHECK(loaded.suite == "coverage");
    CHECK(loaded.seeds == std::vector<std::uint64_t>{5, 6});
    CHECK(loaded.d == default_config("coverage").d);
}

TEST_CASE("parallel map keeps index order and propagates errors") {
    auto out = parallel_map<int>(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
    REQUIRE(out.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) CHECK(out[i] == static_cast<int>(i * i));
    CHECK_THROWS_AS(parallel_map<int>(20, 3,
                                      [](std::size_t i) -> int {
                                          if (i == 7) throw std::runtime_error("boom");
                                          return 0;
                                      }),
                    std::runtime_error);
    CHECK(worker_count(3) == 3);
    CHECK(worker_count(0) >= 1);
}

TEST_CASE("suite output is deterministic") {
    namespace fs = std::filesystem;
    const fs::path dir = "test_harness_out";
    fs::remove_all(dir);
    auto cfg = default_config("ffn-table");
    cfg.out_dir = (dir / "a").string();
    auto a = run_suite(cfg);
    CHECK(a.criterion.pass);
    CHECK(a.criterion.id == 1);
    CHECK_FALSE(a.aborted);
    cfg.out_dir = (dir / "b").string();
    cfg.workers = 1;
    run_suite(cfg);
    const auto ta = slurp((dir / "a" / "ffn_table.csv").string());
    CHECK(ta.rfind("a,b,expected,argmax,embedding_error\n", 0) == 0);
    CHECK(ta == slurp((dir / "b" / "ffn_table.csv").string()));

    auto rec = nlohmann::json::parse(slurp((dir / "a" / "ffn-table.json").string()));
    CHECK(rec.at("aborted") == false);
    CHECK(rec.contains("build"));

    auto p = default_config("passrate-decay");
    p.out_dir = (dir / "c").string();
    p.wall_limit_sec = 1e-9;
    auto r = run_suite(p);
    CHECK(r.aborted);
    CHECK_FALSE(r.criterion.pass);
    fs::remove_all(dir);
}
