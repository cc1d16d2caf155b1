#include <doctest.h>

#include <cmath>

#include "art/testtime.hpp"

using namespace art;

TEST_CASE("forcing tries are geometric in the candidate probability") {
    auto s = parity_task(4, 2, {2});
    auto m = build_base_model(s, 0.1);
    Rng rng(6);
    std::vector<int> x{0, 1, 1, 0};
    const int runs = 10000;
    std::int64_t tries = 0;
    BudgetLedger ledger;
    for (int r = 0; r < runs; ++r) {
        auto t = fxrs(m, x, {}, 3, 1000, rng, &ledger, &tries);
        REQUIRE(t.has_value());
        CHECK(t->indices == std::vector<int>{3});
        CHECK(t->forced[0] == 0);
    }
    const double mean = tries / double(runs);
    CHECK(mean >= 2.0);
    CHECK(mean <= 8.0);
    CHECK(mean == doctest::Approx(4.0).epsilon(0.05));
    CHECK(ledger.t_comp() == tries);

    // a single legal child is hit on the first try
    std::int64_t one = 0;
    auto t = fxrs(m, x, {4}, s.eos_index(), 5, rng, nullptr, &one);
    REQUIRE(t.has_value());
    CHECK(one == 1);
    CHECK(t->forced[0] == 1);

    // with one try the cap is usually exceeded; the spend is capped
    int fails = 0;
    std::int64_t spent = 0;
    for (int r = 0; r < 1000; ++r) fails += !fxrs(m, x, {}, 1, 1, rng, nullptr, &spent).has_value();
    CHECK(spent == 1000);
    CHECK(fails > 650);
    CHECK_THROWS_AS(fxrs(m, x, {3}, 2, 10, rng), ContractError);
}

TEST_CASE("commit picks the lowest-index maximizer") {
    std::vector<ArmStats> arms{{4, 10, 6}, {2, 10, 6}, {7, 10, 3}};
    CHECK(commit_arm(arms) == 2);
    arms.push_back({9, 10, 7});
    CHECK(commit_arm(arms) == 9);
    CHECK_THROWS_AS(commit_arm({}), ContractError);
}

TEST_CASE("budget formulas") {
    CHECK(bai_budget(8, 1, 1, 2.0, 0.1) == static_cast<std::int64_t>(std::ceil(2.0 * 64 * std::log(80.0))));
    CHECK(bai_budget(8, 1, 2, 2.0, 0.1) == static_cast<std::int64_t>(std::ceil(2.0 * 1.0 * std::log(80.0))));
    CHECK(ltar_budget(8, 0.5, 1.0, 0.1) == static_cast<std::int64_t>(std::ceil(256.0 * std::log(80.0))));
    CHECK(fxrs_cap(8, 4.0, 0.1) == static_cast<std::int64_t>(std::ceil(32.0 * std::log(80.0))));
    CHECK_THROWS_AS(ltar_budget(8, 1.0, 1.0, 0.1), ContractError);
}

TEST_CASE("exact acceptance gaps") {
    // terminal oracle at the last depth: EOS is right, anything else is a coin flip
    auto s = parity_task(4, 2, {1});
    auto m = build_base_model(s, 0.1);
    auto last = acceptance_gap_exact(m, 2, AcceptMode::Terminal);
    CHECK(last.correct == s.eos_index());
    CHECK(last.gap == doctest::Approx(0.5).epsilon(1e-14));

    // terminal oracle at depth 1: the right arm only wins when the suffix stops at once
    auto first = acceptance_gap_exact(m, 1, AcceptMode::Terminal);
    REQUIRE(first.arms == std::vector<int>{1, 2, 3, 4});
    CHECK(first.alpha[0] == doctest::Approx(5.0 / 8).epsilon(1e-14));

    // family oracle under truncation: 1 for the right arm, 1/2 for the rest
    auto t = parity_task(5, 3, {2, 4});
    auto mt = build_base_model(t, 0.1);
    for (int l : {1, 2}) {
        auto g = acceptance_gap_exact(mt, l, AcceptMode::Family);
        for (std::size_t a = 0; a < g.arms.size(); ++a)
            CHECK(g.alpha[a] == doctest::Approx(g.arms[a] == g.correct ? 1.0 : 0.5).epsilon(1e-14));
        CHECK(g.gap == doctest::Approx(0.5));
    }
    CHECK_THROWS_AS(acceptance_gap_exact(mt, 4, AcceptMode::Family), ContractError);
}

TEST_CASE("search spends exactly the scheduled data budget") {
    auto s = parity_task(5, 3, {1, 4});
    auto m = build_base_model(s, 0.1);
    for (bool layerwise : {false, true}) {
        Rng rng(3);
        SearchConfig cfg;
        cfg.c = layerwise ? 0.25 : 2.0;
        auto r = layerwise ? ltar(m, cfg, rng) : bai_terminal(m, cfg, rng);
        CHECK(r.success);
        CHECK(r.path == s.target_path);
        REQUIRE(r.depths.size() == 3);
        std::int64_t data = 0, comp = 0;
        for (const auto& d : r.depths) {
            CHECK(d.t_data == static_cast<std::int64_t>(d.arms.size()) * d.per_arm);
            CHECK(d.t_comp >= d.t_data);
            for (const auto& a : d.arms) CHECK(a.pulls == d.per_arm);
            data += d.t_data;
            comp += d.t_comp;
        }
        CHECK(data == r.ledger.t_data());
        CHECK(comp == r.ledger.t_comp());
    }
}

TEST_CASE("identification succeeds across seeds") {
    int bai_ok = 0, exact_ok = 0, ltar_ok = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        auto s = parity_task(6, 2, {static_cast<int>(seed)});
        auto m = build_base_model(s, 0.1);
        SearchConfig cfg;
        cfg.c = 2.0;
        bai_ok += bai_terminal(m, cfg, rng).success;
        cfg.bai_oracle = OracleKind::ExactPath;
        exact_ok += bai_terminal(m, cfg, rng).success;
        SearchConfig lc;
        lc.c = 1.0;
        ltar_ok += ltar(m, lc, rng).success;
    }
    CHECK(bai_ok == 5);
    CHECK(exact_ok == 5);
    CHECK(ltar_ok == 5);

    SearchConfig bad;
    bad.bai_oracle = OracleKind::Family;
    Rng rng(1);
    auto s = parity_task(4, 2, {2});
    CHECK_THROWS_AS(bai_terminal(build_base_model(s, 0.1), bad, rng), ContractError);
    bad = {};
    bad.delta = 1.5;
    CHECK_THROWS_AS(ltar(build_base_model(s, 0.1), bad, rng), ContractError);
}

TEST_CASE("empty target is found at the root") {
    auto s = parity_task(4, 2, {}, true);
    auto m = build_base_model(s, 0.1);
    Rng rng(2);
    SearchConfig cfg;
    auto r = ltar(m, cfg, rng);
    CHECK(r.success);
    CHECK(r.path == std::vector<int>{s.eos_index()});
    REQUIRE(r.depths.size() == 1);
    CHECK(r.depths[0].arms.size() == 5);
}

TEST_CASE("spurious rate") {
    auto s = parity_task(4, 2, {2});
    auto m = build_base_model(s, 0.1);
    Rng rng(1);
    BudgetLedger ledger;
    CHECK(spurious_rate(m, {}, 100, rng, &ledger) == 0.5);
    CHECK(ledger.t_data() == 0);
}
