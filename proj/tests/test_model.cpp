#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "art/model.hpp"

using namespace art;

TEST_CASE("base model attends uniformly to legal keys") {
    auto s = parity_task(6, 3, {2, 5});
    for (auto bank : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{11}}) {
        auto m = build_base_model(s, 0.1, bank);
        for (const auto& pre : std::vector<std::vector<int>>{{}, {2}, {2, 5}, {1, 3, 6}}) {
            auto ld = legal_distribution(m, pre, static_cast<int>(pre.size()) + 1);
            const double u = 1.0 / ld.legal.size();
            for (std::size_t k = 0; k < ld.legal.size(); ++k) {
                CHECK(ld.alpha[k] == doctest::Approx(u).epsilon(1e-14));
                CHECK(ld.vocab[k] == doctest::Approx(u).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("large temperature with uniform logits stays uniform") {
    auto s = parity_task(5, 2, {1});
    auto m = build_base_model(s, 1e6);
    auto ld = legal_distribution(m, {}, 1);
    for (double v : ld.vocab) CHECK(std::abs(v - 0.2) <= 1e-6);
}

TEST_CASE("parity FFN truth table") {
    auto e = [](int t) { return Eigen::Vector3d::Unit(t); };
    // (value, state) -> token; token 2 is EOS
    const int table[3][3] = {{0, 1, 0}, {1, 0, 1}, {0, 1, 0}};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            Eigen::Vector3d out = ffn_xor(e(a), e(b));
            CHECK((out - e(table[a][b])).norm() <= 1e-10);
        }
    CHECK_THROWS_AS(ffn_xor(Eigen::Vector3d(0.5, 0.5, 0.0), e(0)), ContractError);
}

TEST_CASE("forced target path reproduces the parity of the target bits") {
    auto s = parity_task(6, 3, {1, 4, 6});
    auto m = build_base_model(s, 0.1);
    Rng rng(1);
    RolloutOptions opt;
    opt.force_prefix = s.target_path;
    for (int mask = 0; mask < 64; ++mask) {
        std::vector<int> x(6);
        for (int i = 0; i < 6; ++i) x[i] = (mask >> i) & 1;
        auto t = rollout(m, x, opt, rng);
        CHECK(t.final_state(s.eos_token()) == (x[0] ^ x[3] ^ x[5]));
    }
}

TEST_CASE("truncation semantics") {
    auto s = parity_task(4, 3, {1, 2});
    auto m = build_base_model(s, 0.1);
    Rng rng(5);
    std::vector<int> x{1, 0, 1, 1};

    RolloutOptions zero;
    zero.truncate_at = 0;
    auto t0 = rollout(m, x, zero, rng);
    CHECK(t0.indices == std::vector<int>{5});
    CHECK(t0.depth() == 0);

    RolloutOptions two;
    two.truncate_at = 2;
    BudgetLedger ledger;
    RolloutStats stats;
    for (int k = 0; k < 200; ++k) {
        auto t = rollout(m, x, two, rng, &ledger, &stats);
        REQUIRE(t.indices.size() == 3);
        CHECK(t.indices[2] == 5);
        CHECK(t.forced[2] == 1);
    }
    CHECK(stats.discarded > 0);  // EOS at depth 2 is legal and gets discarded
    CHECK(ledger.t_comp() == stats.emitted);

    RolloutOptions bad;
    bad.truncate_at = 5;
    CHECK_THROWS_AS(rollout(m, x, bad, rng), ContractError);
}

TEST_CASE("discard loop surfaces budget exhaustion") {
    auto s = parity_task(4, 2, {}, true);
    auto m = build_base_model(s, 0.1);
    m.W(s.eos_index() - 1, m.query_position(1) - 1) = 200.0;  // EOS almost surely at the root
    m.refresh();
    Rng rng(2);
    RolloutOptions opt;
    opt.truncate_at = 1;
    opt.retry_cap = 10;
    CHECK_THROWS_AS(rollout(m, {0, 0, 0, 0}, opt, rng), BudgetExhausted);
}

TEST_CASE("rollout lengths match the enumerated law") {
    auto s = parity_task(4, 2, {1});
    auto m = build_base_model(s, 0.1);
    std::map<int, double> exact;
    for (const auto& t : enumerate_trajectories(s, std::vector<int>(4, 0))) exact[t.indices.size()] += t.prob();
    Rng rng(9);
    const int n = 50000;
    std::map<int, int> got;
    for (int k = 0; k < n; ++k) ++got[rollout(m, sample_input(s, rng), {}, rng).indices.size()];
    for (auto [len, p] : exact) CHECK(std::abs(got[len] / double(n) - p) <= 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("margin lower-bounds the correct-child probability") {
    auto s = parity_task(8, 2, {3});
    auto m = build_base_model(s, 0.1);
    const double gap = 2.5;
    m.W(2, m.query_position(1) - 1) = gap;
    m.refresh();
    auto ld = legal_distribution(m, {}, 1);
    CHECK(ld.alpha[ld.find(3)] >= 1.0 / (1.0 + 7.0 * std::exp(-gap)) - 1e-15);
}

TEST_CASE("exact model law under truncation is conditional on survival") {
    auto s = parity_task(4, 3, {1, 2});
    auto m = build_base_model(s, 0.1);
    RolloutOptions opt;
    opt.truncate_at = 2;
    double total = 0.0;
    for (const auto& wp : enumerate_model(m, std::vector<int>(4, 0), opt)) {
        CHECK(wp.traj.indices.size() == 3);
        total += wp.weight;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("checkpoint round trip") {
    auto s = parity_task(5, 2, {2});
    auto m = build_base_model(s, 0.3, 4);
    m.W(1, 6) = 0.75;
    m.refresh();
    const std::string path = "test_model_checkpoint.json";
    save_checkpoint(m, path);
    auto back = load_checkpoint(path);
    std::remove(path.c_str());
    CHECK(back.beta == 0.3);
    CHECK(back.spec.target_path == s.target_path);
    CHECK((back.W - m.W).norm() == 0.0);
    CHECK((back.P - m.P).norm() == 0.0);
    CHECK(back.logit(2, 7) == m.logit(2, 7));
}
