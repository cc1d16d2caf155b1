#include <doctest.h>

#include <cmath>

#include "art/oracles.hpp"

using namespace art;

namespace {

Trajectory path_of(const TaskSpec& s, const std::vector<int>& x, const std::vector<int>& indices) {
    Trajectory t;
    t.x = x;
    for (int i : indices) push_step(s, t, i, 1.0);
    return t;
}

}  // namespace

TEST_CASE("terminal and family rewards") {
    auto s = parity_task(5, 3, {1, 3, 4});
    std::vector<int> x{1, 1, 0, 1, 0};
    CHECK(subtask_value(s, x, 0) == s.eos_token());
    CHECK(subtask_value(s, x, 1) == 1);
    CHECK(subtask_value(s, x, 2) == 1);
    CHECK(subtask_value(s, x, 3) == 0);

    CHECK(terminal_reward(s, path_of(s, x, {1, 3, 4, 6})) == 1);
    CHECK(terminal_reward(s, path_of(s, x, {2, 4, 6})) == 1);  // x_2 xor x_4 = 0, spurious hit
    CHECK(terminal_reward(s, path_of(s, x, {2, 3, 6})) == 0);
    CHECK(terminal_reward(s, path_of(s, x, {1, 6})) == 0);

    CHECK(family_reward(s, path_of(s, x, {1, 6})) == 1);
    CHECK(family_reward(s, path_of(s, x, {2, 6})) == 1);  // x_2 = x_1
    CHECK(family_reward(s, path_of(s, x, {3, 6})) == 0);
    // depth outside the family
    CHECK(family_reward(s, x, s.eos_token(), 0) == 0);
    CHECK(family_reward(s, x, 1, 4) == 0);

    auto r = parity_task(4, 2, {}, true);
    CHECK(family_reward(r, {0, 1, 0, 1}, r.eos_token(), 0) == 1);

    Trajectory open = path_of(s, x, {1, 3});
    CHECK_THROWS_AS(terminal_reward(s, open), ContractError);
    CHECK_THROWS_AS((Oracle{OracleKind::Family, &s}(open)), ContractError);
}

TEST_CASE("oracle handle dispatch") {
    auto s = parity_task(4, 2, {2});
    std::vector<int> x{0, 1, 1, 0};
    auto t = path_of(s, x, {3, 5});
    CHECK(Oracle{OracleKind::Terminal, &s}(t) == 1);  // x_3 = x_2
    CHECK(Oracle{OracleKind::ExactPath, &s}(t) == 0);
    CHECK(Oracle{OracleKind::ExactPath, &s}(path_of(s, x, {2, 5})) == 1);
    CHECK(Oracle{OracleKind::Family, &s}(t, 1) == 1);
    CHECK(Oracle{OracleKind::Family, &s}(t, 2) == 0);
}

TEST_CASE("wrong parity paths are accepted for exactly half of the inputs") {
    auto s = parity_task(4, 3, {1, 2});
    auto xs = all_inputs(s);
    REQUIRE(xs.size() == 16);
    for (const auto& t : enumerate_trajectories(s, std::vector<int>(4, 0))) {
        if (t.vars() == s.target_vars()) continue;
        int acc = 0;
        for (const auto& x : xs) acc += terminal_reward(s, path_of(s, x, t.indices));
        CHECK(acc == 8);
    }
}

TEST_CASE("closed form for the uniform-branching probe") {
    CHECK(ur_closed_form(4, 1) == doctest::Approx(5.0 / 32).epsilon(1e-15));
    CHECK(ur_closed_form(4, 2) == doctest::Approx(13.0 / 72).epsilon(1e-15));
    CHECK(ur_closed_form(8, 1) == doctest::Approx(9.0 / 128).epsilon(1e-15));

    Rng rng(17);
    const int n = 200000;
    for (auto [d, r] : {std::pair{4, 1}, std::pair{4, 2}, std::pair{6, 3}}) {
        int hits = 0;
        for (int k = 0; k < n; ++k) hits += uniform_probe_accepts(d, r, rng);
        double a = ur_closed_form(d, r);
        CHECK(std::abs(hits / double(n) - a) <= 4 * std::sqrt(a * (1 - a) / n));
    }
    CHECK_THROWS_AS(uniform_probe_accepts(4, 3, rng), ContractError);
}
