#include <doctest.h>

#include <cmath>
#include <map>

#include "art/tree.hpp"

using namespace art;

TEST_CASE("spec validation rejects malformed tasks") {
    CHECK_THROWS_AS(parity_task(4, 1, {1, 2}), ContractError);     // k* > L
    CHECK_THROWS_AS(parity_task(4, 3, {2, 1}), ContractError);     // not increasing
    CHECK_THROWS_AS(parity_task(4, 2, {}), ContractError);         // k* = 0 needs EOS at the root
    CHECK_NOTHROW(parity_task(4, 2, {}, true));
    TaskSpec s = parity_task(4, 2, {1});
    s.dict_size = 3;
    CHECK_THROWS_AS(s.validate(), ContractError);  // XOR needs K = 2
}

TEST_CASE("legal children follow the strictly increasing selector") {
    auto s = parity_task(4, 3, {1, 2});
    CHECK(legal_children(s, {}, 1) == std::vector<int>{1, 2, 3, 4});
    CHECK(legal_children(s, {2}, 2) == std::vector<int>{3, 4, 5});
    CHECK(legal_children(s, {2, 4}, 3) == std::vector<int>{5});
    CHECK(legal_children(s, {1, 2, 3}, 4) == std::vector<int>{5});
    CHECK_THROWS_WITH_AS(legal_children(s, {1, 2, 3, 4}, 5), "depth beyond L+1", ContractError);

    auto r = parity_task(4, 2, {}, true);
    CHECK(legal_children(r, {}, 1) == std::vector<int>{1, 2, 3, 4, 5});

    auto u = s;
    u.selector = SelectorId::UniformSimplified;
    CHECK(legal_children(u, {}, 1) == std::vector<int>{1, 2, 3, 4});
    CHECK(legal_children(u, {4}, 2) == std::vector<int>{1, 2, 3});
    CHECK(legal_children(u, {4, 1, 1}, 4) == std::vector<int>{5});
}

TEST_CASE("enumeration of a small tree") {
    auto s = parity_task(3, 2, {1});
    std::vector<int> x{1, 0, 1};
    auto ts = enumerate_trajectories(s, x);
    REQUIRE(ts.size() == 6);
    std::map<std::vector<int>, double> p;
    double total = 0.0;
    for (const auto& t : ts) {
        p[t.indices] = t.prob();
        total += t.prob();
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p[{1, 4}] == doctest::Approx(1.0 / 9));
    CHECK(p[{2, 4}] == doctest::Approx(1.0 / 6));
    CHECK(p[{3, 4}] == doctest::Approx(1.0 / 3));
    CHECK(p[{1, 2, 4}] == doctest::Approx(1.0 / 9));
    CHECK(p[{2, 3, 4}] == doctest::Approx(1.0 / 6));
    for (const auto& t : ts) {
        int z = 0;
        for (int i : t.vars()) z ^= x[i - 1];
        CHECK(t.final_state(s.eos_token()) == (t.vars().empty() ? s.eos_token() : z));
    }
    CHECK_THROWS_AS(enumerate_trajectories(s, x, 3), EnumerationCapError);
    auto csv = enumeration_csv(s, ts);
    CHECK(csv.rfind("indices,prob,final_state\n", 0) == 0);
    CHECK(csv.find("1 2 4,") != std::string::npos);
}

TEST_CASE("pass rates") {
    auto s = parity_task(3, 3, {1, 2});
    CHECK(pass_rate_exact(s, {1, 2}) == doctest::Approx(1.0 / 18).epsilon(1e-15));
    CHECK(pass_rate_exact(parity_task(4, 2, {1}), {1}) == doctest::Approx(1.0 / 16));
    CHECK_THROWS_AS(pass_rate_exact(s, {2, 1}), ContractError);

    Rng rng(7);
    auto e = pass_rate_mc(s, {1, 2}, 200000, rng);
    CHECK(std::abs(e.mean - 1.0 / 18) <= 4 * std::sqrt(1.0 / 18 * (17.0 / 18) / 200000));
    CHECK_THROWS_AS(pass_rate_mc(s, {1, 2}, 0, rng), ContractError);
}

TEST_CASE("coverage coefficients") {
    auto s = parity_task(3, 2, {1});
    CHECK(coverage_coefficient(s, PathPolicy::subtask({1}), PathPolicy::part()) == doctest::Approx(9.0));
    CHECK_THROWS_WITH_AS(coverage_coefficient(s, PathPolicy::part(), PathPolicy::subtask({1})),
                         doctest::Contains("not absolutely continuous: witness path"), ContractError);

    auto t = parity_task(6, 3, {2, 4});
    auto a = curriculum_chain(t, 2);
    REQUIRE(a.stage_coverage.size() == 3);
    CHECK(a.stage_coverage[0] == doctest::Approx(6.0));
    CHECK(a.stage_coverage[1] == doctest::Approx(5.0));  // children 3..6 and EOS after i_1 = 2
    CHECK(a.stage_coverage[2] == doctest::Approx(3.0));  // children 5, 6 and EOS after i_2 = 4
    CHECK(a.total_coverage == doctest::Approx(90.0));
    CHECK(a.curriculum_cost == doctest::Approx(14.0));
    CHECK(a.ratio() == doctest::Approx(14.0 / 90.0));
}

TEST_CASE("expected pass rate over random tasks") {
    CHECK(binomial(4, 2) == 6.0);
    CHECK(binomial(10, 3) == 120.0);
    for (int d : {3, 5, 10}) {
        double h = 0.0;
        for (int j = 1; j <= d; ++j) h += 1.0 / j;
        CHECK(expected_random_task_pass_rate(d, 1) == doctest::Approx(h / (d * d)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(expected_random_task_pass_rate(4, 5), ContractError);
}

TEST_CASE("PART samples the uniform law and computes parity states") {
    auto s = parity_task(4, 2, {1, 3});
    Rng rng(3);
    std::map<std::vector<int>, int> counts;
    const int n = 40000;
    for (int k = 0; k < n; ++k) {
        auto x = sample_input(s, rng);
        auto t = part_sample(s, x, rng);
        int z = 0;
        for (int i : t.vars()) z ^= x[i - 1];
        REQUIRE(t.final_state(s.eos_token()) == z);
        ++counts[t.indices];
    }
    for (const auto& t : enumerate_trajectories(s, std::vector<int>(4, 0))) {
        double p = t.prob();
        CHECK(std::abs(counts[t.indices] / double(n) - p) <= 4 * std::sqrt(p * (1 - p) / n));
    }
}

TEST_CASE("task spec JSON round trip") {
    auto s = parity_task(5, 3, {2, 5});
    nlohmann::json j = s;
    auto back = j.get<TaskSpec>();
    CHECK(back.target_path == s.target_path);
    CHECK(back.d() == 5);
    CHECK(back.L() == 3);
    CHECK(back.kernel == KernelId::Xor);
    CHECK(kernel_from_string(to_string(KernelId::CausalMap)) == KernelId::CausalMap);
}

TEST_CASE("non-parity kernels") {
    TaskSpec s;
    s.dict_size = 3;
    s.input_len = 4;
    s.depth_bound = 2;
    s.kernel = KernelId::MarkovChain;
    s.kernel_table = {2, 0, 1};
    s.target_path = {1, 3, 5};
    s.validate();
    CHECK(apply_kernel(s, s.eos_token(), 1) == 1);  // first step reads the value
    CHECK(apply_kernel(s, 0, 1) == 2);              // then follows phi
    s.kernel = KernelId::CausalMap;
    CHECK(apply_kernel(s, 0, 1) == 0);
    s.kernel = KernelId::Copy;
    CHECK(apply_kernel(s, 2, 1) == 1);
}
