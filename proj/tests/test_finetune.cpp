#include <doctest.h>

#include <cmath>

#include "art/finetune.hpp"

using namespace art;

TEST_CASE("score gradient matches finite differences of the log-probability") {
    auto s = parity_task(5, 3, {2, 4});
    for (auto bank : {std::optional<std::uint64_t>{}, std::optional<std::uint64_t>{3}}) {
        auto m = build_base_model(s, 0.2, bank);
        Rng rng(4);
        std::normal_distribution<double> nd(0.0, 0.3);
        for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = nd(rng);
        m.refresh();
        for (int rep = 0; rep < 5; ++rep) {
            auto t = rollout(m, sample_input(s, rng), {}, rng);
            Eigen::MatrixXd G = score_gradient(m, t).aggregate(m);
            Eigen::MatrixXd D = Eigen::MatrixXd::Zero(m.W.rows(), m.W.cols());
            for (Eigen::Index i = 0; i < D.size(); ++i) D.data()[i] = nd(rng);
            const double h = 1e-6;
            auto plus = m, minus = m;
            plus.W += h * D;
            minus.W -= h * D;
            plus.refresh();
            minus.refresh();
            const double fd = (log_prob(plus, t) - log_prob(minus, t)) / (2 * h);
            CHECK(fd == doctest::Approx((G.array() * D.array()).sum()).epsilon(1e-6));
        }
    }
}

TEST_CASE("score gradient rejects off-policy trajectories") {
    auto s = parity_task(4, 2, {3});
    auto m = build_base_model(s, 0.1);
    Rng rng(1);
    auto t = rollout(m, {0, 1, 0, 1}, {}, rng);
    auto other = m;
    other.W(2, other.query_position(1) - 1) = 1.0;
    other.refresh();
    CHECK_THROWS_AS(score_gradient(other, t), ContractError);
    CHECK_NOTHROW(score_gradient(m, t));
}

TEST_CASE("margin threshold") {
    auto th = margin_threshold(16, 0.1, 3, 0.1);
    REQUIRE(th.feasible);
    CHECK(th.alpha_req == doctest::Approx(0.5 + 0.05 * std::log(27.0)).epsilon(1e-14));
    CHECK(th.gamma == doctest::Approx(3.3928).epsilon(1e-4));
    CHECK_FALSE(margin_threshold(16, 1.0, 3, 0.1).feasible);
    CHECK(margin_threshold(1, 0.1, 3, 0.1).gamma == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(margin_threshold(16, 0.1, 3, 0.0), ContractError);
}

TEST_CASE("update moves every logit by eta times its block coefficient") {
    auto s = parity_task(6, 3, {1, 5});
    auto m = build_base_model(s, 0.1, 21);
    auto g = GradientBlocks::zeros(m);
    Rng rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& c : g.coef) c = u(rng);
    auto upd = apply_update(m, g, 0.7);
    CHECK(upd.identity_error <= 1e-12);
    for (int l = 1; l <= s.L() + 1; ++l)
        for (int j = 1; j <= s.eos_index(); ++j)
            CHECK(upd.params.logit(j, m.query_position(l)) - m.logit(j, m.query_position(l)) ==
                  doctest::Approx(0.7 * g.at(l, j)).epsilon(1e-10));
    CHECK_THROWS_AS(apply_update(m, g, -1.0), ContractError);
}

TEST_CASE("exact first-stage gradient of the depth curriculum") {
    auto s = parity_task(4, 3, {1, 2});
    auto m = build_base_model(s, 0.1);
    auto opt = stage_options(Schedule::DepthIncreasing, s, 1);
    auto ex = expected_gradient_exact(m, opt);
    // the correct arm is accepted always, the other three half the time
    CHECK(ex.success == doctest::Approx(0.625).epsilon(1e-14));
    CHECK(ex.blocks.at(1, 1) == doctest::Approx(0.234375).epsilon(1e-12));
    for (int j = 2; j <= 4; ++j) CHECK(ex.blocks.at(1, j) == doctest::Approx(-0.078125).epsilon(1e-12));
    for (int l = 2; l <= 4; ++l)
        for (int j = 1; j <= s.eos_index(); ++j) CHECK(ex.blocks.at(l, j) == 0.0);

    Rng rng(12);
    auto mc = reinforce_estimate(m, opt, 40000, rng);
    for (int j = 1; j <= 4; ++j)
        CHECK(std::abs(mc.blocks.at(1, j) - ex.blocks.at(1, j)) <= 5 * mc.blocks.stderr_at(1, j));
    CHECK(std::abs(mc.mean_reward - 0.625) <= 5 * std::sqrt(0.625 * 0.375 / 40000));
}

TEST_CASE("schedule stage options") {
    auto s = parity_task(6, 3, {2, 3});
    auto a = stage_options(Schedule::DepthIncreasing, s, 1);
    CHECK(a.rollout.truncate_at == 1);
    CHECK(a.family_depth == 1);
    CHECK(a.score_depth == 1);
    auto b = stage_options(Schedule::DepthIncreasing, s, 3);
    CHECK(b.rollout.truncate_at == -1);
    CHECK(b.family_depth == 2);
    auto h = stage_options(Schedule::HintDecreasing, s, 1);
    CHECK(h.rollout.force_prefix == std::vector<int>{2, 3});
    CHECK(h.score_depth == 3);
    CHECK(h.family_depth == 2);
    CHECK(stage_options(Schedule::None, s, 1).oracle == OracleKind::Terminal);
    CHECK(schedule_stages(Schedule::None, s) == 1);
    CHECK(schedule_stages(Schedule::HintDecreasing, s) == 3);
    CHECK(schedule_from_string(to_string(Schedule::HintDecreasing)) == Schedule::HintDecreasing);
    CHECK_THROWS_AS(schedule_from_string("sideways"), ContractError);
}

TEST_CASE("scaled configuration and validation") {
    auto s = parity_task(16, 3, {4, 9});
    auto c = theorem_scaled_config(Schedule::DepthIncreasing, s, 0.1, 4.0, 8.0);
    REQUIRE(c.n.size() == 3);
    CHECK(c.n[0] == 2840);
    CHECK(c.eta[0] == doctest::Approx(8.0 * 0.1 * std::log(16.0) * 256.0));
    auto none = theorem_scaled_config(Schedule::None, s, 0.1, 4.0, 8.0);
    REQUIRE(none.n.size() == 1);
    CHECK(none.n[0] == 3 * 2840);
    CHECK(none.eta[0] == doctest::Approx(8.0 * 0.1 * std::log(16.0) * 4096.0));

    CHECK_NOTHROW(c.validate(3));
    CHECK_THROWS_AS(c.validate(2), ContractError);
    auto bad = c;
    bad.n[1] = 0;
    CHECK_THROWS_AS(bad.validate(3), ContractError);
    bad = c;
    bad.eps = 1.0;
    CHECK_THROWS_AS(bad.validate(3), ContractError);
}

TEST_CASE("depth curriculum learns a small task") {
    auto s = parity_task(6, 3, {2, 5});
    Rng rng(5);
    auto cfg = theorem_scaled_config(Schedule::DepthIncreasing, s, 0.1, 4.0, 8.0);
    cfg.eval_inputs = 4000;
    auto r = run_schedule(build_base_model(s, 0.1), cfg, rng);
    REQUIRE(r.stages.size() == 3);
    CHECK(r.accuracy >= 0.9);
    CHECK(r.stages.back().accuracy == r.accuracy);
    std::int64_t data = 0;
    for (const auto& st : r.stages) {
        CHECK(st.t_comp >= st.t_data);
        data += st.t_data;
    }
    CHECK(data == r.ledger.t_data());
}
