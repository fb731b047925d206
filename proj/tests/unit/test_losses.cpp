#include "oracle.hpp"

#include "feddct/losses/losses.hpp"
#include "feddct/nn/ops.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace feddct;
using namespace feddct::losses;
using feddct::testing::gradcheck;
using feddct::testing::random_tensor;

namespace {

std::vector<double> random_dist(nn::RngStream &rng, std::size_t c)
{
    std::vector<double> p(c);
    double s = 0.0;
    for (auto &v : p)
        s += v = -std::log(1.0 - rng.next_uniform());
    for (auto &v : p)
        v /= s;
    return p;
}

std::vector<double> row(const nn::Tensor &t, std::size_t r)
{
    const std::size_t c = t.dim(1);
    return {t.values().begin() + r * c, t.values().begin() + (r + 1) * c};
}

} // namespace

TEST_CASE("cross entropy by hand")
{
    const double p[] = {0.25, 0.5, 0.25};
    CHECK(cross_entropy(p, 1) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(cross_entropy(p, 3), LossError);
    CHECK_THROWS_AS(cross_entropy(p, -1), LossError);
    const double l[] = {0.0, 0.0, 0.0, 0.0};
    CHECK(cross_entropy_logits(l, 2) == doctest::Approx(std::log(4.0)));
    const double big[] = {800.0, 0.0};
    CHECK(cross_entropy_logits(big, 0) == doctest::Approx(0.0));
    CHECK(cross_entropy_logits(big, 1) == doctest::Approx(800.0));
}

TEST_CASE("entropy and co-training loss examples")
{
    const double u[] = {0.5, 0.5};
    CHECK(shannon_entropy(u) == doctest::Approx(std::log(2.0)));
    const double one[] = {1.0, 0.0};
    CHECK(shannon_entropy(one) == 0.0);
    const double neg[] = {1.5, -0.5};
    CHECK_THROWS_AS(shannon_entropy(neg), LossError);

    // Disjoint one-hot predictions reach the upper bound ln S.
    CHECK(cot_loss({{{1, 0}, {0, 1}}, 0}) == doctest::Approx(std::log(2.0)));
    CHECK(cot_loss({{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}, 0}) == doctest::Approx(std::log(4.0)));
    CHECK(cot_loss({{{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}}, 0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(cot_loss({{{1.0, 0.0}}, 0}), LossError);
    CHECK_THROWS_AS(cot_loss({{{1.0, 0.0}, {0.2, 0.3, 0.5}}, 0}), LossError);

    // H([0.5, 0.5]) - (H([0.9, 0.1]) + H([0.1, 0.9])) / 2
    const double h = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
    CHECK(cot_loss({{{0.9, 0.1}, {0.1, 0.9}}, 0}) == doctest::Approx(std::log(2.0) - h));
}

TEST_CASE("cluster objective combines both terms")
{
    const PredictionSet two{{{0.9, 0.1}, {0.1, 0.9}}, 0};
    const double expect = -std::log(0.9) - std::log(0.1) + 0.5 * cot_loss(two);
    CHECK(cluster_objective(two, {0.5}) == doctest::Approx(expect));
    const PredictionSet single{{{0.9, 0.1}}, 0};
    CHECK(cluster_objective(single, {0.5}) == doctest::Approx(-std::log(0.9)));
    CHECK_THROWS_AS(validate({{{0.9, 0.2}}, 0}), LossError);
    CHECK_THROWS_AS(validate({{{0.9, 0.1}}, 2}), LossError);
    CHECK_NOTHROW(validate(two));
}

TEST_CASE("co-training loss properties on random draws")
{
    nn::RngStream rng(5, "cot-props");
    for (int t = 0; t < 2000; ++t) {
        const std::size_t S = 2 + rng.next_below(7), C = 2 + rng.next_below(9);
        PredictionSet ps;
        for (std::size_t k = 0; k < S; ++k)
            ps.probs.push_back(random_dist(rng, C));
        const double v = cot_loss(ps);
        REQUIRE(v >= -1e-12);
        REQUIRE(v <= std::log(double(S)) + 1e-12);
        auto perm = ps;
        std::reverse(perm.probs.begin(), perm.probs.end());
        REQUIRE(std::abs(cot_loss(perm) - v) < 1e-12);
        PredictionSet same{std::vector<std::vector<double>>(S, ps.probs[0]), 0};
        REQUIRE(std::abs(cot_loss(same)) < 1e-9);
    }
}

TEST_CASE("batched losses agree with the scalar definitions")
{
    const auto a = random_tensor({5, 4}, nn::RngStream(1, "a"), 2.0);
    const auto b = random_tensor({5, 4}, nn::RngStream(1, "b"), 2.0);
    const int labels[] = {0, 3, 1, 2, 2};
    nn::Tape tape;
    const nn::Var la = tape.constant(a), lb = tape.constant(b);
    const nn::Var vars[] = {la, lb};
    const auto terms = cluster_objective(vars, labels, {0.5});

    double ce_a = 0.0, ce_b = 0.0, cot = 0.0;
    for (std::size_t r = 0; r < 5; ++r) {
        ce_a += cross_entropy_logits(row(a, r), labels[r]) / 5;
        ce_b += cross_entropy_logits(row(b, r), labels[r]) / 5;
        cot += cot_loss({{nn::ops::softmax(row(a, r)), nn::ops::softmax(row(b, r))}, labels[r]}) / 5;
    }
    CHECK(terms.ce[0].value()[0] == doctest::Approx(ce_a).epsilon(1e-12));
    CHECK(terms.ce[1].value()[0] == doctest::Approx(ce_b).epsilon(1e-12));
    CHECK(cot_loss_batch(vars).value()[0] == doctest::Approx(cot).epsilon(1e-12));
    CHECK(terms.total.value()[0] == doctest::Approx(ce_a + ce_b + 0.5 * cot).epsilon(1e-12));

    const nn::Var one[] = {la};
    const auto solo = cluster_objective(one, labels, {0.5});
    CHECK_FALSE(solo.weighted_cot.valid());
    CHECK(solo.total.value()[0] == doctest::Approx(ce_a).epsilon(1e-12));
    CHECK_THROWS_AS(cot_loss_batch(one), LossError);
}

TEST_CASE("objective gradients match finite differences")
{
    const int labels[] = {1, 0, 2};
    for (std::size_t S : {1, 2, 4}) {
        std::vector<nn::Tensor> in;
        for (std::size_t k = 0; k < S; ++k)
            in.push_back(random_tensor({3, 3}, nn::RngStream(9, "l").child("k", k)));
        const double err = gradcheck(
            [&](nn::Tape &, std::span<const nn::Var> v) { return cluster_objective(v, labels, {0.5}).total; }, in);
        CHECK(err < 1e-3);
    }
}
