#include "feddct/costs/costs.hpp"
#include "feddct/nn/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace feddct;
using namespace feddct::costs;
using division::LayerSpec;
using division::LayerType;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST_CASE("parameter and flop formulas")
{
    CHECK(count_params({"a", LayerType::conv, 3, 4, 8, 1, 4, 4}) == 288);
    CHECK(count_params({"dw", LayerType::conv, 3, 8, 8, 8, 4, 4}) == 72);
    CHECK(count_flops({"one", LayerType::conv, 1, 1, 1, 1, 1, 1}) == 1);
    CHECK(count_flops({"a", LayerType::conv, 3, 4, 8, 1, 4, 4}) == 9088);
    CHECK(count_flops({"a", LayerType::conv, 3, 4, 8, 1, 8, 4}) == 2 * 9088);
    nn::RngStream rng(1, "sym");
    for (int t = 0; t < 200; ++t) {
        const std::size_t k = 1 + rng.next_below(7), a = 1 + rng.next_below(100), b = 1 + rng.next_below(100);
        CHECK(count_params({"x", LayerType::conv, k, a, b, 1, 1, 1}) == count_params({"x", LayerType::conv, k, b, a, 1, 1, 1}));
    }
}

TEST_CASE("memory estimate")
{
    division::ModelSpec empty;
    CHECK(memory_estimate(empty, 4) == CostLedger{});
    division::ModelSpec dense{"d", division::Family::generic, false, {{"fc", LayerType::dense, 1, 10, 10, 1, 1, 1}}};
    const auto m = memory_estimate(dense, 1);
    CHECK(m.params == 100);
    CHECK(m.mem_model == 800);
    CHECK(m.mem_optimizer == 800);
    CHECK(m.mem_activation == 80);
    CHECK(memory_estimate(dense, 3).mem_activation == 240);
}

TEST_CASE("ledger addition is componentwise")
{
    const CostLedger a{1, 2, 3, 4, 5, 6, 7}, b{10, 20, 30, 40, 50, 60, 70};
    CHECK(a + b == CostLedger{11, 22, 33, 44, 55, 66, 77});
    CHECK((a + b) + a == a + (b + a));
}

TEST_CASE("communication cost worked example")
{
    const CommParams c{2, 2, 1000, 100, 0.2, 10000};
    // (S-1)(2p/K)(Q/S) = 50000; 2 beta w = 4000; 2 (1 - beta) w / S = 8000.
    CHECK(comm_cost_main(c) == doctest::Approx(62000));
    CHECK(comm_cost_proxy(c) == doctest::Approx(58000));
    CHECK(comm_cost_total(c) == doctest::Approx(120000));
    CHECK(comm_cost_total(CommParams{4, 8, 1000, 0, 0.3, 5000}) == doctest::Approx(10000));
    CHECK(comm_cost_main(CommParams{2, 2, 1000, 0, 0.5, 4000}) == doctest::Approx(1.5 * 4000));
    CHECK(comm_cost_proxy(CommParams{4, 4, 10, 0, 0.25, 800}) == doctest::Approx(2 * 0.75 * 800 / 4));
}

TEST_CASE("communication parameters are validated")
{
    CHECK_THROWS(comm_cost_main(CommParams{1, 2, 1, 1, 0.5, 1}));
    CHECK_THROWS(comm_cost_main(CommParams{2, 3, 1, 1, 0.5, 1}));
    CHECK_THROWS(comm_cost_main(CommParams{2, 2, 1, 1, 0.0, 1}));
    CHECK_THROWS(comm_cost_main(CommParams{2, 2, 1, 1, 1.0, 1}));
    CHECK_THROWS(comm_cost_main(CommParams{2, 2, -1, 1, 0.5, 1}));
}

TEST_CASE("main plus S - 1 proxies equals the per-client total")
{
    nn::RngStream rng(11, "comm");
    for (int t = 0; t < 1000; ++t) {
        CommParams c;
        c.S = 2 + static_cast<int>(rng.next_below(31));
        c.K = c.S * (1 + static_cast<int>(rng.next_below(20)));
        c.p = 1e6 * rng.next_uniform();
        c.Q = 1e5 * rng.next_uniform();
        c.beta = 0.001 + 0.998 * rng.next_uniform();
        c.w_size = 1e8 * rng.next_uniform();
        REQUIRE(rel(comm_cost_main(c) + (c.S - 1) * comm_cost_proxy(c), comm_cost_total(c)) < 1e-9);
    }
}
