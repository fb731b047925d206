// Acceptance checks. Prints one PASS/FAIL line per criterion; the exit code is
// nonzero if any selected criterion fails. Arguments select criteria by number.

#include "oracle.hpp"

#include "feddct/costs/costs.hpp"
#include "feddct/division/division.hpp"
#include "feddct/fl/simulation.hpp"
#include "feddct/losses/losses.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace feddct;
using feddct::testing::gradcheck;
using feddct::testing::gradcheck_params;
using feddct::testing::random_tensor;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------- 1

Outcome division_tables()
{
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;
    const std::map<int, std::array<std::size_t, 3>> table{{2, {12, 24, 48}}, {4, {8, 16, 32}}, {8, {6, 12, 23}},
                                                          {16, {4, 8, 16}}, {32, {3, 6, 12}}};
    for (const auto &[S, want] : table)
        if (division::resnet_stage_table(S).widths != want) {
            ok = false;
            why += " resnet S=" + std::to_string(S);
        }

    using division::LayerSpec;
    using division::LayerType;
    const std::vector<LayerSpec> block{{"a", LayerType::conv, 1, 256, 64, 1, 8, 8},
                                       {"b", LayerType::conv, 3, 64, 64, 1, 8, 8},
                                       {"c", LayerType::conv, 1, 64, 256, 1, 8, 8}};
    std::uint64_t before = 0, after = 0;
    std::vector<std::size_t> widths;
    for (const auto &l : block) {
        const auto d = division::divide_layer(l, 4);
        widths.push_back(d.c_out);
        before += costs::count_params(l);
        after += costs::count_params(d);
    }
    if (widths != std::vector<std::size_t>{32, 32, 128} || after * 4 != before) {
        ok = false;
        why += " bottleneck";
    }

    nn::RngStream rng(2024, "formulas");
    int bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const int S = 1 + static_cast<int>(rng.next_below(64));
        const double fw = 1.0 + 20.0 * rng.next_uniform();
        const long fc = 1 + static_cast<long>(rng.next_below(256));
        const long fg = 1 + static_cast<long>(rng.next_below(64));
        const double rs = std::sqrt(static_cast<double>(S));
        bad += division::widen_factor_divide(fw, S) != std::max(std::floor(fw / rs + 0.4), 1.0);
        bad += division::cardinality_divide(fc, S) != std::max(fc / S, 1L);
        bad += division::growth_rate_divide(fg, S) != 0.5 * std::floor(2.0 * static_cast<double>(fg) / rs);
    }
    if (bad) {
        ok = false;
        why += " formulas(" + std::to_string(bad) + ")";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && secs < 1.0;
    return {ok, "5 resnet rows, bottleneck 1/4 params, 3000 formula checks" + (why.empty() ? "" : "; failed:" + why) +
                    fmt(", %.3f s (limit 1 s)", secs)};
}

// ---------------------------------------------------------------- 2

nn::Var readout(nn::Tape &tape, nn::Var y)
{
    // Fixed random projection to a scalar so every output element matters.
    const nn::Tensor w = random_tensor(y.shape(), nn::RngStream(7, "readout"));
    nn::Var prod = tape.record(
        [&] {
            nn::Tensor out = y.value();
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] *= w[i];
            return out;
        }(),
        {y},
        [w](const nn::GradContext &g) {
            if (g.in_grads[0])
                for (std::size_t i = 0; i < w.size(); ++i)
                    (*g.in_grads[0])[i] += g.out_grad[i] * w[i];
        });
    return nn::ops::sum_all(prod);
}

Outcome gradient_suite()
{
    using nn::LayerKind;
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, double> errs;
    auto net_err = [&](const std::string &name, std::vector<nn::Layer> layers, const nn::Tensor &x) {
        nn::Network net(std::move(layers));
        net.init(nn::RngStream(3, name));
        errs[name] = gradcheck_params(net, [&](nn::Tape &t, nn::Network &n) {
            return readout(t, n.forward(t, t.constant(x), nn::ForwardContext{true, nn::RngStream(5, "drop")}));
        });
        errs[name + " (input)"] = gradcheck(
            [&](nn::Tape &t, std::span<const nn::Var> v) {
                return readout(t, net.forward(t, v[0], nn::ForwardContext{true, nn::RngStream(5, "drop")}));
            },
            {x});
    };
    net_err("dense+relu+dropout+softmax",
            {nn::make_layer("g", "fc1", {LayerKind::dense, 6, 8}), nn::make_layer("g", "relu", {LayerKind::relu}),
             nn::make_layer("g", "drop", {LayerKind::dropout, 0, 0, 1, 1, 0, 1, 0.3}),
             nn::make_layer("g", "fc2", {LayerKind::dense, 8, 4}), nn::make_layer("g", "soft", {LayerKind::softmax})},
            random_tensor({5, 6}, nn::RngStream(1, "x1")));
    net_err("conv+maxpool+avgpool+gap",
            {nn::make_layer("g", "conv1", {LayerKind::conv2d, 2, 4, 3, 1, 1}),
             nn::make_layer("g", "pool", {LayerKind::max_pool, 0, 0, 2, 2}),
             nn::make_layer("g", "conv2", {LayerKind::conv2d, 4, 6, 3, 2, 1, 2}),
             nn::make_layer("g", "apool", {LayerKind::avg_pool, 0, 0, 2, 2}),
             nn::make_layer("g", "gap", {LayerKind::global_avg_pool}), nn::make_layer("g", "fc", {LayerKind::dense, 6, 3})},
            random_tensor({2, 2, 8, 8}, nn::RngStream(1, "x2")));
    net_err("conv+flatten+dense",
            {nn::make_layer("g", "conv", {LayerKind::conv2d, 1, 2, 3, 1, 0}), nn::make_layer("g", "flat", {LayerKind::flatten}),
             nn::make_layer("g", "fc", {LayerKind::dense, 8, 3})},
            random_tensor({3, 1, 4, 4}, nn::RngStream(1, "x3")));

    const int labels[] = {0, 2, 1, 1};
    for (std::size_t S : {1, 2, 4}) {
        std::vector<nn::Tensor> logits;
        for (std::size_t k = 0; k < S; ++k)
            logits.push_back(random_tensor({4, 3}, nn::RngStream(11, "logits").child("k", k), 1.5));
        errs["objective S=" + std::to_string(S)] = gradcheck(
            [&](nn::Tape &, std::span<const nn::Var> v) { return losses::cluster_objective(v, labels, {0.5}).total; },
            logits);
    }

    double worst = 0.0;
    std::string which;
    for (const auto &[k, v] : errs)
        if (v >= worst) {
            worst = v;
            which = k;
        }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 1e-3 && secs < 30.0,
            "all layer kinds and the objective, max rel err " + fmt("%.2e", worst) + " (" + which +
                ", limit 1e-3, h = 1e-4)" + fmt(", %.2f s (limit 30 s)", secs)};
}

// ---------------------------------------------------------------- 3

Outcome oracle_equivalence()
{
    const auto t0 = std::chrono::steady_clock::now();
    fl::ModelBlueprint bp;
    bp.hidden = {64, 64};
    bp.dropout_p = 0.2;
    fl::TrainConfig cfg;
    cfg.clients = 4;
    cfg.split_factor = 4;
    cfg.local_epochs = 3;
    cfg.batch_size = 16;
    cfg.augment.noise_std = 0.2;
    data::BlobsOptions o;
    o.n = 256;
    const auto train = data::synth_blobs(o, nn::RngStream(cfg.seed, "blobs"));
    const auto part = data::partition_iid(train, 4, nn::RngStream(cfg.seed, "partition"));
    const auto gap = feddct::testing::compare_trajectories(bp, cfg, train, part);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {gap.param_gap < 1e-10 && gap.in_flight == 0 && secs < 60.0,
            "S=4, E=3, 256 samples, " + std::to_string(gap.steps) + " steps, max |dW| " + fmt("%.3g", gap.param_gap) +
                " (limit 1e-10)" + fmt(", %.2f s (limit 60 s)", secs)};
}

// ---------------------------------------------------------------- 4

Outcome fedavg_reduction()
{
    data::BlobsOptions o;
    o.n = 500;
    const auto all = data::synth_blobs(o, nn::RngStream(3, "blobs"));
    auto [train, test] = data::train_test_split(all, 0.2, nn::RngStream(3, "split"));
    fl::TrainConfig cfg;
    cfg.clients = 4;
    cfg.split_factor = 1;
    cfg.lambda_cot = 0.0;
    cfg.local_epochs = 2;
    cfg.batch_size = 16;
    cfg.total_rounds = 5;
    cfg.augment.noise_std = 0.1;
    fl::ModelBlueprint bp;
    bp.hidden = {64, 64};
    bp.dropout_p = 0.1;
    const auto part = data::partition_iid(train, 4, nn::RngStream(3, "partition"));
    fl::Simulation a({fl::Algorithm::feddct, bp, cfg, train, test, part});
    fl::Simulation b({fl::Algorithm::fedavg, bp, cfg, train, test, part});
    bool same = true;
    for (int r = 0; r < cfg.total_rounds; ++r) {
        a.step();
        b.step();
        same = same && feddct::testing::params_identical(a.global(), b.global());
    }
    return {same, "S=1, lambda_cot=0 vs FedAvg, K=4, E=2, 5 rounds: trajectories " +
                      std::string(same ? "bit-identical" : "differ")};
}

// ---------------------------------------------------------------- 5

Outcome communication_accounting()
{
    const int K = 8, S = 4;
    data::BlobsOptions o;
    o.n = 640;
    const auto train = data::synth_blobs(o, nn::RngStream(5, "blobs"));
    fl::TrainConfig cfg;
    cfg.clients = K;
    cfg.split_factor = S;
    cfg.batch_size = 32;
    cfg.total_rounds = 2;
    fl::ModelBlueprint bp;
    const auto part = data::partition_iid(train, K, nn::RngStream(5, "partition"));
    fl::Simulation sim({fl::Algorithm::feddct, bp, cfg, train, train, part});

    const auto &sub = sim.global().subs.front();
    const std::size_t cut = sim.global().cut;
    const auto [lower, upper] = sub.split(cut);
    const double sub_params = static_cast<double>(sub.parameter_count());
    costs::CommParams base;
    base.S = S;
    base.K = K;
    base.Q = static_cast<double>(S * costs::kBytesPerElement * nn::shape_size(sub.output_shape(bp.input_shape, 0, cut)));
    base.beta = static_cast<double>(lower.parameter_count()) / sub_params;
    base.w_size = static_cast<double>(costs::kBytesPerElement) * S * sub_params;

    double worst_phase = 0.0, worst_round = 0.0;
    std::size_t checks = 0;
    for (int r = 0; r < cfg.total_rounds; ++r) {
        sim.step();
        for (std::size_t c = 0; c < sim.last_clusters().size(); ++c) {
            const auto &net = *sim.last_transports()[c];
            const auto &res = sim.last_results()[c];
            for (const auto &ph : res.phases) {
                costs::CommParams p = base;
                p.p = static_cast<double>(ph.samples) * K;
                for (auto id : sim.last_clusters()[c].members) {
                    const double want = id == ph.main ? costs::comm_cost_main(p) : costs::comm_cost_proxy(p);
                    const double got = static_cast<double>(net.phase_bytes(id, r, ph.phase).accounted());
                    worst_phase = std::max(worst_phase, std::abs(got - want) / want);
                    ++checks;
                }
            }
            costs::CommParams round = base;
            round.p = static_cast<double>(train.size());
            for (auto id : sim.last_clusters()[c].members) {
                const double got = static_cast<double>(net.round_bytes(id, r).accounted());
                worst_round = std::max(worst_round, std::abs(got - costs::comm_cost_total(round)) / costs::comm_cost_total(round));
            }
        }
    }

    nn::RngStream rng(99, "comm-draws");
    double worst_identity = 0.0;
    for (int i = 0; i < 1000; ++i) {
        costs::CommParams c;
        c.S = 2 + static_cast<int>(rng.next_below(63));
        c.K = c.S * (1 + static_cast<int>(rng.next_below(50)));
        c.p = 1e7 * rng.next_uniform();
        c.Q = 1e6 * rng.next_uniform();
        c.beta = 1e-3 + (1 - 2e-3) * rng.next_uniform();
        c.w_size = 1e9 * rng.next_uniform();
        const double lhs = costs::comm_cost_main(c) + (c.S - 1) * costs::comm_cost_proxy(c);
        worst_identity = std::max(worst_identity, std::abs(lhs - costs::comm_cost_total(c)) / costs::comm_cost_total(c));
    }
    const bool ok = worst_phase < 1e-12 && worst_round < 1e-12 && worst_identity < 1e-9;
    return {ok, std::to_string(checks) + " per-phase role checks, max rel err " + fmt("%.2g", worst_phase) +
                    "; per-round totals " + fmt("%.2g", worst_round) + "; main + (S-1) proxy = total over 1000 draws " +
                    fmt("%.2g", worst_identity) + " (limit 1e-9)"};
}

// ---------------------------------------------------------------- 6

Outcome cot_properties()
{
    nn::RngStream rng(6, "cot-draws");
    int bounds = 0, zero = 0, perm = 0, positive = 0;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t S = 2 + rng.next_below(15), C = 2 + rng.next_below(20);
        losses::PredictionSet ps;
        for (std::size_t k = 0; k < S; ++k) {
            std::vector<double> p(C);
            double s = 0.0;
            // Mix of smooth and peaked distributions, some with exact zeros.
            const double sharp = rng.next_uniform() < 0.2 ? 8.0 : 1.0;
            for (auto &v : p) {
                v = rng.next_uniform() < 0.1 ? 0.0 : std::pow(rng.next_uniform(), sharp);
                s += v;
            }
            if (s == 0.0)
                p[0] = s = 1.0;
            for (auto &v : p)
                v /= s;
            ps.probs.push_back(std::move(p));
        }
        const double v = losses::cot_loss(ps);
        bounds += !(v >= -1e-12 && v <= std::log(static_cast<double>(S)) + 1e-12);
        auto shuffled = ps;
        nn::shuffle_in_place(shuffled.probs, rng);
        perm += std::abs(losses::cot_loss(shuffled) - v) > 1e-12;
        losses::PredictionSet same{std::vector<std::vector<double>>(S, ps.probs[rng.next_below(S)]), 0};
        zero += std::abs(losses::cot_loss(same)) > 1e-9;
        // Distinct distributions give a strictly positive value.
        bool distinct = false;
        for (std::size_t k = 1; k < S && !distinct; ++k)
            for (std::size_t c = 0; c < C; ++c)
                if (std::abs(ps.probs[k][c] - ps.probs[0][c]) > 1e-3)
                    distinct = true;
        positive += distinct && v <= 1e-9;
    }
    const int failures = bounds + zero + perm + positive;
    return {failures == 0, "10000 draws: bounds [0, ln S] " + std::to_string(bounds) + " failures, zero iff equal " +
                               std::to_string(zero + positive) + ", permutation " + std::to_string(perm)};
}

// ---------------------------------------------------------------- 7

Outcome convergence()
{
    const auto t0 = std::chrono::steady_clock::now();
    fl::ModelBlueprint bp;
    bp.hidden = {128, 128};
    double worst_feddct = 1.0, worst_margin = 1.0;
    std::ostringstream per_seed;
    std::size_t fd_params = 0, fa_params = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        data::BlobsOptions o;
        o.n = 2000;
        o.classes = 4;
        o.sample_shape = {16};
        o.separation = 6.0;
        const auto all = data::synth_blobs(o, nn::RngStream(seed, "data").child("blobs"));
        auto [train, test] = data::train_test_split(all, 0.2, nn::RngStream(seed, "data").child("split"));
        fl::TrainConfig cfg;
        cfg.clients = 8;
        cfg.split_factor = 4;
        cfg.local_epochs = 1;
        cfg.lambda_cot = 0.5;
        cfg.total_rounds = 50;
        cfg.batch_size = 32;
        cfg.lr = 0.05;
        cfg.seed = seed;
        const auto part = data::partition_iid(train, 8, nn::RngStream(seed, "data").child("partition"));
        fl::Simulation fd({fl::Algorithm::feddct, bp, cfg, train, test, part});
        fl::Simulation fa({fl::Algorithm::fedavg, bp, cfg, train, test, part});
        const double a = fd.run().back().test_accuracy;
        const double b = fa.run().back().test_accuracy;
        fd_params = fd.global().parameter_count();
        fa_params = fa.global().parameter_count();
        worst_feddct = std::min(worst_feddct, a);
        worst_margin = std::min(worst_margin, a - b);
        per_seed << " seed " << seed << ": " << fmt("%.2f", 100 * a) << "% vs " << fmt("%.2f", 100 * b) << "%;";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst_feddct >= 0.90 && worst_margin >= -0.02 && secs < 300.0,
            "K=8, S=4, 50 rounds, FedDCT vs FedAvg test accuracy:" + per_seed.str() + " params " +
                std::to_string(fd_params) + " vs " + std::to_string(fa_params) + fmt(", %.1f s (limit 300 s)", secs)};
}

// ---------------------------------------------------------------- 8

Outcome memory_accounting()
{
    using division::LayerSpec;
    using division::LayerType;
    auto chain = [](std::vector<std::size_t> widths, std::size_t kernel, std::size_t hw) {
        division::ModelSpec m;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i)
            m.layers.push_back({"l" + std::to_string(i), LayerType::conv, kernel, widths[i], widths[i + 1], 1, hw, hw});
        return m;
    };
    auto divided = [](const division::ModelSpec &m, int S) {
        division::ModelSpec d = m;
        const auto plan = division::divide_model(m, S);
        d.layers.clear();
        for (const auto &[o, x] : plan.per_layer)
            d.layers.push_back(x);
        return d;
    };
    division::ModelSpec resnet = chain({16, 16, 32, 64}, 3, 8);
    resnet.family = division::Family::resnet_cifar;
    const std::vector<std::pair<std::string, division::ModelSpec>> models{
        {"resnet stages", resnet},
        {"bottleneck", chain({256, 64, 64, 256}, 1, 8)},
        {"conv stack", chain({64, 96, 128, 192, 256}, 3, 8)},
        {"mlp widths", chain({128, 128, 128}, 1, 1)}};

    double worst = 0.0;
    int exact_checked = 0, exact_failed = 0;
    std::string worst_case;
    for (const auto &[name, m] : models) {
        const double orig = static_cast<double>(costs::memory_estimate(m, 1).mem_model);
        for (int S : {2, 3, 4, 5, 8, 9, 16, 32}) {
            const double sub = static_cast<double>(costs::memory_estimate(divided(m, S), 1).mem_model);
            const double err = std::abs(sub * S - orig) / orig;
            if (err > worst) {
                worst = err;
                worst_case = name + " S=" + std::to_string(S);
            }
            const auto r = static_cast<std::size_t>(std::lround(std::sqrt(S)));
            bool divisible = r * r == static_cast<std::size_t>(S);
            for (const auto &l : m.layers)
                divisible = divisible && l.c_in % r == 0 && l.c_out % r == 0;
            if (divisible) {
                ++exact_checked;
                exact_failed += sub * S != orig;
            }
        }
    }
    // Per-client training memory shrinks as S grows.
    fl::ModelBlueprint cnn;
    cnn.family = fl::ModelFamily::dctnet;
    cnn.input_shape = {3, 32, 32};
    bool shrinking = true;
    std::uint64_t prev = 0;
    for (int S : {1, 2, 4, 8, 16}) {
        const auto c = costs::memory_estimate(fl::model_spec(cnn, S), 64);
        const std::uint64_t total = c.mem_model + c.mem_optimizer + c.mem_activation;
        shrinking = shrinking && (S == 1 || total < prev);
        prev = total;
    }
    return {worst <= 0.15 && exact_failed == 0 && exact_checked > 0 && shrinking,
            "S * mem_model(sub) vs mem_model(original): max deviation " + fmt("%.1f%%", 100 * worst) + " (" +
                worst_case + ", limit 15%), " + std::to_string(exact_checked - exact_failed) + "/" +
                std::to_string(exact_checked) + " divisible cases exact, per-client memory " +
                (shrinking ? "decreases" : "does not decrease") + " with S"};
}

} // namespace

int main(int argc, char **argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"division tables", division_tables},
        {"gradient suite", gradient_suite},
        {"oracle equivalence", oracle_equivalence},
        {"FedAvg reduction", fedavg_reduction},
        {"communication accounting", communication_accounting},
        {"co-training loss properties", cot_properties},
        {"desk-scale convergence", convergence},
        {"memory accounting", memory_accounting}};
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.push_back(std::stoi(argv[i]));
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(criteria.size()); ++i)
            selected.push_back(i);

    int failed = 0;
    for (int n : selected) {
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::printf("criterion %d: unknown\n", n);
            ++failed;
            continue;
        }
        Outcome o;
        try {
            o = criteria[n - 1].second();
        } catch (const std::exception &e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("criterion %d %s  %s: %s\n", n, o.pass ? "PASS" : "FAIL", criteria[n - 1].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
