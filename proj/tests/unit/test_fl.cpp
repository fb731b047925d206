#include "oracle.hpp"

#include "feddct/costs/costs.hpp"
#include "feddct/fl/aggregate.hpp"
#include "feddct/fl/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace feddct;
using namespace feddct::fl;
using feddct::testing::MonolithicCluster;
using feddct::testing::max_param_diff;
using feddct::testing::params_identical;

namespace {

ModelBlueprint small_mlp(double dropout = 0.0)
{
    ModelBlueprint bp;
    bp.hidden = {32, 32};
    bp.dropout_p = dropout;
    return bp;
}

data::LabeledDataset blobs(std::size_t n, std::uint64_t seed = 1)
{
    data::BlobsOptions o;
    o.n = n;
    return data::synth_blobs(o, nn::RngStream(seed, "blobs"));
}

TrainConfig config(int K, int S)
{
    TrainConfig c;
    c.clients = K;
    c.split_factor = S;
    c.batch_size = 16;
    c.lr = 0.05;
    c.total_rounds = 4;
    return c;
}

Cluster first_cluster(int S)
{
    Cluster c;
    for (int k = 0; k < S; ++k)
        c.members.push_back(static_cast<protocol::NodeId>(k));
    return c;
}

double trajectory_gap(const ModelBlueprint &bp, const TrainConfig &cfg, std::size_t n)
{
    const auto train = blobs(n);
    const auto part = data::partition_iid(train, cfg.clients, nn::RngStream(cfg.seed, "part"));
    const auto t = feddct::testing::compare_trajectories(bp, cfg, train, part);
    CHECK(t.objective_gap < 1e-12);
    CHECK(t.in_flight == 0);
    return t.param_gap;
}

} // namespace

TEST_CASE("blueprint division and naming")
{
    const auto bp = small_mlp(0.4);
    const auto net = build_network(bp, 4, 2, 1);
    CHECK(net.layer(0).name == "fc1");
    CHECK(net.layer(0).params[0].id == "sub2/fc1/weight");
    CHECK(net.layer(0).config.out == 16);
    CHECK(net.layer(2).config.dropout_p == doctest::Approx(0.2));
    CHECK(resolve_cut(bp) == 3);
    CHECK(resolve_cut(small_mlp()) == 2);
    CHECK(divided_widths(small_mlp(), 2) == std::vector<std::size_t>{23, 23});

    ModelBlueprint cnn;
    cnn.family = ModelFamily::dctnet;
    cnn.input_shape = {1, 8, 8};
    CHECK(divided_widths(cnn, 8) == std::vector<std::size_t>{6, 12, 23});
    const auto c = build_network(cnn, 4, 0, 1);
    CHECK(c.output_shape({1, 8, 8}) == nn::Shape{4});
    CHECK(model_spec(cnn, 4).layers.size() == 4);

    // Different sub-models start from different weights.
    CHECK_FALSE(build_network(bp, 4, 0, 1).layer(0).params[0].value.identical(net.layer(0).params[0].value));
}

TEST_CASE("split at the cut is transparent")
{
    const auto bp = small_mlp(0.2);
    nn::Network net = build_network(bp, 1, 0, 3);
    CHECK_THROWS_AS(split_at_cut(net, 0), std::out_of_range);
    CHECK_THROWS_AS(split_at_cut(net, net.size()), std::out_of_range);
    auto parts = split_at_cut(net, 1);
    CHECK(params_identical(EnsembleModel{{merge(parts)}, 1}, EnsembleModel{{net}, 1}));

    const auto x = feddct::testing::random_tensor({5, 16}, nn::RngStream(1, "x"));
    const nn::ForwardContext ctx{true, nn::RngStream(2, "drop")};
    parts = split_at_cut(net, resolve_cut(bp));
    nn::Tape whole;
    const nn::Var y = net.forward(whole, whole.constant(x), ctx);
    nn::Tape lo, up;
    const nn::Var a = parts.lower.forward(lo, lo.constant(x), ctx);
    const nn::Var z = parts.upper.forward(up, up.leaf(a.value()), ctx);
    CHECK(nn::max_abs_diff(y.value(), z.value()) < 1e-12);
}

TEST_CASE("cluster partition")
{
    std::vector<protocol::NodeId> ids(20);
    for (protocol::NodeId i = 0; i < 20; ++i)
        ids[i] = i;
    const auto c = cluster_partition(ids, 4, nn::RngStream(1, "c"));
    CHECK(c.size() == 5);
    std::set<protocol::NodeId> seen;
    for (const auto &cl : c) {
        CHECK(cl.members.size() == 4);
        seen.insert(cl.members.begin(), cl.members.end());
    }
    CHECK(seen.size() == 20);
    CHECK(cluster_partition(ids, 4, nn::RngStream(1, "c"))[0].members == c[0].members);
    CHECK(cluster_partition(std::span(ids).first(4), 4, nn::RngStream(1, "c")).size() == 1);
    const auto fixed = cluster_partition(ids, 4, nn::RngStream(1, "c"), false);
    CHECK(fixed[1].members == std::vector<protocol::NodeId>{4, 5, 6, 7});
    CHECK_THROWS_AS(cluster_partition(std::span(ids).first(6), 4, nn::RngStream(1, "c")), ClusteringError);
}

TEST_CASE("aggregation")
{
    const auto bp = small_mlp();
    const auto a = EnsembleModel::create(bp, 2, 1), b = EnsembleModel::create(bp, 2, 2), c = EnsembleModel::create(bp, 2, 3);

    const ClusterUpdate one[] = {{&a, 10, 0}};
    CHECK(params_identical(cluster_aggregate(one), a));

    const ClusterUpdate two[] = {{&a, 50, 0}, {&b, 50, 4}};
    const auto avg = cluster_aggregate(two);
    const auto pa = a.parameters(), pb = b.parameters(), pm = avg.parameters();
    for (std::size_t i = 0; i < pm.size(); ++i)
        for (std::size_t j = 0; j < pm[i]->value.size(); ++j)
            REQUIRE(pm[i]->value[j] == doctest::Approx((pa[i]->value[j] + pb[i]->value[j]) / 2).epsilon(1e-15));

    const ClusterUpdate three[] = {{&a, 100, 0}, {&b, 300, 2}, {&c, 600, 4}};
    const auto w = cluster_aggregate(three);
    const auto pc = c.parameters(), pw = w.parameters();
    for (std::size_t i = 0; i < pw.size(); ++i)
        for (std::size_t j = 0; j < pw[i]->value.size(); ++j) {
            const double brute = (100 * pa[i]->value[j] + 300 * pb[i]->value[j] + 600 * pc[i]->value[j]) / 1000;
            REQUIRE(std::abs(pw[i]->value[j] - brute) < 1e-12);
        }
    const ClusterUpdate shuffled[] = {three[2], three[0], three[1]};
    CHECK(params_identical(cluster_aggregate(shuffled), w));

    const ClusterUpdate none[] = {{nullptr, 1, 0}};
    CHECK_THROWS(cluster_aggregate(none));
}

TEST_CASE("ensemble prediction averages logits")
{
    const auto bp = small_mlp();
    auto solo = EnsembleModel::create(bp, 1, 1);
    EnsembleModel twin{{solo.subs[0], solo.subs[0], solo.subs[0]}, solo.cut};
    const auto x = feddct::testing::random_tensor({6, 16}, nn::RngStream(1, "x"));
    CHECK(nn::max_abs_diff(ensemble_predict(twin, x), ensemble_predict(solo, x)) < 1e-12);

    // Negating the output layer turns logits l into -l.
    EnsembleModel mirror{{solo.subs[0], solo.subs[0]}, solo.cut};
    for (auto &p : mirror.subs[1].layer(mirror.subs[1].size() - 1).params)
        for (auto &v : p.value.values())
            v = -v;
    const auto u = ensemble_predict(mirror, x);
    for (double v : u.values())
        CHECK(v == doctest::Approx(0.25));

    auto pair = EnsembleModel::create(bp, 2, 5);
    const auto avg = ensemble_logits(pair, x);
    nn::Tape t;
    const auto l0 = pair.subs[0].forward(t, t.constant(x), {}).value();
    const auto l1 = pair.subs[1].forward(t, t.constant(x), {}).value();
    for (std::size_t i = 0; i < avg.size(); ++i)
        CHECK(avg[i] == doctest::Approx((l0[i] + l1[i]) / 2).epsilon(1e-14));
}

TEST_CASE("message-passing cluster matches the monolithic oracle")
{
    SUBCASE("S = 2")
    {
        CHECK(trajectory_gap(small_mlp(), config(2, 2), 96) < 1e-10);
    }
    SUBCASE("S = 4, dropout, augmentation, two epochs")
    {
        auto cfg = config(4, 4);
        cfg.local_epochs = 2;
        cfg.augment.noise_std = 0.3;
        cfg.augment.erase_p = 0.5;
        cfg.weight_decay = 1e-3;
        CHECK(trajectory_gap(small_mlp(0.3), cfg, 128) == 0.0);
    }
    SUBCASE("random rotation and per-round upper sync")
    {
        auto cfg = config(3, 3);
        cfg.local_epochs = 3;
        cfg.rotation = Rotation::random;
        cfg.upper_sync = UpperSync::per_round;
        CHECK(trajectory_gap(small_mlp(), cfg, 90) == 0.0);
    }
    SUBCASE("convolutional sub-models")
    {
        ModelBlueprint cnn;
        cnn.family = ModelFamily::dctnet;
        cnn.input_shape = {1, 4, 4};
        cnn.stages = {8, 8, 8};
        data::BlobsOptions o;
        o.n = 48;
        o.sample_shape = {1, 4, 4};
        const auto train = data::synth_blobs(o, nn::RngStream(1, "blobs"));
        const auto cfg = config(2, 2);
        const auto part = data::partition_iid(train, 2, nn::RngStream(1, "part"));
        const auto global = EnsembleModel::create(cnn, 2, 1);
        protocol::Transport net;
        ClusterSession session(first_cluster(2), global, train, part, cfg, 0, cfg.lr, net);
        const auto result = session.fed_co_training();
        MonolithicCluster oracle(global, cfg, 0, cfg.lr);
        oracle.run_round(first_cluster(2), train, part);
        CHECK(params_identical(result.model, oracle.model));
    }
}

TEST_CASE("a full round uploads the trained cluster model")
{
    auto cfg = config(4, 4);
    cfg.local_epochs = 2;
    const auto train = blobs(160);
    const auto part = data::partition_iid(train, 4, nn::RngStream(1, "part"));
    const auto global = EnsembleModel::create(small_mlp(), 4, 1);
    protocol::Transport net;
    ClusterSession session(first_cluster(4), global, train, part, cfg, 0, cfg.lr, net);
    const auto r = session.fed_co_training();
    MonolithicCluster oracle(global, cfg, 0, cfg.lr);
    oracle.run_round(first_cluster(4), train, part);
    CHECK(params_identical(r.model, oracle.model));
    CHECK(r.samples == 160);
    CHECK(r.phases.size() == 8);
    std::multiset<protocol::NodeId> mains;
    for (const auto &p : r.phases)
        mains.insert(p.main);
    for (protocol::NodeId k = 0; k < 4; ++k)
        CHECK(mains.count(k) == 2);
    CHECK(net.in_flight() == 0);
}

TEST_CASE("per-phase bytes follow the main and proxy formulas")
{
    for (auto S : {2, 4}) {
        auto cfg = config(S, S);
        const auto bp = small_mlp();
        const auto train = blobs(40 * S + 3);
        const auto part = data::partition_iid(train, S, nn::RngStream(1, "part"));
        const auto global = EnsembleModel::create(bp, S, 1);
        protocol::Transport net;
        ClusterSession session(first_cluster(S), global, train, part, cfg, 0, cfg.lr, net);
        const auto r = session.fed_co_training();

        const auto [lower, upper] = global.subs[0].split(global.cut);
        const double sub = static_cast<double>(global.subs[0].parameter_count());
        const double cut_elems = static_cast<double>(nn::shape_size(global.subs[0].output_shape(bp.input_shape, 0, global.cut)));
        for (const auto &ph : r.phases) {
            costs::CommParams c;
            c.S = S;
            c.K = S;
            c.p = static_cast<double>(ph.samples) * S;
            c.Q = S * 8.0 * cut_elems;
            c.beta = static_cast<double>(lower.parameter_count()) / sub;
            c.w_size = 8.0 * S * sub;
            for (protocol::NodeId k = 0; k < static_cast<protocol::NodeId>(S); ++k) {
                const double got = static_cast<double>(net.phase_bytes(k, 0, ph.phase).accounted());
                const double want = k == ph.main ? costs::comm_cost_main(c) : costs::comm_cost_proxy(c);
                CHECK(std::abs(got - want) <= 1e-9 * want);
            }
        }
    }
}

TEST_CASE("a missing prediction aborts the round and names the client")
{
    const auto train = blobs(64);
    auto cfg = config(2, 2);
    const auto part = data::partition_iid(train, 2, nn::RngStream(1, "part"));
    const auto global = EnsembleModel::create(small_mlp(), 2, 1);
    protocol::Transport net;
    net.set_drop_filter([](const protocol::Message &m) {
        return m.kind == protocol::MessageKind::prediction && m.sender == 1;
    });
    ClusterSession session(first_cluster(2), global, train, part, cfg, 0, cfg.lr, net);
    try {
        session.fed_co_training();
        FAIL("expected RoundAborted");
    } catch (const protocol::RoundAborted &e) {
        CHECK(e.client == 1);
    }
}

TEST_CASE("FedAvg")
{
    const auto train = blobs(120);
    auto cfg = config(1, 1);
    cfg.local_epochs = 2;
    const auto part = data::partition_iid(train, 1, nn::RngStream(1, "part"));
    const auto global = EnsembleModel::create(small_mlp(), 1, 1);

    SUBCASE("one client equals local SGD on its shard")
    {
        protocol::Transport net;
        const protocol::NodeId ids[] = {0};
        const auto r = fedavg_round(global, ids, train, part, cfg, 0, cfg.lr, net);
        nn::Network local = global.subs[0];
        local.zero_momentum();
        local_sgd(local, part.assignments[0], train, cfg, 0, 0, cfg.lr);
        CHECK(params_identical(r.model, EnsembleModel{{local}, global.cut}));
        CHECK(r.stats.batches == 2 * 8);
    }
    SUBCASE("a lost upload aborts the round")
    {
        const auto part2 = data::partition_iid(train, 2, nn::RngStream(1, "part"));
        protocol::Transport net;
        net.set_drop_filter([](const protocol::Message &m) { return m.receiver == protocol::kServer && m.sender == 1; });
        const protocol::NodeId ids[] = {0, 1};
        CHECK_THROWS_AS(fedavg_round(global, ids, train, part2, cfg, 0, cfg.lr, net), protocol::RoundAborted);
    }
    SUBCASE("ensembles are rejected")
    {
        protocol::Transport net;
        const protocol::NodeId ids[] = {0};
        CHECK_THROWS(fedavg_round(EnsembleModel::create(small_mlp(), 2, 1), ids, train, part, cfg, 0, cfg.lr, net));
    }
}

TEST_CASE("S = 1 without co-training reproduces FedAvg bit for bit")
{
    const auto all = blobs(300);
    const auto [train, test] = data::train_test_split(all, 0.2, nn::RngStream(1, "split"));
    auto cfg = config(4, 1);
    cfg.lambda_cot = 0.0;
    cfg.local_epochs = 2;
    cfg.augment.noise_std = 0.1;
    const auto part = data::partition_iid(train, 4, nn::RngStream(1, "part"));
    const auto bp = small_mlp(0.2);
    Simulation a({Algorithm::feddct, bp, cfg, train, test, part});
    Simulation b({Algorithm::fedavg, bp, cfg, train, test, part});
    for (int r = 0; r < 3; ++r) {
        a.step();
        b.step();
        CHECK(params_identical(a.global(), b.global()));
    }
}

TEST_CASE("simulation is independent of the lane count")
{
    const auto all = blobs(300);
    const auto [train, test] = data::train_test_split(all, 0.2, nn::RngStream(1, "split"));
    auto cfg = config(8, 2);
    const auto part = data::partition_iid(train, 8, nn::RngStream(1, "part"));
    Simulation a({Algorithm::feddct, small_mlp(), cfg, train, test, part});
    cfg.lanes = 4;
    Simulation b({Algorithm::feddct, small_mlp(), cfg, train, test, part});
    for (int r = 0; r < 2; ++r) {
        const auto ma = a.step(), mb = b.step();
        CHECK(ma.test_accuracy == mb.test_accuracy);
        CHECK(ma.bytes_per_client == mb.bytes_per_client);
        CHECK(params_identical(a.global(), b.global()));
    }
    CHECK(a.last_clusters().size() == 4);
    CHECK(a.last_transports().size() == 4);
}

TEST_CASE("simulation rejects K not divisible by S")
{
    const auto train = blobs(60);
    auto cfg = config(6, 4);
    const auto part = data::partition_iid(train, 6, nn::RngStream(1, "part"));
    CHECK_THROWS_AS(Simulation({Algorithm::feddct, small_mlp(), cfg, train, train, part}), ClusteringError);
}

TEST_CASE("main-shard loss falls over local epochs")
{
    const auto train = blobs(200);
    auto cfg = config(2, 2);
    cfg.local_epochs = 5;
    const auto part = data::partition_iid(train, 2, nn::RngStream(1, "part"));
    const auto global = EnsembleModel::create(small_mlp(), 2, 1);
    MonolithicCluster oracle(global, cfg, 0, cfg.lr);
    std::vector<double> per_epoch;
    for (int e = 0; e < cfg.local_epochs; ++e) {
        oracle.begin_phase(0);
        double sum = 0.0;
        const auto batches = epoch_batches(part.assignments[0], cfg.batch_size, cfg.seed, 0, 0, e);
        for (std::size_t b = 0; b < batches.size(); ++b)
            sum += oracle.step(BatchData{train.gather(batches[b]), train.gather_labels(batches[b]), e, b});
        per_epoch.push_back(sum / static_cast<double>(batches.size()));
    }
    CHECK(per_epoch.back() < per_epoch.front());
}
