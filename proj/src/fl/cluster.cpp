#include "feddct/fl/cluster.hpp"

#include "feddct/losses/losses.hpp"
#include "feddct/nn/ops.hpp"
#include "feddct/nn/optim.hpp"

namespace feddct::fl {

using protocol::kServer;
using protocol::Message;
using protocol::MessageKind;
using protocol::NodeId;

struct ClusterSession::Device {
    NodeId id = 0;
    std::size_t sub = 0;
    nn::Network upper;
    std::vector<nn::Network> lower;
    bool holds_lower = false;

    nn::Tape tape;
    nn::Var leaf, logits, ce;
};

namespace {

nn::Network blank_copy(const nn::Network &net)
{
    nn::Network out = net;
    for (auto *p : out.parameters()) {
        p->value.fill(0.0);
        p->momentum.fill(0.0);
        p->grad.reset();
    }
    return out;
}

std::vector<const nn::Network *> pointers(const std::vector<nn::Network> &nets)
{
    std::vector<const nn::Network *> out;
    for (const auto &n : nets)
        out.push_back(&n);
    return out;
}

std::vector<nn::Network *> pointers(std::vector<nn::Network> &nets)
{
    std::vector<nn::Network *> out;
    for (auto &n : nets)
        out.push_back(&n);
    return out;
}

nn::Tensor labels_tensor(const std::vector<int> &labels)
{
    std::vector<double> v(labels.begin(), labels.end());
    return nn::Tensor({labels.size()}, std::move(v));
}

nn::Shape batched(std::size_t b, const nn::Shape &sample)
{
    nn::Shape s{b};
    s.insert(s.end(), sample.begin(), sample.end());
    return s;
}

} // namespace

ClusterSession::ClusterSession(Cluster cluster, const EnsembleModel &global, const data::LabeledDataset &train,
                               const data::Partition &partition, const TrainConfig &cfg, int round, double lr,
                               protocol::Transport &transport)
    : cluster_(std::move(cluster)), train_(train), partition_(partition), cfg_(cfg), round_(round), lr_(lr),
      net_(transport), split_(global.size()), cut_(global.cut)
{
    if (cluster_.members.size() != split_)
        throw ClusteringError("cluster has " + std::to_string(cluster_.members.size()) + " members for " +
                              std::to_string(split_) + " sub-models");
    for (auto id : cluster_.members)
        if (id >= partition_.clients())
            throw ClusteringError("client " + std::to_string(id) + " has no data shard");
    for (const auto &sub : global.subs) {
        auto parts = split_at_cut(sub, cut_);
        server_lower_.push_back(std::move(parts.lower));
        server_upper_.push_back(std::move(parts.upper));
    }
    cut_shape_ = server_lower_.front().output_shape(train_.sample_shape);
    classes_ = static_cast<std::size_t>(train_.class_count);
    for (std::size_t k = 0; k < split_; ++k) {
        auto d = std::make_unique<Device>();
        d->id = cluster_.members[k];
        d->sub = k;
        d->upper = blank_copy(server_upper_[k]);
        devices_.push_back(std::move(d));
    }
    main_tape_ = std::make_unique<nn::Tape>();
}

ClusterSession::~ClusterSession() = default;

std::vector<std::size_t> ClusterSession::rotation(int epoch) const
{
    if (cfg_.rotation == Rotation::random)
        return nn::permutation(split_, nn::RngStream(cfg_.seed, "rotation")
                                           .child("r", static_cast<std::uint64_t>(round_))
                                           .child("c", cluster_.min_id())
                                           .child("e", static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(split_);
    for (std::size_t k = 0; k < split_; ++k)
        order[k] = k;
    return order;
}

void ClusterSession::set_roles()
{
    for (std::size_t k = 0; k < split_; ++k)
        net_.set_role(id(k), k == main_pos_ ? protocol::Role::main : protocol::Role::proxy);
}

void ClusterSession::server_send_upper(std::size_t pos)
{
    const nn::Network *src = &server_upper_[pos];
    net_.send(Message{MessageKind::upper_portion, kServer, id(pos), parameter_values({&src, 1})});
}

void ClusterSession::member_recv_upper(std::size_t pos)
{
    const nn::Network *tmpl = &server_upper_[pos];
    const auto shapes = parameter_shapes({&tmpl, 1});
    Message msg = net_.recv(id(pos), kServer, MessageKind::upper_portion, shapes);
    nn::Network *dst = &devices_[pos]->upper;
    load_parameter_values({&dst, 1}, msg.tensors);
}

void ClusterSession::member_upload_upper(std::size_t pos)
{
    const nn::Network *src = &devices_[pos]->upper;
    net_.send(Message{MessageKind::cluster_upload, id(pos), kServer, parameter_values({&src, 1})});
    const auto shapes = parameter_shapes({&src, 1});
    Message msg = net_.recv(kServer, id(pos), MessageKind::cluster_upload, shapes);
    nn::Network *dst = &server_upper_[pos];
    load_parameter_values({&dst, 1}, msg.tensors);
}

void ClusterSession::begin_phase(std::size_t main_pos, int phase)
{
    if (main_pos >= split_)
        throw std::out_of_range("main position " + std::to_string(main_pos) + " outside cluster");
    const std::size_t prev = main_pos_;
    main_pos_ = main_pos;
    phase_ = phase;
    net_.set_context(round_, phase);
    set_roles();

    if (phase == 0) {
        const auto lowers = pointers(server_lower_);
        net_.send(Message{MessageKind::lower_ensemble, kServer, id(main_pos), parameter_values(lowers)});
    }
    Device &main = *devices_[main_pos];
    if (!main.holds_lower) {
        const NodeId from = phase == 0 ? kServer : id(prev);
        Message msg = net_.recv(main.id, from, MessageKind::lower_ensemble, parameter_shapes(pointers(server_lower_)));
        main.lower.clear();
        for (const auto &l : server_lower_)
            main.lower.push_back(blank_copy(l));
        load_parameter_values(pointers(main.lower), msg.tensors);
        main.holds_lower = true;
    }
    if (cfg_.upper_sync == UpperSync::per_phase || phase == 0) {
        for (std::size_t k = 0; k < split_; ++k)
            server_send_upper(k);
        for (std::size_t k = 0; k < split_; ++k)
            member_recv_upper(k);
    }
}

void ClusterSession::end_phase(std::optional<std::size_t> next_main_pos)
{
    if (cfg_.upper_sync == UpperSync::per_phase)
        for (std::size_t k = 0; k < split_; ++k)
            member_upload_upper(k);
    Device &main = *devices_[main_pos_];
    if (!next_main_pos) {
        const auto lowers = pointers(std::as_const(main.lower));
        net_.send(Message{MessageKind::cluster_upload, main.id, kServer, parameter_values(lowers)});
        Message msg = net_.recv(kServer, main.id, MessageKind::cluster_upload, parameter_shapes(lowers));
        load_parameter_values(pointers(server_lower_), msg.tensors);
        main.holds_lower = false;
        main.lower.clear();
        if (cfg_.upper_sync == UpperSync::per_round)
            for (std::size_t k = 0; k < split_; ++k)
                member_upload_upper(k);
    } else if (*next_main_pos != main_pos_) {
        const auto lowers = pointers(std::as_const(main.lower));
        net_.send(Message{MessageKind::lower_ensemble, main.id, id(*next_main_pos), parameter_values(lowers)});
        main.holds_lower = false;
        main.lower.clear();
    }
}

BatchData ClusterSession::make_batch(std::span<const std::size_t> indices, int epoch, std::size_t index) const
{
    return BatchData{train_.gather(indices), train_.gather_labels(indices), epoch, index};
}

std::vector<nn::Tensor> ClusterSession::main_device_forward(const BatchData &batch)
{
    Device &main = *devices_[main_pos_];
    if (!main.holds_lower)
        throw std::logic_error(protocol::node_name(main.id) + " is main but does not hold W^m");
    std::vector<nn::RngStream> seeds;
    for (std::size_t k = 0; k < split_; ++k)
        seeds.push_back(augment_stream(cfg_.seed, round_, main.id, batch.epoch, batch.index, k));
    const auto views = data::generate_views(batch.x, split_, seeds, cfg_.augment);

    main_tape_->reset();
    lower_out_.clear();
    std::vector<nn::Tensor> smashed;
    for (std::size_t k = 0; k < split_; ++k) {
        nn::ForwardContext ctx{true, dropout_stream(cfg_.seed, round_, main.id, batch.epoch, batch.index, k)};
        lower_out_.push_back(main.lower[k].forward(*main_tape_, main_tape_->constant(views[k]), ctx));
        smashed.push_back(lower_out_.back().value());
    }
    const nn::Tensor labels = labels_tensor(batch.labels);
    for (std::size_t k = 0; k < split_; ++k)
        if (k != main_pos_)
            net_.send(Message{MessageKind::smashed, main.id, id(k), {smashed[k], labels}});
    return smashed;
}

double ClusterSession::proxy_devices_update(const BatchData &batch)
{
    const std::size_t b = batch.labels.size();
    const NodeId main_id = id(main_pos_);
    const nn::Shape act_shape = batched(b, cut_shape_);
    const nn::Shape logit_shape{b, classes_};

    for (std::size_t k = 0; k < split_; ++k) {
        Device &d = *devices_[k];
        nn::Tensor smashed;
        std::vector<int> labels = batch.labels;
        if (k == main_pos_) {
            smashed = lower_out_[k].value();
        } else {
            const nn::Shape shapes[] = {act_shape, nn::Shape{b}};
            Message msg = net_.recv(d.id, main_id, MessageKind::smashed, shapes);
            smashed = std::move(msg.tensors[0]);
            for (std::size_t i = 0; i < b; ++i)
                labels[i] = static_cast<int>(msg.tensors[1][i]);
        }
        d.tape.reset();
        d.leaf = d.tape.leaf(std::move(smashed));
        nn::ForwardContext ctx{true, dropout_stream(cfg_.seed, round_, main_id, batch.epoch, batch.index, k)};
        d.logits = d.upper.forward(d.tape, d.leaf, ctx);
        d.ce = losses::cross_entropy_batch(d.logits, labels);
        net_.send(Message{MessageKind::prediction, d.id, kServer, {d.logits.value(), d.ce.value()}});
    }

    // Server: gather predictions in member order, evaluate the objective.
    std::vector<nn::Tensor> logits;
    double objective = 0.0;
    for (std::size_t k = 0; k < split_; ++k) {
        if (!net_.pending(kServer, id(k)))
            throw protocol::RoundAborted(id(k), "no prediction received in round " + std::to_string(round_) +
                                                    ", phase " + std::to_string(phase_));
        const nn::Shape shapes[] = {logit_shape, nn::Shape{1}};
        Message msg = net_.recv(kServer, id(k), MessageKind::prediction, shapes);
        objective += msg.tensors[1][0];
        logits.push_back(std::move(msg.tensors[0]));
    }
    std::vector<nn::Tensor> cot_grads(split_, nn::Tensor(logit_shape));
    last_cot_ = 0.0;
    if (split_ >= 2) {
        nn::Tape tape;
        std::vector<nn::Var> leaves;
        for (auto &l : logits)
            leaves.push_back(tape.leaf(l));
        nn::Var cot = losses::cot_loss_batch(leaves);
        nn::Var weighted = nn::ops::scale(cot, cfg_.lambda_cot);
        tape.backward(weighted);
        for (std::size_t k = 0; k < split_; ++k)
            cot_grads[k] = leaves[k].grad();
        last_cot_ = cot.value()[0];
        objective += weighted.value()[0];
    }
    for (std::size_t k = 0; k < split_; ++k)
        net_.send(Message{MessageKind::loss_broadcast, kServer, id(k), {nn::Tensor::scalar(objective), cot_grads[k]}});

    // Members: backprop through W^p_k, step, return the cut gradient.
    for (std::size_t k = 0; k < split_; ++k) {
        Device &d = *devices_[k];
        const nn::Shape shapes[] = {nn::Shape{1}, logit_shape};
        Message msg = net_.recv(d.id, kServer, MessageKind::loss_broadcast, shapes);
        std::vector<nn::Tape::Seed> seeds;
        if (split_ >= 2)
            seeds.push_back({d.logits, std::move(msg.tensors[1])});
        seeds.push_back({d.ce, nn::Tensor::scalar(1.0)});
        d.tape.backward(seeds);
        nn::Tensor cut = d.leaf.grad();
        auto params = d.upper.parameters();
        nn::sgd_nesterov_step(params, lr_, cfg_.momentum, cfg_.weight_decay);
        if (k == main_pos_)
            local_cut_ = std::move(cut);
        else
            net_.send(Message{MessageKind::cut_gradient, d.id, main_id, {std::move(cut)}});
        d.tape.reset();
    }
    return objective;
}

void ClusterSession::main_device_backprop()
{
    Device &main = *devices_[main_pos_];
    std::vector<nn::Tape::Seed> seeds;
    for (std::size_t k = 0; k < split_; ++k) {
        const nn::Shape shape = lower_out_[k].shape();
        if (k == main_pos_) {
            if (local_cut_.shape() != shape)
                throw nn::ShapeError("local cut gradient " + nn::shape_string(local_cut_.shape()) +
                                     " does not match smashed " + nn::shape_string(shape));
            seeds.push_back({lower_out_[k], std::move(local_cut_)});
        } else {
            const nn::Shape shapes[] = {shape};
            Message msg = net_.recv(main.id, id(k), MessageKind::cut_gradient, shapes);
            seeds.push_back({lower_out_[k], std::move(msg.tensors[0])});
        }
    }
    main_tape_->backward(seeds);
    std::vector<nn::Parameter *> params;
    for (auto &l : main.lower)
        for (auto *p : l.parameters())
            params.push_back(p);
    nn::sgd_nesterov_step(params, lr_, cfg_.momentum, cfg_.weight_decay);
    main_tape_->reset();
    lower_out_.clear();
}

EnsembleModel ClusterSession::device_view() const
{
    const Device *holder = nullptr;
    for (const auto &d : devices_)
        if (d->holds_lower)
            holder = d.get();
    EnsembleModel out;
    out.cut = cut_;
    for (std::size_t k = 0; k < split_; ++k)
        out.subs.push_back(nn::Network::merge(holder ? holder->lower[k] : server_lower_[k], devices_[k]->upper));
    return out;
}

} // namespace feddct::fl
