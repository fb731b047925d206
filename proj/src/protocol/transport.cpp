#include "feddct/protocol/transport.hpp"

#include <json.hpp>

namespace feddct::protocol {

std::string to_string(Role role)
{
    switch (role) {
    case Role::server:
        return "server";
    case Role::main:
        return "main";
    case Role::proxy:
        return "proxy";
    case Role::client:
        return "client";
    case Role::idle:
        return "idle";
    }
    return "unknown";
}

bool role_accepts(Role role, MessageKind kind)
{
    switch (kind) {
    case MessageKind::lower_ensemble:
    case MessageKind::cut_gradient:
        return role == Role::main;
    case MessageKind::smashed:
        return role == Role::proxy;
    case MessageKind::upper_portion:
    case MessageKind::loss_broadcast:
        return role == Role::main || role == Role::proxy;
    case MessageKind::prediction:
    case MessageKind::cluster_upload:
        return role == Role::server;
    case MessageKind::full_model:
        return role == Role::server || role == Role::client;
    }
    return false;
}

DeadlockError::DeadlockError(NodeId waiting_, NodeId from, MessageKind kind)
    : std::runtime_error("deadlock: " + node_name(waiting_) + " waits for " + to_string(kind) + " from " +
                         node_name(from) + " on an empty channel"),
      waiting(waiting_)
{
}

RoundAborted::RoundAborted(NodeId client_, const std::string &why)
    : std::runtime_error("round aborted: " + node_name(client_) + ": " + why), client(client_)
{
}

void Transport::set_context(int round, int phase)
{
    round_ = round;
    phase_ = phase;
}

void Transport::set_role(NodeId node, Role role) { roles_[node] = role; }

Role Transport::role(NodeId node) const
{
    if (node == kServer)
        return Role::server;
    auto it = roles_.find(node);
    return it == roles_.end() ? Role::idle : it->second;
}

void Transport::send(const Message &msg)
{
    Packet pkt{msg.kind, encode(msg), split_bytes(msg)};
    const std::uint64_t n = pkt.bytes.size();
    ledgers_[msg.sender].bytes_up += n;
    phase_bytes_[{msg.sender, round_, phase_}] += pkt.split;
    if (tracing_)
        trace_.push_back(TraceEntry{seq_, round_, phase_, msg.kind, msg.sender, msg.receiver, pkt.split});
    ++seq_;
    if (drop_ && drop_(msg))
        return;
    channels_[{msg.sender, msg.receiver}].push_back(std::move(pkt));
}

Message Transport::recv(NodeId receiver, NodeId sender, MessageKind kind, std::span<const nn::Shape> shapes)
{
    auto it = channels_.find({sender, receiver});
    if (it == channels_.end() || it->second.empty())
        throw DeadlockError(receiver, sender, kind);
    Packet &front = it->second.front();
    if (front.kind != kind)
        throw DeliveryError(node_name(receiver) + " expected " + to_string(kind) + " from " + node_name(sender) +
                            " but the channel head is " + to_string(front.kind));
    if (!role_accepts(role(receiver), kind))
        throw DeliveryError(to_string(kind) + " may not be delivered to " + node_name(receiver) + " acting as " +
                            to_string(role(receiver)));
    Message msg = decode(front.bytes, shapes);
    ledgers_[receiver].bytes_down += front.bytes.size();
    phase_bytes_[{receiver, round_, phase_}] += front.split;
    it->second.pop_front();
    return msg;
}

bool Transport::pending(NodeId receiver, NodeId sender) const
{
    auto it = channels_.find({sender, receiver});
    return it != channels_.end() && !it->second.empty();
}

std::size_t Transport::in_flight() const
{
    std::size_t n = 0;
    for (const auto &[_, q] : channels_)
        n += q.size();
    return n;
}

const costs::CostLedger &Transport::ledger(NodeId node) const
{
    static const costs::CostLedger empty;
    auto it = ledgers_.find(node);
    return it == ledgers_.end() ? empty : it->second;
}

ClassBytes Transport::phase_bytes(NodeId node, int round, int phase) const
{
    auto it = phase_bytes_.find({node, round, phase});
    return it == phase_bytes_.end() ? ClassBytes{} : it->second;
}

ClassBytes Transport::round_bytes(NodeId node, int round) const
{
    ClassBytes total;
    for (auto it = phase_bytes_.lower_bound({node, round, std::numeric_limits<int>::min()});
         it != phase_bytes_.end() && std::get<0>(it->first) == node && std::get<1>(it->first) == round; ++it)
        total += it->second;
    return total;
}

void Transport::dump_trace_jsonl(std::ostream &out) const
{
    for (const auto &e : trace_) {
        nlohmann::json j{{"seq", e.seq},
                         {"round", e.round},
                         {"phase", e.phase},
                         {"kind", to_string(e.kind)},
                         {"sender", node_name(e.sender)},
                         {"receiver", node_name(e.receiver)},
                         {"header_bytes", e.bytes.header},
                         {"model_bytes", e.bytes.model},
                         {"activation_bytes", e.bytes.activation},
                         {"aux_bytes", e.bytes.aux}};
        out << j.dump() << '\n';
    }
}

} // namespace feddct::protocol
