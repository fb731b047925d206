#pragma once

#include "feddct/costs/costs.hpp"
#include "feddct/protocol/message.hpp"

#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace feddct::protocol {

enum class Role { server, main, proxy, client, idle };

std::string to_string(Role role);

// Whether the FedDCT round (or a FedAvg round for full_model) ever addresses `kind` to `role`.
bool role_accepts(Role role, MessageKind kind);

class DeadlockError : public std::runtime_error {
public:
    DeadlockError(NodeId waiting, NodeId from, MessageKind kind);
    NodeId waiting;
};

class DeliveryError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class RoundAborted : public std::runtime_error {
public:
    RoundAborted(NodeId client, const std::string &why);
    NodeId client;
};

struct TraceEntry {
    std::uint64_t seq = 0;
    int round = 0;
    int phase = 0;
    MessageKind kind = MessageKind::full_model;
    NodeId sender = 0;
    NodeId receiver = 0;
    ClassBytes bytes;
};

/// Lossless FIFO channels between every ordered pair of nodes.
///
/// Messages are serialized on send and decoded on recv against the shapes the
/// receiver expects. Byte counts land in three places: per-node CostLedgers
/// (headers included), per-node per-phase ClassBytes, and the trace.
/// A phase context (round, phase) set by the scheduler tags all traffic;
/// sender bytes are attributed to the phase current at send time and
/// receiver bytes to the phase current at recv time.
class Transport {
public:
    using DropFilter = std::function<bool(const Message &)>;

    void set_context(int round, int phase);
    int round() const noexcept { return round_; }
    int phase() const noexcept { return phase_; }

    void set_role(NodeId node, Role role);
    Role role(NodeId node) const;

    void send(const Message &msg);
    // Throws DeadlockError if the channel is empty and DeliveryError if the
    // receiver's current role may not receive the message kind.
    Message recv(NodeId receiver, NodeId sender, MessageKind kind, std::span<const nn::Shape> shapes);
    bool pending(NodeId receiver, NodeId sender) const;
    std::size_t in_flight() const;

    // Returning true drops the message after it is charged to the sender.
    void set_drop_filter(DropFilter filter) { drop_ = std::move(filter); }

    const costs::CostLedger &ledger(NodeId node) const;
    const std::map<NodeId, costs::CostLedger> &ledgers() const noexcept { return ledgers_; }
    ClassBytes phase_bytes(NodeId node, int round, int phase) const;
    ClassBytes round_bytes(NodeId node, int round) const;

    void set_tracing(bool on) { tracing_ = on; }
    const std::vector<TraceEntry> &trace() const noexcept { return trace_; }
    void dump_trace_jsonl(std::ostream &out) const;

private:
    struct Packet {
        MessageKind kind;
        std::vector<std::uint8_t> bytes;
        ClassBytes split;
    };

    int round_ = 0;
    int phase_ = 0;
    std::uint64_t seq_ = 0;
    bool tracing_ = true;
    DropFilter drop_;
    std::map<std::pair<NodeId, NodeId>, std::deque<Packet>> channels_; // (sender, receiver)
    std::map<NodeId, Role> roles_;
    std::map<NodeId, costs::CostLedger> ledgers_;
    std::map<std::tuple<NodeId, int, int>, ClassBytes> phase_bytes_;
    std::vector<TraceEntry> trace_;
};

} // namespace feddct::protocol
