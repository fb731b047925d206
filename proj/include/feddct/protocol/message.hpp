#pragma once

#include "feddct/nn/bytes.hpp"
#include "feddct/nn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace feddct::protocol {

using NodeId = std::uint32_t;
inline constexpr NodeId kServer = 0xFFFFFFFFu;

std::string node_name(NodeId id);

enum class MessageKind : std::uint8_t {
    lower_ensemble = 1, // W^m_1..S, server or previous main -> main
    upper_portion = 2,  // W^p_i, server -> member
    smashed = 3,        // cut activations + labels, main -> proxy
    prediction = 4,     // logits + cross-entropy value, member -> server
    loss_broadcast = 5, // cluster objective value + co-training logit gradient, server -> member
    cut_gradient = 6,   // gradient at the cut, proxy -> main
    cluster_upload = 7, // W^m or W^p_i, member -> server
    full_model = 8,     // whole model, FedAvg server <-> client
};

std::string to_string(MessageKind kind);
MessageKind message_kind_from_string(const std::string &name);

// model: weights; activation: smashed data and cut gradients; aux: labels,
// predictions and loss broadcasts. The communication formulas count model and
// activation bytes only.
enum class TrafficClass { model, activation, aux };

TrafficClass traffic_class(MessageKind kind, std::size_t tensor_index);

struct Message {
    MessageKind kind = MessageKind::full_model;
    NodeId sender = 0;
    NodeId receiver = 0;
    std::vector<nn::Tensor> tensors;
};

/// Wire format (little-endian), 32-byte header followed by the payload:
///
///   offset  0  u32  magic 0x54434446 ("FDCT")
///   offset  4  u8   kind
///   offset  5  u8   version (=1)
///   offset  6  u16  tensor count
///   offset  8  u32  sender
///   offset 12  u32  receiver
///   offset 16  u64  payload bytes
///   offset 24  u64  shape digest (FNV-1a over each tensor's rank and dims)
///   payload       every tensor's values as f64, in tensor order
///
/// Shapes travel out of band: both ends agree on them from the model
/// blueprint, and the digest lets the receiver reject a mismatch.
inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::uint32_t kMagic = 0x54434446u;
inline constexpr std::uint8_t kVersion = 1;

std::uint64_t shape_digest(std::span<const nn::Shape> shapes);
std::vector<nn::Shape> shapes_of(const Message &msg);

std::vector<std::uint8_t> encode(const Message &msg);
// Throws nn::FormatError on a bad header, digest mismatch or length mismatch.
Message decode(std::span<const std::uint8_t> bytes, std::span<const nn::Shape> expected_shapes);

// Serialized length: header + 8 * element count.
std::uint64_t measure_bytes(const Message &msg);

struct ClassBytes {
    std::uint64_t header = 0;
    std::uint64_t model = 0;
    std::uint64_t activation = 0;
    std::uint64_t aux = 0;

    std::uint64_t total() const { return header + model + activation + aux; }
    // Bytes the communication formulas account for.
    std::uint64_t accounted() const { return model + activation; }
    ClassBytes &operator+=(const ClassBytes &o);
    bool operator==(const ClassBytes &) const = default;
};

ClassBytes split_bytes(const Message &msg);

} // namespace feddct::protocol
