#include "feddct/protocol/message.hpp"

#include <stdexcept>

namespace feddct::protocol {

namespace {

struct KindName {
    MessageKind kind;
    const char *name;
};

constexpr KindName kKindNames[] = {
    {MessageKind::lower_ensemble, "lower_ensemble"}, {MessageKind::upper_portion, "upper_portion"},
    {MessageKind::smashed, "smashed"},               {MessageKind::prediction, "prediction"},
    {MessageKind::loss_broadcast, "loss_broadcast"}, {MessageKind::cut_gradient, "cut_gradient"},
    {MessageKind::cluster_upload, "cluster_upload"}, {MessageKind::full_model, "full_model"},
};

} // namespace

std::string node_name(NodeId id) { return id == kServer ? "server" : "client " + std::to_string(id); }

std::string to_string(MessageKind kind)
{
    for (const auto &kn : kKindNames)
        if (kn.kind == kind)
            return kn.name;
    return "unknown(" + std::to_string(static_cast<int>(kind)) + ")";
}

MessageKind message_kind_from_string(const std::string &name)
{
    for (const auto &kn : kKindNames)
        if (name == kn.name)
            return kn.kind;
    throw std::invalid_argument("unknown message kind '" + name + "'");
}

TrafficClass traffic_class(MessageKind kind, std::size_t tensor_index)
{
    switch (kind) {
    case MessageKind::smashed:
        return tensor_index == 0 ? TrafficClass::activation : TrafficClass::aux;
    case MessageKind::cut_gradient:
        return TrafficClass::activation;
    case MessageKind::prediction:
    case MessageKind::loss_broadcast:
        return TrafficClass::aux;
    default:
        return TrafficClass::model;
    }
}

std::uint64_t shape_digest(std::span<const nn::Shape> shapes)
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    };
    for (const auto &s : shapes) {
        mix(s.size());
        for (auto d : s)
            mix(d);
    }
    return h;
}

std::vector<nn::Shape> shapes_of(const Message &msg)
{
    std::vector<nn::Shape> out;
    out.reserve(msg.tensors.size());
    for (const auto &t : msg.tensors)
        out.push_back(t.shape());
    return out;
}

std::uint64_t measure_bytes(const Message &msg)
{
    std::uint64_t n = 0;
    for (const auto &t : msg.tensors)
        n += t.size();
    return kHeaderBytes + 8 * n;
}

std::vector<std::uint8_t> encode(const Message &msg)
{
    if (msg.tensors.size() > 0xFFFF)
        throw std::invalid_argument("too many tensors in one message");
    const auto shapes = shapes_of(msg);
    nn::ByteWriter w;
    w.buffer().reserve(measure_bytes(msg));
    w.u32(kMagic);
    w.u8(static_cast<std::uint8_t>(msg.kind));
    w.u8(kVersion);
    w.u16(static_cast<std::uint16_t>(msg.tensors.size()));
    w.u32(msg.sender);
    w.u32(msg.receiver);
    w.u64(measure_bytes(msg) - kHeaderBytes);
    w.u64(shape_digest(shapes));
    for (const auto &t : msg.tensors)
        w.f64s(t.values());
    return w.take();
}

Message decode(std::span<const std::uint8_t> bytes, std::span<const nn::Shape> expected_shapes)
{
    nn::ByteReader r(bytes);
    if (r.u32() != kMagic)
        throw nn::FormatError("bad message magic");
    Message msg;
    const std::uint8_t kind = r.u8();
    if (kind < 1 || kind > 8)
        throw nn::FormatError("unknown message kind " + std::to_string(kind));
    msg.kind = static_cast<MessageKind>(kind);
    if (const auto v = r.u8(); v != kVersion)
        throw nn::FormatError("unsupported message version " + std::to_string(v));
    const std::uint16_t count = r.u16();
    msg.sender = r.u32();
    msg.receiver = r.u32();
    const std::uint64_t payload = r.u64();
    const std::uint64_t digest = r.u64();
    if (count != expected_shapes.size())
        throw nn::FormatError(to_string(msg.kind) + ": carries " + std::to_string(count) + " tensors, expected " +
                              std::to_string(expected_shapes.size()));
    if (digest != shape_digest(expected_shapes))
        throw nn::FormatError(to_string(msg.kind) + ": shape digest does not match the expected shapes");
    std::uint64_t elements = 0;
    for (const auto &s : expected_shapes)
        elements += nn::shape_size(s);
    if (payload != 8 * elements || r.remaining() != payload)
        throw nn::FormatError(to_string(msg.kind) + ": payload length " + std::to_string(r.remaining()) +
                              " does not match " + std::to_string(8 * elements));
    for (const auto &s : expected_shapes) {
        std::vector<double> values(nn::shape_size(s));
        for (auto &v : values)
            v = r.f64();
        msg.tensors.emplace_back(s, std::move(values));
    }
    return msg;
}

ClassBytes &ClassBytes::operator+=(const ClassBytes &o)
{
    header += o.header;
    model += o.model;
    activation += o.activation;
    aux += o.aux;
    return *this;
}

ClassBytes split_bytes(const Message &msg)
{
    ClassBytes b;
    b.header = kHeaderBytes;
    for (std::size_t i = 0; i < msg.tensors.size(); ++i) {
        const std::uint64_t n = 8 * msg.tensors[i].size();
        switch (traffic_class(msg.kind, i)) {
        case TrafficClass::model:
            b.model += n;
            break;
        case TrafficClass::activation:
            b.activation += n;
            break;
        case TrafficClass::aux:
            b.aux += n;
            break;
        }
    }
    return b;
}

} // namespace feddct::protocol
