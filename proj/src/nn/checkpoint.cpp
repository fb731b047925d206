#include "feddct/nn/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <unordered_map>

namespace feddct::nn {

namespace {

constexpr char kMagic[8] = {'F', 'D', 'C', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

} // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter *const> params)
{
    ByteWriter out;
    out.str(std::string(kMagic, sizeof kMagic));
    out.u32(kVersion);
    out.u32(static_cast<std::uint32_t>(params.size()));
    for (const Parameter *p : params) {
        ByteWriter rec;
        rec.u32(static_cast<std::uint32_t>(p->id.size()));
        rec.str(p->id);
        rec.u32(static_cast<std::uint32_t>(p->value.rank()));
        for (auto d : p->value.shape())
            rec.u64(d);
        rec.u64(p->value.size());
        rec.f64s(p->value.values());
        out.u64(rec.size());
        out.bytes(rec.buffer());
    }
    return out.take();
}

std::vector<CheckpointRecord> decode_checkpoint(std::span<const std::uint8_t> bytes)
{
    ByteReader in(bytes);
    if (in.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic))
        throw FormatError("not a checkpoint: bad magic");
    if (const auto v = in.u32(); v != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(v));
    const std::uint32_t count = in.u32();
    std::vector<CheckpointRecord> records;
    records.reserve(count);
    for (std::uint32_t r = 0; r < count; ++r) {
        const std::uint64_t length = in.u64();
        const std::size_t start = in.position();
        CheckpointRecord rec;
        rec.id = in.str(in.u32());
        Shape shape(in.u32());
        for (auto &d : shape)
            d = in.u64();
        const std::uint64_t n = in.u64();
        if (n != shape_size(shape))
            throw FormatError("record '" + rec.id + "': element count " + std::to_string(n) +
                              " does not match shape " + shape_string(shape));
        std::vector<double> values(n);
        for (auto &v : values)
            v = in.f64();
        if (in.position() - start != length)
            throw FormatError("record '" + rec.id + "': length field " + std::to_string(length) +
                              " disagrees with contents");
        rec.value = Tensor(std::move(shape), std::move(values));
        records.push_back(std::move(rec));
    }
    if (in.remaining() != 0)
        throw FormatError("trailing bytes after last checkpoint record");
    return records;
}

void save_checkpoint(const std::filesystem::path &path, std::span<const Parameter *const> params)
{
    const auto bytes = encode_checkpoint(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

std::vector<CheckpointRecord> load_checkpoint(const std::filesystem::path &path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

void restore_parameters(std::span<Parameter *const> params, const std::vector<CheckpointRecord> &records)
{
    std::unordered_map<std::string, const CheckpointRecord *> by_id;
    for (const auto &r : records)
        by_id.emplace(r.id, &r);
    for (Parameter *p : params) {
        auto it = by_id.find(p->id);
        if (it == by_id.end())
            throw FormatError("checkpoint has no record for parameter '" + p->id + "'");
        if (it->second->value.shape() != p->value.shape())
            throw FormatError("checkpoint shape " + shape_string(it->second->value.shape()) + " for '" + p->id +
                              "' does not match " + shape_string(p->value.shape()));
        p->value = it->second->value;
    }
}

} // namespace feddct::nn
