#include "feddct/division/division.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace feddct::division {

namespace {

void require_split(int split_factor)
{
    if (split_factor < 1)
        throw std::invalid_argument("split factor must be >= 1, got " + std::to_string(split_factor));
}

double root(int split_factor) { return std::sqrt(static_cast<double>(split_factor)); }

struct ResnetRow {
    int s;
    std::array<std::size_t, 3> widths;
};

constexpr ResnetRow kResnetTable[] = {
    {1, {16, 32, 64}}, {2, {12, 24, 48}}, {4, {8, 16, 32}}, {8, {6, 12, 23}}, {16, {4, 8, 16}}, {32, {3, 6, 12}},
};

struct EfficientNetRow {
    int s;
    std::array<std::size_t, 9> widths;
};

constexpr EfficientNetRow kEfficientNetTable[] = {
    {1, {32, 16, 24, 40, 80, 112, 192, 320, 1280}},
    {2, {24, 12, 16, 24, 56, 80, 136, 224, 920}},
    {4, {16, 12, 16, 20, 40, 56, 96, 160, 640}},
};

constexpr std::array<std::size_t, 3> kResnetBaseline{16, 32, 64};

} // namespace

void validate(const LayerSpec &l)
{
    if (l.kernel < 1 || l.c_in < 1 || l.c_out < 1 || l.groups < 1 || l.out_h < 1 || l.out_w < 1)
        throw std::invalid_argument("layer '" + l.name + "': all fields must be >= 1");
    if (l.c_in % l.groups || l.c_out % l.groups)
        throw std::invalid_argument("layer '" + l.name + "': groups " + std::to_string(l.groups) +
                                    " must divide c_in " + std::to_string(l.c_in) + " and c_out " +
                                    std::to_string(l.c_out));
}

std::size_t divide_width(std::size_t c, int split_factor)
{
    require_split(split_factor);
    if (split_factor == 1)
        return c;
    const double w = std::floor(static_cast<double>(c) / root(split_factor) + 0.5);
    return std::max<std::size_t>(1, static_cast<std::size_t>(w));
}

namespace {

std::size_t reduce_groups(std::size_t groups, std::size_t c_in, std::size_t c_out)
{
    const std::size_t g = std::gcd(c_in, c_out);
    for (std::size_t d = std::min(groups, g); d > 1; --d)
        if (g % d == 0)
            return d;
    return 1;
}

LayerSpec with_widths(const LayerSpec &layer, std::size_t c_in, std::size_t c_out)
{
    LayerSpec out = layer;
    out.c_in = c_in;
    out.c_out = c_out;
    out.groups = reduce_groups(layer.groups, c_in, c_out);
    return out;
}

} // namespace

LayerSpec divide_layer(const LayerSpec &layer, int split_factor)
{
    validate(layer);
    if (split_factor == 1)
        return layer;
    return with_widths(layer, divide_width(layer.c_in, split_factor), divide_width(layer.c_out, split_factor));
}

RegularizationSpec scale_regularization(const RegularizationSpec &reg, int split_factor)
{
    require_split(split_factor);
    RegularizationSpec out = reg;
    out.dropout_p = reg.dropout_p / root(split_factor);
    out.stochastic_depth_p = reg.stochastic_depth_p / root(split_factor);
    return out;
}

double widen_factor_divide(double f_w, int split_factor)
{
    require_split(split_factor);
    return std::max(std::floor(f_w / root(split_factor) + 0.4), 1.0);
}

long cardinality_divide(long f_c, int split_factor)
{
    require_split(split_factor);
    return std::max(f_c / split_factor, 1L);
}

double growth_rate_divide(long f_g, int split_factor)
{
    require_split(split_factor);
    return 0.5 * std::floor(2.0 * static_cast<double>(f_g) / root(split_factor));
}

StageWidths resnet_stage_table(int split_factor)
{
    require_split(split_factor);
    for (const auto &row : kResnetTable)
        if (row.s == split_factor)
            return {row.widths, true};
    StageWidths out{{}, false};
    for (std::size_t i = 0; i < 3; ++i)
        out.widths[i] = divide_width(kResnetBaseline[i], split_factor);
    return out;
}

std::optional<std::array<std::size_t, 9>> efficientnet_reference_widths(int split_factor)
{
    for (const auto &row : kEfficientNetTable)
        if (row.s == split_factor)
            return row.widths;
    return std::nullopt;
}

DivisionPlan divide_model(const ModelSpec &model, int split_factor)
{
    require_split(split_factor);
    DivisionPlan plan;
    plan.split_factor = split_factor;

    auto width = [&](std::size_t c) { return divide_width(c, split_factor); };
    std::optional<StageWidths> stages;
    if (model.family == Family::resnet_cifar) {
        stages = resnet_stage_table(split_factor);
        plan.stage_widths = stages->widths;
        plan.tabulated = stages->tabulated;
    }
    auto map_width = [&](std::size_t c) {
        if (stages)
            for (std::size_t i = 0; i < 3; ++i)
                if (c == kResnetBaseline[i])
                    return stages->widths[i];
        return width(c);
    };

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec &l = model.layers[i];
        validate(l);
        std::size_t c_in = map_width(l.c_in), c_out = map_width(l.c_out);
        if (model.preserve_io && i == 0)
            c_in = l.c_in;
        if (model.preserve_io && i + 1 == model.layers.size())
            c_out = l.c_out;
        plan.per_layer.emplace_back(l, split_factor == 1 ? l : with_widths(l, c_in, c_out));
    }
    return plan;
}

} // namespace feddct::division
