#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace feddct::division {

enum class LayerType { conv, dense };

// An M x M convolution (dense layers use M = 1 and a 1 x 1 output map).
struct LayerSpec {
    std::string name;
    LayerType type = LayerType::conv;
    std::size_t kernel = 1; // M
    std::size_t c_in = 1;
    std::size_t c_out = 1;
    std::size_t groups = 1; // d
    std::size_t out_h = 1;  // H
    std::size_t out_w = 1;  // W

    bool operator==(const LayerSpec &) const = default;
};

// Throws std::invalid_argument unless all fields are >= 1 and d divides c_in and c_out.
void validate(const LayerSpec &layer);

enum class Family { generic, resnet_cifar };

struct ModelSpec {
    std::string name;
    Family family = Family::generic;
    // Keep the first layer's c_in and the last layer's c_out (input features
    // and class count) undivided.
    bool preserve_io = false;
    std::vector<LayerSpec> layers;
};

struct DivisionPlan {
    int split_factor = 1;
    std::string rounding = "half_up";
    std::vector<std::pair<LayerSpec, LayerSpec>> per_layer; // (original, divided)
    std::optional<std::array<std::size_t, 3>> stage_widths; // resnet_cifar only
    bool tabulated = true;
};

struct RegularizationSpec {
    double dropout_p = 0.0;
    double stochastic_depth_p = 0.0; // drop probability
    double weight_decay = 0.0;
};

// max(1, floor(c / sqrt(S) + 0.5)). S = 1 returns c.
std::size_t divide_width(std::size_t c, int split_factor);

// Divides c_in and c_out; the group count becomes the largest divisor of
// gcd(c_in', c_out') not exceeding d, which maps depthwise layers to d' = c_in'.
LayerSpec divide_layer(const LayerSpec &layer, int split_factor);

RegularizationSpec scale_regularization(const RegularizationSpec &reg, int split_factor);

double widen_factor_divide(double f_w, int split_factor);   // max(floor(f_w/sqrt(S) + 0.4), 1)
long cardinality_divide(long f_c, int split_factor);        // max(floor(f_c/S), 1)
double growth_rate_divide(long f_g, int split_factor);      // 0.5 * floor(2 f_g / sqrt(S))

struct StageWidths {
    std::array<std::size_t, 3> widths;
    bool tabulated;
};

// CIFAR ResNet stage widths for baseline [16, 32, 64]. S in {1, 2, 4, 8, 16, 32}
// come from the reference table; any other S falls back to divide_width and is
// flagged non-tabulated.
StageWidths resnet_stage_table(int split_factor);

// Reference EfficientNet-B0 stage widths (stem, seven stages, head) for S in
// {1, 2, 4}. These are hand-tuned constants that the generic rule does not
// reproduce; kept as a frozen fixture. Returns nullopt for other S.
std::optional<std::array<std::size_t, 9>> efficientnet_reference_widths(int split_factor);

DivisionPlan divide_model(const ModelSpec &model, int split_factor);

// Model spec JSON:
//   {"name": "...", "family": "generic" | "resnet_cifar", "preserve_io": bool,
//    "layers": [{"name", "kind": "conv" | "dense", "kernel", "c_in", "c_out",
//                "groups", "out_h", "out_w"}]}
// Optional fields default to kernel 1, groups 1, out_h = out_w = 1.
ModelSpec parse_model_spec(const std::string &json_text);
ModelSpec load_model_spec(const std::string &path);
std::string plan_to_json(const DivisionPlan &plan, int indent = 2);
std::string plan_to_table(const DivisionPlan &plan);

} // namespace feddct::division
