#pragma once

#include "feddct/nn/rng.hpp"
#include "feddct/nn/tensor.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace feddct::data {

// Samples stored contiguously: sample i occupies
// features[i * sample_size, (i + 1) * sample_size).
struct LabeledDataset {
    nn::Shape sample_shape;
    std::vector<double> features;
    std::vector<int> labels;
    int class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t sample_size() const { return nn::shape_size(sample_shape); }
    nn::Tensor sample(std::size_t i) const;

    // [B, sample_shape...] and the matching labels.
    nn::Tensor gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
    LabeledDataset subset(std::span<const std::size_t> indices) const;

    std::vector<std::size_t> class_histogram() const;
    // Throws std::invalid_argument if empty, inconsistent or a label is out of range.
    void validate() const;
};

struct BlobsOptions {
    std::size_t n = 1000;
    int classes = 4;
    nn::Shape sample_shape{16};
    // Distance between class means in units of the per-coordinate noise std (1).
    double separation = 6.0;
};

// One isotropic unit-variance Gaussian per class; label of sample i is
// i mod classes, so class counts differ by at most one. When classes <= dim
// the means sit at (separation / sqrt 2) e_c, which puts every pair exactly
// `separation` apart; otherwise they are drawn by rejection sampling until
// all pairs are at least `separation` apart.
LabeledDataset synth_blobs(const BlobsOptions &opt, const nn::RngStream &rng);

// Shuffled split; the test part gets round(n * test_fraction) samples.
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset &ds, double test_fraction,
                                                           const nn::RngStream &rng);

// Rows of "feature,...,feature,label". Blank lines and a non-numeric first
// line (header) are skipped. class_count is max label + 1.
LabeledDataset load_csv(const std::string &path);

} // namespace feddct::data
