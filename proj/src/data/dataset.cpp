#include "feddct/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace feddct::data {

nn::Tensor LabeledDataset::sample(std::size_t i) const
{
    const std::size_t d = sample_size();
    const auto first = features.begin() + static_cast<std::ptrdiff_t>(i * d);
    return nn::Tensor(sample_shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(d)));
}

nn::Tensor LabeledDataset::gather(std::span<const std::size_t> indices) const
{
    const std::size_t d = sample_size();
    nn::Shape shape{indices.size()};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    std::vector<double> values(indices.size() * d);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= size())
            throw std::out_of_range("sample index " + std::to_string(indices[r]) + " >= dataset size " +
                                    std::to_string(size()));
        std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(indices[r] * d), d,
                    values.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    return nn::Tensor(std::move(shape), std::move(values));
}

std::vector<int> LabeledDataset::gather_labels(std::span<const std::size_t> indices) const
{
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices)
        out.push_back(labels.at(i));
    return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const
{
    LabeledDataset out;
    out.sample_shape = sample_shape;
    out.class_count = class_count;
    if (indices.empty())
        return out;
    const nn::Tensor x = gather(indices);
    out.features.assign(x.values().begin(), x.values().end());
    out.labels = gather_labels(indices);
    return out;
}

std::vector<std::size_t> LabeledDataset::class_histogram() const
{
    std::vector<std::size_t> h(static_cast<std::size_t>(std::max(class_count, 0)), 0);
    for (int y : labels)
        ++h.at(static_cast<std::size_t>(y));
    return h;
}

void LabeledDataset::validate() const
{
    if (labels.empty())
        throw std::invalid_argument("dataset is empty");
    if (class_count < 1)
        throw std::invalid_argument("dataset needs at least one class");
    if (features.size() != labels.size() * sample_size())
        throw std::invalid_argument("dataset feature count does not match labels x sample size");
    for (int y : labels)
        if (y < 0 || y >= class_count)
            throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(class_count) + ")");
}

LabeledDataset synth_blobs(const BlobsOptions &opt, const nn::RngStream &rng)
{
    if (opt.classes < 1 || opt.n < static_cast<std::size_t>(opt.classes))
        throw std::invalid_argument("synth_blobs needs n >= classes >= 1");
    const std::size_t dim = nn::shape_size(opt.sample_shape);
    const auto classes = static_cast<std::size_t>(opt.classes);

    std::vector<std::vector<double>> means(classes, std::vector<double>(dim, 0.0));
    if (classes <= dim) {
        for (std::size_t c = 0; c < classes; ++c)
            means[c][c] = opt.separation / std::sqrt(2.0);
    } else {
        nn::RngStream draws = rng.child("means");
        const double radius = opt.separation * std::sqrt(static_cast<double>(classes));
        for (std::size_t c = 0; c < classes; ++c) {
            for (int attempt = 0;; ++attempt) {
                if (attempt == 10000)
                    throw std::invalid_argument("cannot place " + std::to_string(classes) + " class means " +
                                                std::to_string(opt.separation) + " apart in dimension " +
                                                std::to_string(dim));
                for (auto &v : means[c])
                    v = radius * (2.0 * draws.next_uniform() - 1.0);
                bool ok = true;
                for (std::size_t o = 0; o < c && ok; ++o) {
                    double d2 = 0.0;
                    for (std::size_t j = 0; j < dim; ++j)
                        d2 += (means[c][j] - means[o][j]) * (means[c][j] - means[o][j]);
                    ok = std::sqrt(d2) >= opt.separation;
                }
                if (ok)
                    break;
            }
        }
    }

    LabeledDataset ds;
    ds.sample_shape = opt.sample_shape;
    ds.class_count = opt.classes;
    ds.features.resize(opt.n * dim);
    ds.labels.resize(opt.n);
    nn::RngStream noise = rng.child("samples");
    for (std::size_t i = 0; i < opt.n; ++i) {
        const std::size_t c = i % classes;
        ds.labels[i] = static_cast<int>(c);
        for (std::size_t j = 0; j < dim; ++j)
            ds.features[i * dim + j] = means[c][j] + noise.next_normal();
    }
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset &ds, double test_fraction,
                                                           const nn::RngStream &rng)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test fraction must be in (0, 1)");
    const auto order = nn::permutation(ds.size(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(ds.size()) * test_fraction));
    if (n_test == 0 || n_test >= ds.size())
        throw std::invalid_argument("test fraction leaves an empty split");
    std::span<const std::size_t> all(order);
    return {ds.subset(all.subspan(n_test)), ds.subset(all.first(n_test))};
}

LabeledDataset load_csv(const std::string &path)
{
    std::ifstream f(path);
    if (!f)
        throw std::invalid_argument("cannot open CSV '" + path + "'");
    LabeledDataset ds;
    std::string line;
    std::size_t line_no = 0, dim = 0;
    int max_label = -1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception &) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (ds.labels.empty() && line_no == 1)
                continue;
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": non-numeric cell");
        }
        if (row.size() < 2)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": need features and a label");
        if (dim == 0)
            dim = row.size() - 1;
        else if (row.size() - 1 != dim)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(dim) + " features, got " + std::to_string(row.size() - 1));
        const double label = row.back();
        if (label < 0 || label != std::floor(label))
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": label must be a nonnegative integer");
        ds.features.insert(ds.features.end(), row.begin(), row.end() - 1);
        ds.labels.push_back(static_cast<int>(label));
        max_label = std::max(max_label, static_cast<int>(label));
    }
    ds.sample_shape = {dim};
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

} // namespace feddct::data
