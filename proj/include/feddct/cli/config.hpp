#pragma once

#include "feddct/fl/simulation.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace feddct::cli {

// Invalid experiment configuration. `field` is the dotted path of the
// offending key, e.g. "training.split_factor".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string &what)
        : std::runtime_error(field + ": " + what), field(std::move(field))
    {
    }
    std::string field;
};

enum class DatasetKind { blobs, csv };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::blobs;
    data::BlobsOptions blobs;
    std::string path; // csv only
    double test_fraction = 0.2;
};

struct OutputConfig {
    std::string metrics = "metrics.csv";
    std::string manifest = "manifest.json";
    std::string checkpoint = "model.ckpt";
    std::string trace; // empty: no trace
};

struct ExperimentConfig {
    fl::Algorithm algorithm = fl::Algorithm::feddct;
    DatasetConfig dataset;
    data::Scheme partition = data::Scheme::iid;
    fl::ModelBlueprint model;
    fl::TrainConfig training;
    OutputConfig output;
};

ExperimentConfig parse_config(const std::string &json_text);
ExperimentConfig load_config(const std::string &path);
// Fully resolved form; parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig &c);

// Loads or synthesises the dataset, splits off the test set and partitions
// the training set. input_shape and classes of the blueprint are taken from
// the data.
fl::SimulationSetup make_setup(const ExperimentConfig &c);

} // namespace feddct::cli
