#include "feddct/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace feddct::cli {

using nlohmann::json;

namespace {

// Typed, path-aware accessor over one JSON object.
class Section {
public:
    Section(const json &obj, std::string path, std::set<std::string> allowed) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object())
            throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
        for (const auto &[key, _] : obj_.items())
            if (!allowed.count(key))
                throw ConfigError(field(key), "unknown key");
    }

    std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string &key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }
    const json &at(const std::string &key) const { return obj_.at(key); }

    template <class T> T integer(const std::string &key, T fallback, long long lo, long long hi) const
    {
        if (!has(key))
            return fallback;
        const json &v = obj_.at(key);
        if (!v.is_number_integer())
            throw ConfigError(field(key), "must be an integer");
        const long long x = v.get<long long>();
        if (x < lo || x > hi)
            throw ConfigError(field(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return static_cast<T>(x);
    }

    double number(const std::string &key, double fallback, double lo, double hi, bool open_lo = false,
                  bool open_hi = false) const
    {
        if (!has(key))
            return fallback;
        const json &v = obj_.at(key);
        if (!v.is_number())
            throw ConfigError(field(key), "must be a number");
        const double x = v.get<double>();
        if (x < lo || x > hi || (open_lo && x == lo) || (open_hi && x == hi))
            throw ConfigError(field(key), std::string("must be in ") + (open_lo ? "(" : "[") + std::to_string(lo) +
                                              ", " + std::to_string(hi) + (open_hi ? ")" : "]"));
        return x;
    }

    bool boolean(const std::string &key, bool fallback) const
    {
        if (!has(key))
            return fallback;
        if (!obj_.at(key).is_boolean())
            throw ConfigError(field(key), "must be true or false");
        return obj_.at(key).get<bool>();
    }

    std::string string(const std::string &key, const std::string &fallback) const
    {
        if (!has(key))
            return fallback;
        if (!obj_.at(key).is_string())
            throw ConfigError(field(key), "must be a string");
        return obj_.at(key).get<std::string>();
    }

    std::string choice(const std::string &key, const std::string &fallback, std::initializer_list<const char *> opts) const
    {
        const std::string v = string(key, fallback);
        std::string list;
        for (const char *o : opts) {
            if (v == o)
                return v;
            list += list.empty() ? o : std::string(", ") + o;
        }
        throw ConfigError(field(key), "'" + v + "' is not one of " + list);
    }

    std::vector<std::size_t> widths(const std::string &key, std::vector<std::size_t> fallback) const
    {
        if (!has(key))
            return fallback;
        const json &v = obj_.at(key);
        if (!v.is_array() || v.empty())
            throw ConfigError(field(key), "must be a nonempty array of positive integers");
        std::vector<std::size_t> out;
        for (const auto &e : v) {
            if (!e.is_number_integer() || e.get<long long>() < 1)
                throw ConfigError(field(key), "must be a nonempty array of positive integers");
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    Section child(const std::string &key, std::set<std::string> allowed) const
    {
        static const json empty = json::object();
        return Section(has(key) ? obj_.at(key) : empty, field(key), std::move(allowed));
    }

private:
    const json &obj_;
    std::string path_;
};

DatasetConfig parse_dataset(const Section &s)
{
    DatasetConfig d;
    d.kind = s.choice("kind", "blobs", {"blobs", "csv"}) == "csv" ? DatasetKind::csv : DatasetKind::blobs;
    d.blobs.n = s.integer<std::size_t>("samples", d.blobs.n, 2, 100'000'000);
    d.blobs.classes = s.integer<int>("classes", d.blobs.classes, 2, 100'000);
    d.blobs.sample_shape = s.widths("shape", d.blobs.sample_shape);
    d.blobs.separation = s.number("separation", d.blobs.separation, 0.0, 1e6, true);
    d.path = s.string("path", "");
    d.test_fraction = s.number("test_fraction", d.test_fraction, 0.0, 1.0, true, true);
    if (d.kind == DatasetKind::csv && d.path.empty())
        throw ConfigError(s.field("path"), "required when kind is csv");
    return d;
}

fl::ModelBlueprint parse_model(const Section &s)
{
    fl::ModelBlueprint bp;
    bp.family = s.choice("family", "mlp", {"mlp", "dctnet"}) == "dctnet" ? fl::ModelFamily::dctnet : fl::ModelFamily::mlp;
    bp.hidden = s.widths("hidden", bp.hidden);
    const auto stages = s.widths("stages", {bp.stages.begin(), bp.stages.end()});
    if (stages.size() != 3)
        throw ConfigError(s.field("stages"), "must list exactly three widths");
    std::copy(stages.begin(), stages.end(), bp.stages.begin());
    bp.dropout_p = s.number("dropout", bp.dropout_p, 0.0, 1.0, false, true);
    if (s.has("cut_layer"))
        bp.cut_layer = s.integer<std::size_t>("cut_layer", 0, 1, 1000);
    return bp;
}

fl::TrainConfig parse_training(const Section &s)
{
    fl::TrainConfig t;
    t.clients = s.integer<int>("clients", t.clients, 1, 100'000);
    t.split_factor = s.integer<int>("split_factor", t.split_factor, 1, 1024);
    t.local_epochs = s.integer<int>("local_epochs", t.local_epochs, 1, 10'000);
    t.batch_size = s.integer<std::size_t>("batch_size", t.batch_size, 1, 1'000'000);
    t.lr = s.number("lr", t.lr, 0.0, 1e3, true);
    t.momentum = s.number("momentum", t.momentum, 0.0, 1.0, false, true);
    t.weight_decay = s.number("weight_decay", t.weight_decay, 0.0, 1e3);
    t.warmup_rounds = s.integer<int>("warmup_rounds", t.warmup_rounds, 0, 1'000'000);
    t.total_rounds = s.integer<int>("rounds", t.total_rounds, 1, 1'000'000);
    t.lambda_cot = s.number("lambda_cot", t.lambda_cot, 0.0, 1e6);
    t.seed = s.integer<std::uint64_t>("seed", t.seed, 0, std::numeric_limits<long long>::max());
    t.upper_sync =
        s.choice("upper_sync", "per_phase", {"per_phase", "per_round"}) == "per_round" ? fl::UpperSync::per_round
                                                                                       : fl::UpperSync::per_phase;
    t.rotation = s.choice("rotation", "sequential", {"sequential", "random"}) == "random" ? fl::Rotation::random
                                                                                         : fl::Rotation::sequential;
    t.shuffle_clusters = s.boolean("shuffle_clusters", t.shuffle_clusters);
    t.lanes = s.integer<int>("lanes", t.lanes, 1, 1024);
    const Section a = s.child("augment", {"flip", "noise_std", "erase_p", "erase_fraction"});
    t.augment.flip = a.boolean("flip", t.augment.flip);
    t.augment.noise_std = a.number("noise_std", t.augment.noise_std, 0.0, 1e6);
    t.augment.erase_p = a.number("erase_p", t.augment.erase_p, 0.0, 1.0);
    t.augment.erase_fraction = a.number("erase_fraction", t.augment.erase_fraction, 0.0, 1.0);
    if (t.warmup_rounds >= t.total_rounds && t.total_rounds > 1)
        throw ConfigError(s.field("warmup_rounds"), "must be smaller than training.rounds");
    return t;
}

OutputConfig parse_output(const Section &s)
{
    OutputConfig o;
    o.metrics = s.string("metrics", o.metrics);
    o.manifest = s.string("manifest", o.manifest);
    o.checkpoint = s.string("checkpoint", o.checkpoint);
    o.trace = s.string("trace", o.trace);
    return o;
}

} // namespace

ExperimentConfig parse_config(const std::string &json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
    }
    const Section root(doc, "", {"algorithm", "dataset", "partition", "model", "training", "output"});
    ExperimentConfig c;
    c.algorithm = root.choice("algorithm", "feddct", {"feddct", "fedavg"}) == "fedavg" ? fl::Algorithm::fedavg
                                                                                      : fl::Algorithm::feddct;
    c.dataset = parse_dataset(
        root.child("dataset", {"kind", "samples", "classes", "shape", "separation", "path", "test_fraction"}));
    c.partition = root.choice("partition", "iid", {"iid", "noniid"}) == "noniid" ? data::Scheme::noniid
                                                                                : data::Scheme::iid;
    c.model = parse_model(root.child("model", {"family", "hidden", "stages", "dropout", "cut_layer"}));
    c.training = parse_training(root.child(
        "training", {"clients", "split_factor", "local_epochs", "batch_size", "lr", "momentum", "weight_decay",
                     "warmup_rounds", "rounds", "lambda_cot", "seed", "upper_sync", "rotation",
                     "shuffle_clusters", "lanes", "augment"}));
    c.output = parse_output(root.child("output", {"metrics", "manifest", "checkpoint", "trace"}));

    if (c.algorithm == fl::Algorithm::feddct && c.training.clients % c.training.split_factor != 0)
        throw ConfigError("training.clients", "K = " + std::to_string(c.training.clients) +
                                                  " is not a multiple of split_factor S = " +
                                                  std::to_string(c.training.split_factor));
    if (c.model.family == fl::ModelFamily::dctnet && c.dataset.kind == DatasetKind::blobs &&
        c.dataset.blobs.sample_shape.size() != 3)
        throw ConfigError("dataset.shape", "dctnet needs [channels, height, width] samples");
    return c;
}

ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("<file>", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

json config_to_json(const ExperimentConfig &c)
{
    const auto &t = c.training;
    json model{{"family", to_string(c.model.family)},
               {"hidden", c.model.hidden},
               {"stages", c.model.stages},
               {"dropout", c.model.dropout_p},
               {"cut_layer", c.model.cut_layer ? json(*c.model.cut_layer) : json(nullptr)}};
    return json{
        {"algorithm", to_string(c.algorithm)},
        {"dataset",
         {{"kind", c.dataset.kind == DatasetKind::csv ? "csv" : "blobs"},
          {"samples", c.dataset.blobs.n},
          {"classes", c.dataset.blobs.classes},
          {"shape", c.dataset.blobs.sample_shape},
          {"separation", c.dataset.blobs.separation},
          {"path", c.dataset.path},
          {"test_fraction", c.dataset.test_fraction}}},
        {"partition", c.partition == data::Scheme::noniid ? "noniid" : "iid"},
        {"model", model},
        {"training",
         {{"clients", t.clients},
          {"split_factor", t.split_factor},
          {"local_epochs", t.local_epochs},
          {"batch_size", t.batch_size},
          {"lr", t.lr},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"warmup_rounds", t.warmup_rounds},
          {"rounds", t.total_rounds},
          {"lambda_cot", t.lambda_cot},
          {"seed", t.seed},
          {"upper_sync", to_string(t.upper_sync)},
          {"rotation", to_string(t.rotation)},
          {"shuffle_clusters", t.shuffle_clusters},
          {"lanes", t.lanes},
          {"augment",
           {{"flip", t.augment.flip},
            {"noise_std", t.augment.noise_std},
            {"erase_p", t.augment.erase_p},
            {"erase_fraction", t.augment.erase_fraction}}}}},
        {"output",
         {{"metrics", c.output.metrics},
          {"manifest", c.output.manifest},
          {"checkpoint", c.output.checkpoint},
          {"trace", c.output.trace}}}};
}

fl::SimulationSetup make_setup(const ExperimentConfig &c)
{
    const nn::RngStream root(c.training.seed, "data");
    data::LabeledDataset all;
    if (c.dataset.kind == DatasetKind::csv) {
        try {
            all = data::load_csv(c.dataset.path);
        } catch (const std::exception &e) {
            throw ConfigError("dataset.path", e.what());
        }
    } else {
        all = data::synth_blobs(c.dataset.blobs, root.child("blobs"));
    }
    auto [train, test] = data::train_test_split(all, c.dataset.test_fraction, root.child("split"));
    if (train.size() < static_cast<std::size_t>(c.training.clients))
        throw ConfigError("training.clients", "more clients than training samples (" + std::to_string(train.size()) +
                                                  ")");

    fl::SimulationSetup s;
    s.algorithm = c.algorithm;
    s.blueprint = c.model;
    s.blueprint.input_shape = train.sample_shape;
    s.blueprint.classes = all.class_count;
    if (s.blueprint.family == fl::ModelFamily::dctnet && s.blueprint.input_shape.size() != 3)
        throw ConfigError("model.family", "dctnet needs [channels, height, width] samples");
    s.config = c.training;
    if (c.algorithm == fl::Algorithm::fedavg)
        s.config.split_factor = 1;
    const auto prng = root.child("partition");
    const auto k = static_cast<std::size_t>(c.training.clients);
    s.partition = c.partition == data::Scheme::noniid ? data::partition_noniid(train, k, prng)
                                                      : data::partition_iid(train, k, prng);
    s.train = std::move(train);
    s.test = std::move(test);
    return s;
}

} // namespace feddct::cli
