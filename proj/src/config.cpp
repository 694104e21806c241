#include "dklvae/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dklvae/textio.hpp"

namespace dklvae {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDatasetStream = std::uint64_t{1} << 40;

[[noreturn]] void config_error(const std::string& path, const std::string& msg) {
    throw Error(ErrorKind::config, "config " + path + ": " + msg);
}

// Typed access to one JSON object that remembers which keys were read, so
// that leftovers can be reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) config_error(path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number()) config_error(at(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) config_error(at(key), "must be finite");
        return d;
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        if (!has(key)) return fallback;
        return as_count(j_.at(key), at(key));
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_unsigned()) config_error(at(key), "expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) config_error(at(key), "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) config_error(at(key), "expected a string");
        return v.get<std::string>();
    }

    std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_array()) config_error(at(key), "expected an array of integers");
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_count(v[i], at(key) + "[" + std::to_string(i) + "]"));
        }
        return out;
    }

    std::pair<double, double> range(const std::string& key, std::pair<double, double> fallback) {
        if (!has(key)) return fallback;
        return as_range(j_.at(key), at(key));
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) config_error(at(k), "unknown key");
        }
    }

    static std::size_t as_count(const json& v, const std::string& path) {
        if (!v.is_number_unsigned()) config_error(path, "expected a nonnegative integer");
        return v.get<std::size_t>();
    }

    static std::pair<double, double> as_range(const json& v, const std::string& path) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            config_error(path, "expected [lo, hi]");
        }
        const double lo = v[0].get<double>();
        const double hi = v[1].get<double>();
        if (!std::isfinite(lo) || !std::isfinite(hi)) config_error(path, "bounds must be finite");
        if (lo > hi) config_error(path, "needs lo <= hi");
        return {lo, hi};
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

DatasetConfig parse_dataset(const json& j, const std::filesystem::path& base_dir) {
    Section s(j, "dataset");
    if (!s.has("kind")) config_error("dataset.kind", "required");
    DatasetConfig d;
    try {
        d.kind = dataset_kind_from_string(s.text("kind", ""));
    } catch (const Error& e) {
        config_error("dataset.kind", e.what());
    }
    switch (d.kind) {
        case DatasetKind::cards: {
            d.n = s.count("n", 3000);
            const auto a = s.range("angle_range", {-30.0, 30.0});
            const auto sh = s.range("shear_range", {-10.0, 10.0});
            const auto t = s.range("translation_range", {-0.1, 0.1});
            d.card_ranges = {a.first, a.second, sh.first, sh.second, t.first, t.second};
            d.card_ranges.validate();
            break;
        }
        case DatasetKind::sequences_synthetic: {
            d.n = s.count("n", 5000);
            auto& sc = d.synthetic;
            sc.length = s.count("length", 21);
            sc.alphabet_size = s.count("alphabet_size", 27);
            sc.min_length = s.count("min_length", 3);
            const auto r = s.range("target_range", {-500.0, -200.0});
            sc.target_lo = r.first;
            sc.target_hi = r.second;
            sc.token_model = sequences::token_model_from_string(s.text("token_model", "uniform"));
            sc.stickiness = s.number("stickiness", 0.9);
            sc.validate();
            d.length = sc.length;
            d.alphabet_size = sc.alphabet_size;
            break;
        }
        case DatasetKind::sequences_csv: {
            if (!s.has("path")) config_error("dataset.path", "required for sequences-csv");
            const std::filesystem::path p = s.text("path", "");
            d.csv_path = p.is_absolute() ? p : base_dir / p;
            d.length = s.count("length", 21);
            d.alphabet_size = s.count("alphabet_size", 27);
            d.strict = s.flag("strict", true);
            if (d.length < 1) config_error("dataset.length", "must be at least 1");
            if (d.alphabet_size < 2) config_error("dataset.alphabet_size", "must be at least 2");
            break;
        }
    }
    if (d.kind != DatasetKind::sequences_csv && d.n < 1) config_error("dataset.n", "must be at least 1");
    s.finish();
    return d;
}

RangeSplit parse_split(const json& j) {
    Section s(j, "split");
    RangeSplit split;
    if (s.has("train")) {
        const json& t = s.raw("train");
        if (!t.is_array()) config_error("split.train", "expected a list of [lo, hi] intervals");
        for (std::size_t i = 0; i < t.size(); ++i) {
            const auto r = Section::as_range(t[i], "split.train[" + std::to_string(i) + "]");
            split.train_ranges.push_back({r.first, r.second});
        }
    }
    if (s.has("test")) {
        const auto r = Section::as_range(s.raw("test"), "split.test");
        split.test_range = Interval{r.first, r.second};
    }
    s.finish();
    try {
        split.validate();
    } catch (const Error& e) {
        config_error("split", e.what());
    }
    return split;
}

ModelConfig parse_model(const json& j) {
    Section s(j, "model");
    ModelConfig m;
    m.encoder_hidden = s.counts("encoder_hidden", m.encoder_hidden);
    m.decoder_hidden = s.counts("decoder_hidden", m.decoder_hidden);
    m.latent_dim = s.count("latent_dim", m.latent_dim);
    s.finish();
    return m;
}

void parse_gp(const json& j, TrainConfig& t) {
    Section s(j, "gp");
    t.lengthscale_bound = s.number("lengthscale_bound", t.lengthscale_bound);
    if (s.has("init_lengthscale")) t.init_lengthscale = s.number("init_lengthscale", 0.0);
    t.init_noise_fraction = s.number("init_noise_fraction", t.init_noise_fraction);
    t.jitter = s.number("jitter", t.jitter);
    t.normalize_targets = s.flag("normalize_targets", t.normalize_targets);
    s.finish();
}

void parse_train(const json& j, ExperimentConfig& cfg) {
    Section s(j, "train");
    TrainConfig& t = cfg.train;
    t.epochs = s.count("epochs", t.epochs);
    t.vae_batch_size = s.count("vae_batch_size", t.vae_batch_size);
    t.vae_lr = s.number("vae_lr", t.vae_lr);
    t.dkl_lr = s.number("dkl_lr", t.dkl_lr);
    t.dkl_scale = s.number("dkl_scale", t.dkl_scale);
    if (s.has("dkl_subset_size")) t.dkl_subset_size = s.count("dkl_subset_size", 0);
    t.eval_every = s.count("eval_every", t.eval_every);
    cfg.checkpoint_every = s.count("checkpoint_every", cfg.checkpoint_every);
    s.finish();
}

GenerateConfig parse_generate(const json& j) {
    Section s(j, "generate");
    GenerateConfig g;
    g.search.restarts = s.count("restarts", g.search.restarts);
    g.search.steps = s.count("steps", g.search.steps);
    g.search.step_size = s.number("step_size", g.search.step_size);
    g.n = s.count("n", g.n);
    if (!(g.search.step_size > 0.0)) config_error("generate.step_size", "must be positive");
    s.finish();
    return g;
}

SweepConfig parse_sweep(const json& j) {
    Section s(j, "sweep");
    SweepConfig sw;
    const std::string p = s.text("parameter", "");
    if (p == "dkl_scale") sw.parameter = SweepParameter::dkl_scale;
    else if (p == "lengthscale_bound") sw.parameter = SweepParameter::lengthscale_bound;
    else if (p == "latent_dim") sw.parameter = SweepParameter::latent_dim;
    else if (p == "hidden_size") sw.parameter = SweepParameter::hidden_size;
    else config_error("sweep.parameter", "expected dkl_scale, lengthscale_bound, latent_dim or hidden_size");
    if (!s.has("values") || !s.raw("values").is_array() || s.raw("values").empty()) {
        config_error("sweep.values", "expected a non-empty list of numbers");
    }
    for (const auto& v : s.raw("values")) {
        if (!v.is_number()) config_error("sweep.values", "expected numbers");
        sw.values.push_back(v.get<double>());
    }
    s.finish();
    return sw;
}

json range_json(double lo, double hi) {
    return json::array({lo, hi});
}

}  // namespace

std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::cards: return "cards";
        case DatasetKind::sequences_csv: return "sequences-csv";
        case DatasetKind::sequences_synthetic: return "sequences-synthetic";
    }
    return "cards";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
    if (name == "cards") return DatasetKind::cards;
    if (name == "sequences-csv") return DatasetKind::sequences_csv;
    if (name == "sequences-synthetic") return DatasetKind::sequences_synthetic;
    throw Error(ErrorKind::config, "unknown dataset kind '" + name +
                                       "' (expected cards, sequences-csv or sequences-synthetic)");
}

std::string to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::dkl_scale: return "dkl_scale";
        case SweepParameter::lengthscale_bound: return "lengthscale_bound";
        case SweepParameter::latent_dim: return "latent_dim";
        case SweepParameter::hidden_size: return "hidden_size";
    }
    return "dkl_scale";
}

void ExperimentConfig::validate() const {
    if (format_version != kConfigFormatVersion) {
        throw Error(ErrorKind::config, "config: unsupported format_version " + std::to_string(format_version));
    }
    train.validate();
    split.validate();
    architecture(1).validate();
}

VaeArchitecture ExperimentConfig::architecture(std::size_t data_dim) const {
    return {data_dim, model.encoder_hidden, model.decoder_hidden, model.latent_dim};
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::config, std::string("config: invalid JSON: ") + e.what());
    }
    Section s(j, "$");
    ExperimentConfig cfg;
    if (!s.has("format_version")) config_error("$.format_version", "required");
    const json& fv = s.raw("format_version");
    if (!fv.is_number_integer() || fv.get<long long>() != kConfigFormatVersion) {
        config_error("$.format_version", "unsupported version " + fv.dump() + " (this build reads " +
                                             std::to_string(kConfigFormatVersion) + ")");
    }
    cfg.seed = s.u64("seed", 0);
    if (!s.has("dataset")) config_error("$.dataset", "required");
    cfg.dataset = parse_dataset(s.raw("dataset"), base_dir);
    if (s.has("split")) cfg.split = parse_split(s.raw("split"));
    if (s.has("model")) cfg.model = parse_model(s.raw("model"));
    if (s.has("gp")) parse_gp(s.raw("gp"), cfg.train);
    if (s.has("train")) parse_train(s.raw("train"), cfg);
    if (s.has("generate")) cfg.generate = parse_generate(s.raw("generate"));
    if (s.has("sweep")) cfg.sweep = parse_sweep(s.raw("sweep"));
    cfg.out_dir = s.text("out_dir", cfg.out_dir.string());
    s.finish();
    cfg.train.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

namespace {

json to_json_tree(const ExperimentConfig& cfg) {
    json j;
    j["format_version"] = cfg.format_version;
    j["seed"] = cfg.seed;
    json d;
    d["kind"] = to_string(cfg.dataset.kind);
    switch (cfg.dataset.kind) {
        case DatasetKind::cards: {
            const auto& r = cfg.dataset.card_ranges;
            d["n"] = cfg.dataset.n;
            d["angle_range"] = range_json(r.angle_lo, r.angle_hi);
            d["shear_range"] = range_json(r.shear_lo, r.shear_hi);
            d["translation_range"] = range_json(r.translation_lo, r.translation_hi);
            break;
        }
        case DatasetKind::sequences_synthetic: {
            const auto& sc = cfg.dataset.synthetic;
            d["n"] = cfg.dataset.n;
            d["length"] = sc.length;
            d["alphabet_size"] = sc.alphabet_size;
            d["min_length"] = sc.min_length;
            d["target_range"] = range_json(sc.target_lo, sc.target_hi);
            d["token_model"] = sequences::to_string(sc.token_model);
            d["stickiness"] = sc.stickiness;
            break;
        }
        case DatasetKind::sequences_csv:
            d["path"] = cfg.dataset.csv_path.string();
            d["length"] = cfg.dataset.length;
            d["alphabet_size"] = cfg.dataset.alphabet_size;
            d["strict"] = cfg.dataset.strict;
            break;
    }
    j["dataset"] = d;

    json split;
    split["train"] = json::array();
    for (const auto& r : cfg.split.train_ranges) split["train"].push_back(range_json(r.lo, r.hi));
    split["test"] = cfg.split.test_range ? range_json(cfg.split.test_range->lo, cfg.split.test_range->hi)
                                         : json(nullptr);
    j["split"] = split;

    j["model"] = {{"encoder_hidden", cfg.model.encoder_hidden},
                  {"decoder_hidden", cfg.model.decoder_hidden},
                  {"latent_dim", cfg.model.latent_dim}};
    const TrainConfig& t = cfg.train;
    j["gp"] = {{"lengthscale_bound", t.lengthscale_bound},
               {"init_lengthscale", t.init_lengthscale ? json(*t.init_lengthscale) : json(nullptr)},
               {"init_noise_fraction", t.init_noise_fraction},
               {"jitter", t.jitter},
               {"normalize_targets", t.normalize_targets}};
    j["train"] = {{"epochs", t.epochs},
                  {"vae_batch_size", t.vae_batch_size},
                  {"vae_lr", t.vae_lr},
                  {"dkl_lr", t.dkl_lr},
                  {"dkl_scale", t.dkl_scale},
                  {"dkl_subset_size", t.dkl_subset_size ? json(*t.dkl_subset_size) : json(nullptr)},
                  {"eval_every", t.eval_every},
                  {"checkpoint_every", cfg.checkpoint_every}};
    j["generate"] = {{"restarts", cfg.generate.search.restarts},
                     {"steps", cfg.generate.search.steps},
                     {"step_size", cfg.generate.search.step_size},
                     {"n", cfg.generate.n}};
    if (cfg.sweep) {
        j["sweep"] = {{"parameter", to_string(cfg.sweep->parameter)}, {"values", cfg.sweep->values}};
    }
    j["out_dir"] = cfg.out_dir.string();
    return j;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
    return to_json_tree(cfg).dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    json j = to_json_tree(cfg);
    j.erase("out_dir");
    j.erase("generate");
    j.erase("sweep");
    j["train"].erase("epochs");
    j["train"].erase("checkpoint_every");
    return fnv1a64(j.dump());
}

Rng dataset_rng(std::uint64_t seed) {
    return Rng(seed).split(kDatasetStream);
}

}  // namespace dklvae
