#include "dklvae/store.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dklvae/textio.hpp"

namespace dklvae {

namespace fs = std::filesystem;

namespace {

void check_version(const KeyValueFile& kv, int expected, const fs::path& dir) {
    const auto v = kv.get_u64("format_version");
    if (v != static_cast<std::uint64_t>(expected)) {
        throw Error(ErrorKind::format, dir.string() + ": unsupported format_version " + std::to_string(v) +
                                           " (expected " + std::to_string(expected) + ")");
    }
}

std::string join_counts(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<std::size_t> parse_counts(const std::string& text) {
    std::vector<std::size_t> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_u64(item));
    }
    return out;
}

[[noreturn]] void format_error(const fs::path& where, const std::string& msg) {
    throw Error(ErrorKind::format, where.string() + ": " + msg);
}

}  // namespace

void save_card_dataset(const fs::path& dir, const CardDatasetFile& data) {
    ensure_directory(dir);
    KeyValueFile kv;
    kv.set("format_version", std::uint64_t{kDatasetFormatVersion});
    kv.set("kind", std::string("cards"));
    kv.set("count", std::uint64_t{data.samples.size()});
    kv.set("seed", data.seed);
    kv.set("image_size", std::uint64_t{cards::kImageSize});
    kv.set("angle_lo", data.ranges.angle_lo);
    kv.set("angle_hi", data.ranges.angle_hi);
    kv.set("shear_lo", data.ranges.shear_lo);
    kv.set("shear_hi", data.ranges.shear_hi);
    kv.set("translation_lo", data.ranges.translation_lo);
    kv.set("translation_hi", data.ranges.translation_hi);
    kv.set("images", std::string("images.f32"));
    kv.set("labels", std::string("labels.csv"));

    std::vector<float> blob;
    blob.reserve(data.samples.size() * cards::kPixels);
    for (const auto& s : data.samples) {
        if (s.image.size() != cards::kPixels) {
            throw Error(ErrorKind::shape, "save_card_dataset: image of wrong size");
        }
        blob.insert(blob.end(), s.image.begin(), s.image.end());
    }
    write_f32_le(dir / "images.f32", blob);

    std::ofstream labels(dir / "labels.csv", std::ios::binary);
    if (!labels) {
        throw Error(ErrorKind::io, "cannot write " + (dir / "labels.csv").string());
    }
    labels << "index,suit,angle,shear,tx,ty\n";
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.samples[i];
        labels << i << ',' << cards::to_string(s.suit) << ',' << format_double(s.angle) << ','
               << format_double(s.shear) << ',' << format_double(s.tx) << ',' << format_double(s.ty) << '\n';
    }
    if (!labels) {
        throw Error(ErrorKind::io, "write failed for " + (dir / "labels.csv").string());
    }
    // Manifest last: its presence marks a complete dataset.
    kv.write(dir / "manifest.txt");
}

CardDatasetFile load_card_dataset(const fs::path& dir) {
    const KeyValueFile kv = KeyValueFile::read(dir / "manifest.txt");
    check_version(kv, kDatasetFormatVersion, dir);
    if (kv.get("kind") != "cards") format_error(dir, "not a card dataset (kind=" + kv.get("kind") + ")");
    if (kv.get_u64("image_size") != cards::kImageSize) format_error(dir, "unsupported image_size");
    CardDatasetFile out;
    const std::size_t count = kv.get_u64("count");
    out.seed = kv.get_u64("seed");
    out.ranges = {kv.get_double("angle_lo"),       kv.get_double("angle_hi"), kv.get_double("shear_lo"),
                  kv.get_double("shear_hi"),       kv.get_double("translation_lo"),
                  kv.get_double("translation_hi")};

    const auto blob = read_f32_le(dir / kv.get("images"));
    if (blob.size() != count * cards::kPixels) {
        format_error(dir / kv.get("images"), "holds " + std::to_string(blob.size()) + " floats, expected " +
                                                 std::to_string(count * cards::kPixels));
    }
    std::ifstream labels(dir / kv.get("labels"), std::ios::binary);
    if (!labels) {
        throw Error(ErrorKind::io, "cannot open " + (dir / kv.get("labels")).string());
    }
    std::string line;
    std::getline(labels, line);
    if (line != "index,suit,angle,shear,tx,ty") format_error(dir / "labels.csv", "unexpected header");
    std::size_t line_no = 1;
    while (std::getline(labels, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        const fs::path where = (dir / "labels.csv").string() + ":" + std::to_string(line_no);
        if (f.size() != 6) format_error(where, "expected 6 fields");
        cards::CardSample s;
        try {
            if (parse_u64(f[0]) != out.samples.size()) format_error(where, "index out of sequence");
            s.suit = cards::suit_from_string(f[1]);
            s.angle = parse_double(f[2]);
            s.shear = parse_double(f[3]);
            s.tx = parse_double(f[4]);
            s.ty = parse_double(f[5]);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::format) throw;
            format_error(where, e.what());
        }
        if (out.samples.size() >= count) format_error(where, "more label rows than count");
        const auto first = blob.begin() + static_cast<std::ptrdiff_t>(out.samples.size() * cards::kPixels);
        s.image.assign(first, first + static_cast<std::ptrdiff_t>(cards::kPixels));
        out.samples.push_back(std::move(s));
    }
    if (out.samples.size() != count) {
        format_error(dir / "labels.csv", std::to_string(out.samples.size()) + " rows, manifest says " +
                                             std::to_string(count));
    }
    for (float v : blob) {
        if (!(v >= 0.0f && v <= 1.0f)) format_error(dir / "images.f32", "pixel outside [0, 1]");
    }
    return out;
}

void save_sequence_dataset(const fs::path& dir, const SequenceDatasetFile& data) {
    ensure_directory(dir);
    KeyValueFile kv;
    kv.set("format_version", std::uint64_t{kDatasetFormatVersion});
    kv.set("kind", std::string("sequences"));
    kv.set("count", std::uint64_t{data.samples.size()});
    kv.set("length", std::uint64_t{data.length});
    kv.set("alphabet_size", std::uint64_t{data.alphabet.size()});
    kv.set("alphabet", sequences::join_tokens(data.alphabet.tokens()));
    kv.set("padding", data.alphabet.padding());
    kv.set("source", data.source);
    kv.set("seed", data.seed);
    kv.set("sequences", std::string("sequences.csv"));
    if (data.synthetic) {
        const auto& sc = *data.synthetic;
        kv.set("raw_min", data.raw_min);
        kv.set("raw_max", data.raw_max);
        kv.set("target_lo", sc.target_lo);
        kv.set("target_hi", sc.target_hi);
        kv.set("min_length", std::uint64_t{sc.min_length});
        kv.set("token_model", sequences::to_string(sc.token_model));
        kv.set("stickiness", sc.stickiness);
    }
    sequences::write_sequence_csv(dir / "sequences.csv", data.samples);
    kv.write(dir / "manifest.txt");
}

SequenceDatasetFile load_sequence_dataset(const fs::path& dir, bool strict) {
    const KeyValueFile kv = KeyValueFile::read(dir / "manifest.txt");
    check_version(kv, kDatasetFormatVersion, dir);
    if (kv.get("kind") != "sequences") format_error(dir, "not a sequence dataset (kind=" + kv.get("kind") + ")");
    SequenceDatasetFile out;
    try {
        out.alphabet = sequences::Alphabet(sequences::tokenize(kv.get("alphabet")), kv.get("padding"));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::format) throw;
        format_error(dir / "manifest.txt", std::string("alphabet: ") + e.what());
    }
    if (out.alphabet.size() != kv.get_u64("alphabet_size")) {
        format_error(dir / "manifest.txt", "alphabet_size does not match the alphabet");
    }
    out.length = kv.get_u64("length");
    out.source = kv.get("source");
    out.seed = kv.get_u64("seed");
    if (kv.has("raw_min")) {
        sequences::SyntheticConfig sc;
        sc.length = out.length;
        sc.alphabet_size = out.alphabet.size();
        sc.target_lo = kv.get_double("target_lo");
        sc.target_hi = kv.get_double("target_hi");
        sc.min_length = kv.get_u64("min_length");
        sc.token_model = sequences::token_model_from_string(kv.get("token_model"));
        sc.stickiness = kv.get_double("stickiness");
        out.synthetic = sc;
        out.raw_min = kv.get_double("raw_min");
        out.raw_max = kv.get_double("raw_max");
    }
    auto loaded = sequences::load_sequence_csv(dir / kv.get("sequences"), out.alphabet, out.length, strict);
    out.samples = std::move(loaded.samples);
    if (strict && out.samples.size() != kv.get_u64("count")) {
        format_error(dir, std::to_string(out.samples.size()) + " sequences, manifest says " + kv.get("count"));
    }
    return out;
}

std::string dataset_kind(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.txt")) {
        throw Error(ErrorKind::io, "no dataset at " + dir.string() + " (missing manifest.txt)");
    }
    const KeyValueFile kv = KeyValueFile::read(dir / "manifest.txt");
    return kv.get("kind");
}

Dataset to_dataset(const std::vector<cards::CardSample>& samples) {
    Dataset d;
    d.kind = DataKind::images;
    d.rows = cards::kImageSize;
    d.cols = cards::kImageSize;
    d.x.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(cards::kPixels));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = 0; j < cards::kPixels; ++j) {
            d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].image[j];
        }
        d.y.push_back(samples[i].angle);
        d.groups.push_back(cards::to_string(samples[i].suit));
        d.ids.push_back(i);
    }
    return d;
}

Dataset to_dataset(const std::vector<sequences::SequenceSample>& samples, std::size_t length,
                   std::size_t alphabet_size) {
    Dataset d;
    d.kind = DataKind::sequences;
    d.rows = length;
    d.cols = alphabet_size;
    d.x.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(length * alphabet_size));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& m = samples[i].onehot;
        if (static_cast<std::size_t>(m.rows()) != length || static_cast<std::size_t>(m.cols()) != alphabet_size) {
            throw Error(ErrorKind::shape, "to_dataset: sample " + std::to_string(i) + " has shape " +
                                              shape_string(m));
        }
        d.x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(m.data(), m.size());
        d.y.push_back(samples[i].target);
        d.groups.emplace_back("all");
        d.ids.push_back(i);
    }
    return d;
}

Dataset load_training_data(const fs::path& dir, bool strict) {
    const std::string kind = dataset_kind(dir);
    if (kind == "cards") {
        return to_dataset(load_card_dataset(dir).samples);
    }
    if (kind == "sequences") {
        const auto file = load_sequence_dataset(dir, strict);
        return to_dataset(file.samples, file.length, file.alphabet.size());
    }
    format_error(dir, "unknown dataset kind '" + kind + "'");
}

SplitData split_dataset(const Dataset& data, const RangeSplit& split) {
    const SplitIndices idx = split_by_value(data.y, split);
    SplitData out;
    out.train = data.subset(idx.train);
    out.test = data.subset(idx.test);
    out.dropped = idx.dropped.size();
    return out;
}

void save_checkpoint(const fs::path& dir, const DklVaeModel& model, const CheckpointInfo& info) {
    ensure_directory(dir);
    const auto& arch = model.vae.arch;
    KeyValueFile kv;
    kv.set("format_version", std::uint64_t{kCheckpointFormatVersion});
    kv.set("data_dim", std::uint64_t{arch.data_dim});
    kv.set("encoder_hidden", join_counts(arch.encoder_hidden));
    kv.set("decoder_hidden", join_counts(arch.decoder_hidden));
    kv.set("latent_dim", std::uint64_t{arch.latent_dim});
    kv.set("gp_raw_lengthscale", model.gp_raw.raw_lengthscale);
    kv.set("gp_raw_output_scale", model.gp_raw.raw_output_scale);
    kv.set("gp_raw_noise", model.gp_raw.raw_noise);
    kv.set("lengthscale_bound", model.lengthscale_bound);
    kv.set("jitter", model.jitter);
    kv.set("target_offset", model.target_offset);
    kv.set("target_scale", model.target_scale);
    kv.set("epoch", std::uint64_t{model.epoch});
    kv.set("seed", info.seed);
    kv.set("config_hash", info.config_hash);

    std::vector<double> params;
    for (const MlpModel* m : {&model.vae.trunk, &model.vae.mean_head, &model.vae.scale_head, &model.vae.decoder}) {
        params.insert(params.end(), m->params.begin(), m->params.end());
    }
    kv.set("param_count", std::uint64_t{params.size()});

    std::vector<double> opt;
    auto add_state = [&](const AdamState& s, const std::string& name) {
        kv.set(name + "_step", std::uint64_t{s.step});
        opt.insert(opt.end(), s.m.begin(), s.m.end());
        opt.insert(opt.end(), s.v.begin(), s.v.end());
    };
    const char* vae_names[] = {"vae_trunk", "vae_mean", "vae_scale", "vae_decoder"};
    const char* dkl_names[] = {"dkl_trunk", "dkl_mean", "dkl_gp"};
    for (std::size_t i = 0; i < 4; ++i) add_state(model.vae_opt[i], vae_names[i]);
    for (std::size_t i = 0; i < 3; ++i) add_state(model.dkl_opt[i], dkl_names[i]);
    kv.set("optimizer_count", std::uint64_t{opt.size()});

    write_f64_le(dir / "params.bin", params);
    write_f64_le(dir / "optimizer.bin", opt);
    kv.write(dir / "manifest.txt");
}

DklVaeModel load_checkpoint(const fs::path& dir, CheckpointInfo* info) {
    if (!fs::exists(dir / "manifest.txt")) {
        throw Error(ErrorKind::io, "no checkpoint at " + dir.string() + " (missing manifest.txt)");
    }
    const KeyValueFile kv = KeyValueFile::read(dir / "manifest.txt");
    check_version(kv, kCheckpointFormatVersion, dir);
    DklVaeModel m;
    VaeArchitecture arch;
    try {
        arch.data_dim = kv.get_u64("data_dim");
        arch.encoder_hidden = parse_counts(kv.get("encoder_hidden"));
        arch.decoder_hidden = parse_counts(kv.get("decoder_hidden"));
        arch.latent_dim = kv.get_u64("latent_dim");
        arch.validate();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::format) throw;
        format_error(dir / "manifest.txt", std::string("architecture: ") + e.what());
    }

    // Shapes come from a zero-seeded init; every value is then overwritten.
    Rng scratch(0);
    m.vae = init_vae(arch, scratch);
    std::vector<MlpModel*> blocks{&m.vae.trunk, &m.vae.mean_head, &m.vae.scale_head, &m.vae.decoder};
    std::size_t expected = 0;
    for (auto* b : blocks) expected += b->params.size();
    if (kv.get_u64("param_count") != expected) {
        format_error(dir / "manifest.txt", "param_count " + kv.get("param_count") +
                                               " does not match the architecture (" + std::to_string(expected) +
                                               ")");
    }
    const auto params = read_f64_le(dir / "params.bin");
    if (params.size() != expected) {
        format_error(dir / "params.bin", "holds " + std::to_string(params.size()) + " values, expected " +
                                             std::to_string(expected));
    }
    std::size_t off = 0;
    for (auto* b : blocks) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(off), b->params.size(), b->params.begin());
        off += b->params.size();
    }

    const std::size_t sizes[] = {m.vae.trunk.params.size(), m.vae.mean_head.params.size(),
                                 m.vae.scale_head.params.size(), m.vae.decoder.params.size(),
                                 m.vae.trunk.params.size(), m.vae.mean_head.params.size(), 3};
    std::size_t opt_expected = 0;
    for (auto s : sizes) opt_expected += 2 * s;
    const auto opt = read_f64_le(dir / "optimizer.bin");
    if (opt.size() != opt_expected || kv.get_u64("optimizer_count") != opt_expected) {
        format_error(dir / "optimizer.bin", "holds " + std::to_string(opt.size()) + " values, expected " +
                                                std::to_string(opt_expected));
    }
    const char* names[] = {"vae_trunk", "vae_mean", "vae_scale", "vae_decoder", "dkl_trunk", "dkl_mean", "dkl_gp"};
    off = 0;
    for (std::size_t i = 0; i < 7; ++i) {
        AdamState s(sizes[i]);
        s.step = kv.get_u64(std::string(names[i]) + "_step");
        std::copy_n(opt.begin() + static_cast<std::ptrdiff_t>(off), sizes[i], s.m.begin());
        off += sizes[i];
        std::copy_n(opt.begin() + static_cast<std::ptrdiff_t>(off), sizes[i], s.v.begin());
        off += sizes[i];
        if (i < 4) m.vae_opt[i] = std::move(s);
        else m.dkl_opt[i - 4] = std::move(s);
    }

    m.gp_raw = {kv.get_double("gp_raw_lengthscale"), kv.get_double("gp_raw_output_scale"),
                kv.get_double("gp_raw_noise")};
    m.lengthscale_bound = kv.get_double("lengthscale_bound");
    m.jitter = kv.get_double("jitter");
    m.target_offset = kv.get_double("target_offset");
    m.target_scale = kv.get_double("target_scale");
    m.epoch = kv.get_u64("epoch");
    if (!(m.lengthscale_bound > 0.0) || !(m.jitter > 0.0) || !(m.target_scale > 0.0)) {
        format_error(dir / "manifest.txt", "invalid GP settings");
    }
    for (double v : params) {
        if (!std::isfinite(v)) format_error(dir / "params.bin", "non-finite parameter");
    }
    if (info) {
        info->seed = kv.get_u64("seed");
        info->config_hash = kv.get_u64("config_hash");
    }
    return m;
}

void write_pgm(const fs::path& path, const std::vector<float>& image, std::size_t width, std::size_t height) {
    if (image.size() != width * height) {
        throw Error(ErrorKind::shape, "write_pgm: image has " + std::to_string(image.size()) + " pixels, expected " +
                                          std::to_string(width * height));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out << "P5\n" << width << ' ' << height << "\n255\n";
    for (float v : image) {
        const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
    }
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

std::vector<float> read_pgm(const fs::path& path, std::size_t& width, std::size_t& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    std::string magic;
    std::size_t maxval = 0;
    in >> magic >> width >> height >> maxval;
    if (magic != "P5" || !in || maxval == 0 || maxval > 255) {
        format_error(path, "not a binary 8-bit PGM");
    }
    in.get();
    std::vector<float> image(width * height);
    for (auto& v : image) {
        const int c = in.get();
        if (c == EOF) format_error(path, "truncated pixel data");
        v = static_cast<float>(c) / static_cast<float>(maxval);
    }
    return image;
}

}  // namespace dklvae
