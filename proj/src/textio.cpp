#include "dklvae/textio.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dklvae/error.hpp"

namespace dklvae {

static_assert(std::endian::native == std::endian::little,
              "binary blobs are written in native order, which must be little-endian");

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"') {
            if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += "\"\"";
                ++i;
                continue;
            }
            quoted = !quoted;
            fields.back() += c;
        } else if (c == ',' && !quoted) {
            fields.emplace_back();
        } else if (c != '\r' || i + 1 != line.size()) {
            fields.back() += c;
        }
    }
    return fields;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || text.empty()) {
        throw Error(ErrorKind::data, "not a number: '" + text + "'");
    }
    return v;
}

std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorKind::data, "not an unsigned integer: '" + text + "'");
    }
    return v;
}

const std::string& KeyValueFile::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw Error(ErrorKind::format, (origin_.empty() ? std::string("manifest") : origin_) +
                                           ": missing key '" + key + "'");
    }
    return it->second;
}

double KeyValueFile::get_double(const std::string& key) const {
    try {
        return parse_double(get(key));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::format) throw;
        throw Error(ErrorKind::format, origin_ + ": key '" + key + "': " + e.what());
    }
}

std::uint64_t KeyValueFile::get_u64(const std::string& key) const {
    try {
        return parse_u64(get(key));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::format) throw;
        throw Error(ErrorKind::format, origin_ + ": key '" + key + "': " + e.what());
    }
}

void KeyValueFile::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    for (const auto& [k, v] : entries_) {
        out << k << '=' << v << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

KeyValueFile KeyValueFile::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    KeyValueFile kv;
    kv.origin_ = path.string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) +
                                               ": expected key=value");
        }
        kv.entries_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

namespace {

template <typename T>
void write_blob(const std::filesystem::path& path, std::span<const T> values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
    if (!out) {
        throw Error(ErrorKind::io, "write failed for " + path.string());
    }
}

template <typename T>
std::vector<T> read_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(T) != 0) {
        throw Error(ErrorKind::format, path.string() + ": size " + std::to_string(bytes.size()) +
                                           " is not a multiple of " + std::to_string(sizeof(T)));
    }
    std::vector<T> values(bytes.size() / sizeof(T));
    std::memcpy(values.data(), bytes.data(), bytes.size());
    return values;
}

}  // namespace

void write_f64_le(const std::filesystem::path& path, std::span<const double> values) {
    write_blob(path, values);
}

std::vector<double> read_f64_le(const std::filesystem::path& path) {
    return read_blob<double>(path);
}

void write_f32_le(const std::filesystem::path& path, std::span<const float> values) {
    write_blob(path, values);
}

std::vector<float> read_f32_le(const std::filesystem::path& path) {
    return read_blob<float>(path);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
    }
}

}  // namespace dklvae
