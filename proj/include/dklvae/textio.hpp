#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dklvae {

/// Splits one CSV line on commas, honouring double-quoted fields ("" escapes a
/// quote inside a quoted field). Quotes are kept on the returned fields.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest decimal form that parses back to exactly `v`.
std::string format_double(double v);
/// Parses a whole string as a double; throws ErrorKind::data otherwise.
double parse_double(const std::string& text);
std::uint64_t parse_u64(const std::string& text);

/// Ordered "key=value" text file, one entry per line. Lines starting with '#'
/// are comments.
class KeyValueFile {
public:
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set(const std::string& key, double value) { entries_[key] = format_double(value); }
    void set(const std::string& key, std::uint64_t value) { entries_[key] = std::to_string(value); }

    bool has(const std::string& key) const { return entries_.contains(key); }
    /// Throws ErrorKind::format naming the file when the key is missing.
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;

    void write(const std::filesystem::path& path) const;
    static KeyValueFile read(const std::filesystem::path& path);

private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

void write_f64_le(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_le(const std::filesystem::path& path);
void write_f32_le(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_le(const std::filesystem::path& path);

/// 64-bit FNV-1a of a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

/// Creates the directory (and parents), reporting failures as ErrorKind::io.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace dklvae
