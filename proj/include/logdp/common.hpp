#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logdp {

/// Error raised for contract violations anywhere in the pipeline. Commands
/// catch it at the top level and turn it into a nonzero exit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class Label { Normal, Anomalous, Unknown };

inline char label_code(Label l) {
    switch (l) {
    case Label::Normal: return '0';
    case Label::Anomalous: return '1';
    default: return '?';
    }
}

inline Label label_from_code(char c) {
    if (c == '0') return Label::Normal;
    if (c == '1') return Label::Anomalous;
    return Label::Unknown;
}

namespace text {

std::vector<std::string> split_ws(std::string_view line);
std::string join(const std::vector<std::string>& tokens, char sep = ' ');
std::string_view trim(std::string_view s);

/// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(std::string_view s);

} // namespace text

/// FNV-1a, used for config fingerprints and artifact content hashes.
class Fnv1a {
public:
    Fnv1a& update(std::string_view data) {
        for (unsigned char c : data) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace logdp
