#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chronoforge {

/// Gregorian year. All temporal reasoning in the toolkit is year-granular.
using Year = int;

inline constexpr Year kDefaultHorizon = 2023;
inline constexpr Year kDefaultEpoch = 2000;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error { using Error::Error; };
class SizingError : public Error { using Error::Error; };
class CapabilityError : public Error { using Error::Error; };
class TransportError : public Error { using Error::Error; };
class NotFoundError : public Error { using Error::Error; };
class NoDataError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

/// A pipeline stage could not find the artifact written by its predecessor.
class StageInputMissing : public Error {
public:
    StageInputMissing(const std::string& artifact, const std::string& producing_stage)
        : Error("missing input artifact '" + artifact + "'; run `chronoforge " + producing_stage +
                "` first"),
          stage_(producing_stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// ---------------------------------------------------------------------------
// Hashing and seeded randomness
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);
std::string hex64(std::uint64_t value);

/// Uniform value in [0,1) derived from (seed, key); order independent.
double keyed_uniform(std::uint64_t seed, std::string_view key);

/// Unbiased index in [0, bound) from a standard engine; avoids the
/// implementation-defined std::uniform_int_distribution so draws are portable.
std::size_t bounded_index(std::mt19937_64& rng, std::size_t bound);

template <class T>
void portable_shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = bounded_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

// ---------------------------------------------------------------------------
// Strings
// ---------------------------------------------------------------------------

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool iequals(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::uint64_t hash_file(const std::filesystem::path& path);

/// Rewrites a JSONL append log with one line per string `key_field`, the
/// last occurrence winning, in key order. Unparseable lines are dropped.
/// Replaces the file atomically; a missing file is left alone.
void compact_jsonl(const std::filesystem::path& path, std::string_view key_field);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace chronoforge
