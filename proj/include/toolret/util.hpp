#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace toolret {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: malformed records, duplicate ids, out-of-range values.
class ValidationError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Failure of an LLM or embedding backend (transport, bad response, rejection).
class ProviderError : public Error {
public:
    using Error::Error;
};

// Seeded generator with portable derived distributions. std::uniform_int_distribution
// and std::shuffle are implementation-defined, so they are not used anywhere that
// feeds a pinned output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);

    // Uniform in [0, 1).
    double uniform_real();

    // Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Mixes a base seed with a salt so that derived streams are independent.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace toolret
