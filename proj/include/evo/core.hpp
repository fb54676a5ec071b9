#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evo {

/// Raised for invalid user-supplied configuration (bad ranges, mismatched
/// schedules, unknown keys). The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for failures while a run is in progress (numerical breakdown,
/// I/O). The CLI maps it to exit code 3.
class RuntimeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A batch of `size()` particles in R^dim, stored row-major.
class Batch {
public:
    Batch() = default;
    Batch(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}
    Batch(std::size_t dim, std::vector<double> data);

    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return data_.empty(); }

    std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void append(const Batch& other);
    void push_back(std::span<const double> point);

    /// Rows `indices[0], indices[1], ...` copied into a new batch.
    Batch gather(std::span<const std::size_t> indices) const;

    friend bool operator==(const Batch&, const Batch&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

}  // namespace evo
