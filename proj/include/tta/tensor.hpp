#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tta/errors.hpp"
#include "tta/rng.hpp"

namespace tta {

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

// Running byte counters over all live tensor buffers, for the benchmark's
// peak-memory report.
struct MemoryStats {
    std::int64_t current_bytes = 0;
    std::int64_t peak_bytes = 0;
};
MemoryStats memory_stats();
void reset_peak_memory();

// Dense float32 tensor, row-major, canonical image layout N x C x H x W.
// Copies share the underlying buffer; mutate only through mutable_data(),
// which unshares first.
class Tensor {
public:
    Shape shape;
    int node = -1;                 // handle into the tape that recorded this value
    std::uint64_t tape_id = 0;

    Tensor() = default;
    explicit Tensor(Shape s);                       // zero-filled
    Tensor(Shape s, float fill);
    Tensor(Shape s, std::vector<float> values);

    std::int64_t numel() const { return buf_ ? static_cast<std::int64_t>(buf_->size()) : 0; }
    bool defined() const { return static_cast<bool>(buf_); }
    int dim(int axis) const;
    int ndim() const { return static_cast<int>(shape.size()); }

    const float* data() const { return buf_->data(); }
    float* mutable_data();

    float at(std::int64_t i) const { return (*buf_)[static_cast<std::size_t>(i)]; }
    float scalar() const;

    // Same buffer, detached from any tape.
    Tensor detached() const;

    bool all_finite() const;

private:
    std::shared_ptr<std::vector<float>> buf_;
    void allocate(std::vector<float> values);
};

// Integer companion tensor for index maps and masks. Never on the tape.
struct IntTensor {
    Shape shape;
    std::vector<std::int32_t> data;

    IntTensor() = default;
    explicit IntTensor(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(numel_of(shape)), 0) {}
    IntTensor(Shape s, std::vector<std::int32_t> values);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int axis) const;
};

Tensor randn(Shape shape, Rng& rng, float stddev = 1.0f);
Tensor rand_uniform(Shape shape, Rng& rng, float lo = 0.0f, float hi = 1.0f);

// Runtime switch for the per-op finite checks (defaults to on in debug
// builds, off in release; tests flip it explicitly).
void set_debug_checks(bool enabled);
bool debug_checks_enabled();

namespace detail {
void require(bool cond, const char* what, const std::string& msg);
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);
void check_finite(const Tensor& t, const char* op);
}  // namespace detail

}  // namespace tta
