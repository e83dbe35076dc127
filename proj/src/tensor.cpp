#include "tta/tensor.hpp"

#include <cmath>
#include <sstream>

namespace tta {

namespace {
MemoryStats g_mem;
bool g_debug_checks =
#ifdef NDEBUG
    false;
#else
    true;
#endif

void track_alloc(std::int64_t bytes) {
    g_mem.current_bytes += bytes;
    if (g_mem.current_bytes > g_mem.peak_bytes) g_mem.peak_bytes = g_mem.current_bytes;
}

// Buffer wrapper so the deleter can decrement the live-bytes counter.
std::shared_ptr<std::vector<float>> make_buffer(std::vector<float> values) {
    auto bytes = static_cast<std::int64_t>(values.size() * sizeof(float));
    track_alloc(bytes);
    return std::shared_ptr<std::vector<float>>(
        new std::vector<float>(std::move(values)),
        [bytes](std::vector<float>* p) {
            g_mem.current_bytes -= bytes;
            delete p;
        });
}
}  // namespace

MemoryStats memory_stats() { return g_mem; }
void reset_peak_memory() { g_mem.peak_bytes = g_mem.current_bytes; }

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks_enabled() { return g_debug_checks; }

std::int64_t numel_of(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw DimError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void Tensor::allocate(std::vector<float> values) {
    buf_ = make_buffer(std::move(values));
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
    allocate(std::vector<float>(static_cast<std::size_t>(numel_of(shape)), 0.0f));
}

Tensor::Tensor(Shape s, float fill) : shape(std::move(s)) {
    allocate(std::vector<float>(static_cast<std::size_t>(numel_of(shape)), fill));
}

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)) {
    if (static_cast<std::int64_t>(values.size()) != numel_of(shape))
        throw DimError("value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    allocate(std::move(values));
}

int Tensor::dim(int axis) const {
    if (axis < 0 || axis >= ndim())
        throw DimError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    return shape[static_cast<std::size_t>(axis)];
}

float* Tensor::mutable_data() {
    if (!buf_) throw ContractError("mutable_data on undefined tensor");
    if (buf_.use_count() > 1) {
        // Unshare: writes must not be visible through other handles.
        buf_ = make_buffer(std::vector<float>(*buf_));
    }
    return buf_->data();
}

float Tensor::scalar() const {
    if (numel() != 1)
        throw DimError("scalar() on tensor of shape " + shape_str(shape));
    return (*buf_)[0];
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.node = -1;
    t.tape_id = 0;
    return t;
}

bool Tensor::all_finite() const {
    if (!buf_) return true;
    for (float v : *buf_)
        if (!std::isfinite(v)) return false;
    return true;
}

IntTensor::IntTensor(Shape s, std::vector<std::int32_t> values) : shape(std::move(s)), data(std::move(values)) {
    if (static_cast<std::int64_t>(data.size()) != numel_of(shape))
        throw DimError("value count " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
}

int IntTensor::dim(int axis) const {
    if (axis < 0 || axis >= static_cast<int>(shape.size()))
        throw DimError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
    return shape[static_cast<std::size_t>(axis)];
}

Tensor randn(Shape shape, Rng& rng, float stddev) {
    std::vector<float> v(static_cast<std::size_t>(numel_of(shape)));
    for (auto& x : v) x = static_cast<float>(rng.normal() * stddev);
    return Tensor(std::move(shape), std::move(v));
}

Tensor rand_uniform(Shape shape, Rng& rng, float lo, float hi) {
    std::vector<float> v(static_cast<std::size_t>(numel_of(shape)));
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return Tensor(std::move(shape), std::move(v));
}

namespace detail {

void require(bool cond, const char* what, const std::string& msg) {
    if (!cond) throw ContractError(std::string(what) + ": " + msg);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw DimError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                       shape_str(b.shape));
}

void check_finite(const Tensor& t, const char* op) {
    if (!debug_checks_enabled()) return;
    if (!t.all_finite())
        throw NumericError(std::string(op) + ": non-finite values in result");
}

}  // namespace detail

}  // namespace tta
