#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csl/errors.hpp"

namespace csl {

/// Element types the array container handles. Everything is little-endian,
/// C-contiguous. Compute paths upcast to float64; the raw bytes are kept so a
/// load/save round trip reproduces the input bit for bit (including NaN
/// payloads in float32 data).
enum class Dtype { Float32, Float64, Uint8, Int32 };

inline size_t dtype_size(Dtype dt) {
    switch (dt) {
        case Dtype::Float32: return 4;
        case Dtype::Float64: return 8;
        case Dtype::Uint8: return 1;
        case Dtype::Int32: return 4;
    }
    throw std::invalid_argument("unknown dtype");
}

inline const char* dtype_descr(Dtype dt) {
    switch (dt) {
        case Dtype::Float32: return "<f4";
        case Dtype::Float64: return "<f8";
        case Dtype::Uint8: return "|u1";
        case Dtype::Int32: return "<i4";
    }
    throw std::invalid_argument("unknown dtype");
}

/// N-dimensional array: shape plus a flat little-endian byte buffer.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<size_t> shape, Dtype dtype, std::vector<std::byte> data)
        : shape_(std::move(shape)), dtype_(dtype), data_(std::move(data)) {
        if (data_.size() != size() * dtype_size(dtype_)) {
            throw FormatError("tensor data size does not match shape");
        }
    }

    static Tensor zeros(std::vector<size_t> shape, Dtype dtype) {
        size_t n = 1;
        for (size_t d : shape) n *= d;
        return Tensor(std::move(shape), dtype,
                      std::vector<std::byte>(n * dtype_size(dtype)));
    }

    /// Builds a tensor of the requested dtype from float64 values,
    /// narrowing where the dtype asks for it.
    static Tensor from_f64(std::vector<size_t> shape, Dtype dtype,
                           std::span<const double> values) {
        Tensor t = zeros(std::move(shape), dtype);
        if (values.size() != t.size()) {
            throw std::invalid_argument("value count does not match shape");
        }
        switch (dtype) {
            case Dtype::Float32: {
                auto out = t.view<float>();
                for (size_t i = 0; i < values.size(); ++i)
                    out[i] = static_cast<float>(values[i]);
                break;
            }
            case Dtype::Float64: {
                auto out = t.view<double>();
                for (size_t i = 0; i < values.size(); ++i) out[i] = values[i];
                break;
            }
            case Dtype::Uint8: {
                auto out = t.view<uint8_t>();
                for (size_t i = 0; i < values.size(); ++i)
                    out[i] = static_cast<uint8_t>(values[i]);
                break;
            }
            case Dtype::Int32: {
                auto out = t.view<int32_t>();
                for (size_t i = 0; i < values.size(); ++i)
                    out[i] = static_cast<int32_t>(values[i]);
                break;
            }
        }
        return t;
    }

    const std::vector<size_t>& shape() const { return shape_; }
    Dtype dtype() const { return dtype_; }
    size_t ndim() const { return shape_.size(); }

    size_t size() const {
        size_t n = 1;
        for (size_t d : shape_) n *= d;
        return n;
    }

    std::span<const std::byte> bytes() const { return data_; }
    std::span<std::byte> bytes() { return data_; }

    template <typename T>
    std::span<T> view() {
        if (sizeof(T) != dtype_size(dtype_)) {
            throw std::invalid_argument("view element size mismatch");
        }
        return {reinterpret_cast<T*>(data_.data()), size()};
    }

    template <typename T>
    std::span<const T> view() const {
        if (sizeof(T) != dtype_size(dtype_)) {
            throw std::invalid_argument("view element size mismatch");
        }
        return {reinterpret_cast<const T*>(data_.data()), size()};
    }

    /// Upcast copy for the compute paths, which all run in float64.
    std::vector<double> as_f64() const {
        std::vector<double> out(size());
        switch (dtype_) {
            case Dtype::Float32: {
                auto in = view<float>();
                for (size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<double>(in[i]);
                break;
            }
            case Dtype::Float64: {
                auto in = view<double>();
                std::copy(in.begin(), in.end(), out.begin());
                break;
            }
            case Dtype::Uint8: {
                auto in = view<uint8_t>();
                for (size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<double>(in[i]);
                break;
            }
            case Dtype::Int32: {
                auto in = view<int32_t>();
                for (size_t i = 0; i < out.size(); ++i)
                    out[i] = static_cast<double>(in[i]);
                break;
            }
        }
        return out;
    }

    bool bitwise_equal(const Tensor& other) const {
        return dtype_ == other.dtype_ && shape_ == other.shape_ &&
               data_.size() == other.data_.size() &&
               std::memcmp(data_.data(), other.data_.data(), data_.size()) == 0;
    }

private:
    std::vector<size_t> shape_;
    Dtype dtype_ = Dtype::Float64;
    std::vector<std::byte> data_;
};

/// Dense per-pixel class labels with an "ignore" value that marks pixels
/// excluded from losses and metrics.
struct LabelMap {
    size_t height = 0;
    size_t width = 0;
    std::vector<int32_t> labels;  // row-major, height * width
    int32_t ignore_index = 255;

    size_t size() const { return height * width; }

    /// Accepts a 2-D uint8 or int32 tensor.
    static LabelMap from_tensor(const Tensor& t, int32_t ignore_index = 255) {
        if (t.ndim() != 2) {
            throw std::invalid_argument("label map must be 2-D, got " +
                                        std::to_string(t.ndim()) + "-D");
        }
        if (t.dtype() != Dtype::Uint8 && t.dtype() != Dtype::Int32) {
            throw std::invalid_argument("label map must be uint8 or int32");
        }
        LabelMap m;
        m.height = t.shape()[0];
        m.width = t.shape()[1];
        m.ignore_index = ignore_index;
        m.labels.resize(t.size());
        if (t.dtype() == Dtype::Uint8) {
            auto in = t.view<uint8_t>();
            for (size_t i = 0; i < in.size(); ++i)
                m.labels[i] = static_cast<int32_t>(in[i]);
        } else {
            auto in = t.view<int32_t>();
            std::copy(in.begin(), in.end(), m.labels.begin());
        }
        return m;
    }

    Tensor to_tensor() const {
        Tensor t = Tensor::zeros({height, width}, Dtype::Int32);
        auto out = t.view<int32_t>();
        std::copy(labels.begin(), labels.end(), out.begin());
        return t;
    }

    /// Rejects labels outside [0, num_classes) unless they equal the ignore
    /// value.
    void validate_labels(size_t num_classes) const {
        for (size_t i = 0; i < labels.size(); ++i) {
            int32_t v = labels[i];
            if (v == ignore_index) continue;
            if (v < 0 || static_cast<size_t>(v) >= num_classes) {
                throw std::invalid_argument(
                    "label " + std::to_string(v) + " at pixel " +
                    std::to_string(i) + " outside [0, " +
                    std::to_string(num_classes) + ") and not the ignore value");
            }
        }
    }
};

}  // namespace csl
