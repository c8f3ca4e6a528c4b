#pragma once

#include "condebate/errors.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace condebate {

// Dense row-major 4-axis tensor of doubles, shape (batch, heads, q_len, k_len)
// for attention maps or (batch, heads, seq, dim) for Q/K/V.
class Tensor4 {
public:
    Tensor4() : dims_{0, 0, 0, 0} {}

    Tensor4(int d0, int d1, int d2, int d3) : dims_{d0, d1, d2, d3} {
        if (d0 < 1 || d1 < 1 || d2 < 1 || d3 < 1) {
            throw DimensionError("Tensor4 extents must all be >= 1, got " +
                                 shape_string({d0, d1, d2, d3}));
        }
        data_.assign(static_cast<size_t>(d0) * d1 * d2 * d3, 0.0);
    }

    const std::array<int, 4> & dims() const { return dims_; }
    int dim(int axis) const { return dims_[static_cast<size_t>(axis)]; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double & at(int b, int h, int i, int j) {
        return data_[index(b, h, i, j)];
    }
    double at(int b, int h, int i, int j) const {
        return data_[index(b, h, i, j)];
    }

    double * data() { return data_.data(); }
    const double * data() const { return data_.data(); }

    std::string shape_string() const { return shape_string(dims_); }

    static std::string shape_string(const std::array<int, 4> & d) {
        return "(" + std::to_string(d[0]) + ", " + std::to_string(d[1]) + ", " +
               std::to_string(d[2]) + ", " + std::to_string(d[3]) + ")";
    }

    bool same_shape(const Tensor4 & other) const { return dims_ == other.dims_; }

    // Bit-exact comparison (distinguishes -0.0, treats equal NaN bits as equal).
    bool bit_identical(const Tensor4 & other) const {
        return dims_ == other.dims_ &&
               std::memcmp(data_.data(), other.data_.data(),
                           data_.size() * sizeof(double)) == 0;
    }

private:
    size_t index(int b, int h, int i, int j) const {
        return ((static_cast<size_t>(b) * dims_[1] + h) * dims_[2] + i) * dims_[3] + j;
    }

    std::array<int, 4> dims_;
    std::vector<double> data_;
};

} // namespace condebate
