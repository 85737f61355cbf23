#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cotic {

// Dense row-major array of 64-bit floats. Rank 0 is a scalar; a zero extent
// yields an empty array (degenerate sequences flow through unchanged). Arrays
// behave as immutable values once constructed: operations return fresh
// arrays.
class Array {
public:
    Array() = default;

    // Zero-filled array of the given shape.
    explicit Array(std::vector<std::size_t> shape);

    Array(std::vector<std::size_t> shape, std::vector<double> data);

    static Array scalar(double v);
    static Array full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    // Extent of a dimension; throws DimensionError when out of range.
    std::size_t extent(std::size_t dim) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2-D element access (rank must be 2).
    double& at(std::size_t row, std::size_t col);
    double at(std::size_t row, std::size_t col) const;

    // Scalar payload; throws ContractError when size() != 1.
    double item() const;

    bool all_finite() const;
    bool same_shape(const Array& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// 2-D matrix product; inner extents must agree.
Array matmul(const Array& a, const Array& b);

Array transpose(const Array& a);

// NumPy-style right-aligned broadcast result shape; throws DimensionError
// when extents are incompatible (neither equal nor 1).
std::vector<std::size_t> broadcast_shape(const std::vector<std::size_t>& a,
                                         const std::vector<std::size_t>& b);

double softplus_stable(double x);

// The return-time loss as a function of the residual x:
//   x + log(1 + exp(-2 x))
// evaluated in a form stable for large |x| and exactly symmetric in sign.
double logcosh_shifted(double x);

}  // namespace cotic
