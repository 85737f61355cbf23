#include "cotic/array.hpp"

#include <cmath>
#include <sstream>

#include "cotic/errors.hpp"

namespace cotic {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

}  // namespace

Array::Array(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Array::Array(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str());
    }
}

Array Array::scalar(double v) { return Array({}, {v}); }

Array Array::full(std::vector<std::size_t> shape, double v) {
    Array a(std::move(shape));
    for (std::size_t i = 0; i < a.size(); ++i) a.data_[i] = v;
    return a;
}

std::size_t Array::extent(std::size_t dim) const {
    if (dim >= shape_.size()) {
        throw DimensionError("dimension " + std::to_string(dim) + " out of range for shape " +
                             shape_str());
    }
    return shape_[dim];
}

double& Array::at(std::size_t row, std::size_t col) {
    if (rank() != 2) throw DimensionError("at(row, col) requires a rank-2 array");
    return data_[row * shape_[1] + col];
}

double Array::at(std::size_t row, std::size_t col) const {
    if (rank() != 2) throw DimensionError("at(row, col) requires a rank-2 array");
    return data_[row * shape_[1] + col];
}

double Array::item() const {
    if (data_.size() != 1) throw ContractError("item() requires a single-element array");
    return data_[0];
}

bool Array::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Array::shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ',';
        os << shape_[i];
    }
    os << ')';
    return os.str();
}

Array matmul(const Array& a, const Array& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul requires rank-2 operands, got " + a.shape_str() + " and " +
                             b.shape_str());
    }
    const std::size_t n = a.extent(0);
    const std::size_t k = a.extent(1);
    const std::size_t m = b.extent(1);
    if (b.extent(0) != k) {
        throw DimensionError("matmul inner extents disagree: " + a.shape_str() + " vs " +
                             b.shape_str());
    }
    Array c({n, m});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    // i-k-j loop order: rows of b are contiguous, the inner loop vectorizes.
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = cp + i * m;
        const double* arow = ap + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            const double* brow = bp + kk * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Array transpose(const Array& a) {
    if (a.rank() != 2) throw DimensionError("transpose requires a rank-2 array");
    const std::size_t n = a.extent(0);
    const std::size_t m = a.extent(1);
    Array t({m, n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) t.data()[j * n + i] = a.data()[i * m + j];
    }
    return t;
}

std::vector<std::size_t> broadcast_shape(const std::vector<std::size_t>& a,
                                         const std::vector<std::size_t>& b) {
    const std::size_t rank = std::max(a.size(), b.size());
    std::vector<std::size_t> out(rank, 1);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
        const std::size_t eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
        if (ea == eb) {
            out[i] = ea;
        } else if (ea == 1) {
            out[i] = eb;
        } else if (eb == 1) {
            out[i] = ea;
        } else {
            throw DimensionError("shapes are not broadcast-compatible");
        }
    }
    return out;
}

double softplus_stable(double x) {
    // softplus(x) = x + log(1 + e^{-x}) for x > 0 avoids overflow and keeps
    // the large-x linear asymptote exact to rounding.
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double logcosh_shifted(double x) {
    // |x| + log1p(e^{-2|x|}) equals x + log(1 + e^{-2x}) for either sign and
    // is bit-exactly symmetric.
    const double ax = std::fabs(x);
    return ax + std::log1p(std::exp(-2.0 * ax));
}

}  // namespace cotic
