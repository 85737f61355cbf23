#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <doctest.h>

#include "cotic/autodiff.hpp"

namespace testsupport {

// Relative agreement with an absolute floor for near-zero gradients; the
// usual central-difference tolerance contract.
inline bool grad_close(double analytic, double numeric, double rtol, double atol = 1e-8) {
    const double diff = std::fabs(analytic - numeric);
    if (diff <= atol) return true;
    return diff <= rtol * std::max(std::fabs(analytic), std::fabs(numeric));
}

// Checks every parameter element of a scalar-valued graph against central
// finite differences. `build` must be a pure function of the parameter
// values.
template <typename BuildFn>
void check_gradients(std::vector<cotic::Array> params, BuildFn build, double rtol,
                     double atol = 1e-8, double step = 1e-5) {
    std::vector<cotic::Tensor> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(cotic::Tensor::param(p));
    cotic::Tensor root = build(leaves);
    cotic::backward(root);

    const auto eval_at = [&](std::size_t pi, std::size_t ei, double v) {
        std::vector<cotic::Array> moved = params;
        moved[pi][ei] = v;
        std::vector<cotic::Tensor> ls;
        ls.reserve(moved.size());
        for (const auto& p : moved) ls.push_back(cotic::Tensor::constant(p));
        return build(ls).value().item();
    };

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t ei = 0; ei < params[pi].size(); ++ei) {
            const double x = params[pi][ei];
            const double up = eval_at(pi, ei, x + step);
            const double dn = eval_at(pi, ei, x - step);
            const double numeric = (up - dn) / (2.0 * step);
            const double analytic = leaves[pi].has_grad() ? leaves[pi].grad()[ei] : 0.0;
            INFO("param ", pi, " element ", ei, ": analytic ", analytic, " numeric ", numeric);
            CHECK(grad_close(analytic, numeric, rtol, atol));
        }
    }
}

}  // namespace testsupport
