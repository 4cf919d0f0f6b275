#pragma once

#include <cstddef>
#include <vector>

#include "gesm/matrix.hpp"
#include "gesm/rng.hpp"

namespace gesm {

/// Weight matrix drawn from U(-a, a) with a = sqrt(6 / (rows + cols)).
Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

/// Adam accumulators for one flat list of parameter matrices. First and
/// second moments are kept per entry; `step` counts completed updates and
/// drives the bias correction.
struct AdamState {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::size_t step = 0;
};

/// Zero-moment state shaped after `params`.
AdamState adam_init(const std::vector<Matrix*>& params, double learning_rate);

/// One in-place Adam update. `params` and `grads` must line up with the
/// state's moment lists in length and shape.
void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads);

} // namespace gesm
