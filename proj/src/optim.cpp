#include "gesm/optim.hpp"

#include <cmath>
#include <string>

#include "gesm/error.hpp"

namespace gesm {

Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("glorot_init: empty shape (" + std::to_string(rows) + ", " +
                             std::to_string(cols) + ")");
    }
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix w(rows, cols);
    for (double& v : w.data) {
        v = rng.uniform(-a, a);
    }
    return w;
}

AdamState adam_init(const std::vector<Matrix*>& params, double learning_rate) {
    AdamState st;
    st.learning_rate = learning_rate;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Matrix* p : params) {
        st.m.push_back(Matrix::zeros(p->rows, p->cols));
        st.v.push_back(Matrix::zeros(p->rows, p->cols));
    }
    return st;
}

void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads) {
    if (params.size() != state.m.size() || grads.size() != state.m.size()) {
        throw DimensionError("adam_step: parameter list does not match optimizer state");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& w = *params[p];
        const Matrix& g = *grads[p];
        Matrix& m = state.m[p];
        Matrix& v = state.v[p];
        if (!w.same_shape(m) || !g.same_shape(m)) {
            throw DimensionError("adam_step: shape mismatch at parameter " + std::to_string(p));
        }
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double gk = g.data[k];
            m.data[k] = state.beta1 * m.data[k] + (1.0 - state.beta1) * gk;
            v.data[k] = state.beta2 * v.data[k] + (1.0 - state.beta2) * gk * gk;
            const double mhat = m.data[k] / bc1;
            const double vhat = v.data[k] / bc2;
            w.data[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

} // namespace gesm
