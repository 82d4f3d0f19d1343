#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace amc {

// Dense row-major 4-D tensor (batch, channels, height, width) with an
// optional same-shape gradient slot. Dense layers use (batch, dim, 1, 1).
struct Tensor {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<double> data;
    std::vector<double> grad;  // empty until ensure_grad()

    Tensor() = default;
    Tensor(int n, int c, int h, int w) : shape{n, c, h, w} {
        if (n < 0 || c < 0 || h < 0 || w < 0) throw std::invalid_argument("Tensor: negative dim");
        data.assign(numel(), 0.0);
    }

    std::size_t numel() const {
        return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2] * shape[3];
    }
    std::size_t item_size() const {
        return static_cast<std::size_t>(shape[1]) * shape[2] * shape[3];
    }

    double* item(int n) { return data.data() + item_size() * n; }
    const double* item(int n) const { return data.data() + item_size() * n; }

    // Reshape reusing the existing allocation; contents are unspecified
    // and must be fully overwritten by the caller.
    void reset(int n, int c, int h, int w) {
        shape = {n, c, h, w};
        if (data.size() != numel()) data.resize(numel());
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }
};

}  // namespace amc
