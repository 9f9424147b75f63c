#pragma once

#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace plotbot {

// Error hierarchy shared by all modules.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace nn {

// Rank-4 array in NCHW layout, row-major. Templated on scalar so gradient
// checks can run the exact same code in double while the pipeline uses float.
template <class S>
struct TensorT {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<S> data;
    std::vector<S> grad;  // empty, or same length as data

    TensorT() = default;
    TensorT(int n_, int c_, int h_, int w_, S fill = S(0))
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t size() const { return data.size(); }

    S& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    S at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_dims(const TensorT& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string dims_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

using Tensor = TensorT<float>;

template <class S>
void require_same_dims(const TensorT<S>& a, const TensorT<S>& b, const char* where) {
    if (!a.same_dims(b))
        throw ShapeError(std::string(where) + ": dims " + a.dims_str() +
                         " vs " + b.dims_str());
}

template <class S>
bool all_finite(const TensorT<S>& t) {
    for (S v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

}  // namespace nn
}  // namespace plotbot
