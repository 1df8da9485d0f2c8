#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "paseq/common.hpp"

namespace paseq::num {

// Dense row-major array of 64-bit floats. Rank 1 (vectors) and rank 2
// (matrices) cover everything this project needs.
struct ValueArray {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    ValueArray() = default;
    ValueArray(std::vector<std::size_t> s, std::vector<double> values)
        : shape(std::move(s)), v(std::move(values)) {
        if (expected_size() != v.size())
            throw ShapeError("ValueArray: shape/value length mismatch");
    }

    static ValueArray zeros(std::vector<std::size_t> s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return ValueArray(std::move(s), std::vector<double>(n, 0.0));
    }

    static ValueArray vec(std::vector<double> values) {
        std::vector<std::size_t> s{values.size()};
        return ValueArray(std::move(s), std::move(values));
    }

    static ValueArray scalar(double x) { return vec({x}); }

    std::size_t size() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return rank() < 2 ? 1 : shape[1]; }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    bool same_shape(const ValueArray& other) const { return shape == other.shape; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    // Throws NumericError naming `what` when a non-finite value is present.
    void ensure_finite(const std::string& what) const {
        if (!all_finite())
            throw NumericError("non-finite value in " + what);
    }

private:
    std::size_t expected_size() const {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }
};

inline std::string shape_str(const ValueArray& a) {
    std::string s = "[";
    for (std::size_t i = 0; i < a.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(a.shape[i]);
    }
    return s + "]";
}

}  // namespace paseq::num
