#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drdg/common.hpp"

namespace drdg {

// Canonical NCHW shape. Weights use it as (out_ch, in_ch, kh, kw).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    int64_t numel() const { return int64_t(n) * c * h * w; }
    bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

struct Tensor {
    Shape shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), v(static_cast<size_t>(s.numel()), 0.0) {}
    Tensor(Shape s, double fill) : shape(s), v(static_cast<size_t>(s.numel()), fill) {}

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, double x) { return Tensor(s, x); }
    static Tensor scalar(double x) { return Tensor(Shape{1, 1, 1, 1}, x); }

    int64_t numel() const { return shape.numel(); }

    double& at(int n, int c, int y, int x) {
        return v[((int64_t(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }
    double at(int n, int c, int y, int x) const {
        return v[((int64_t(n) * shape.c + c) * shape.h + y) * shape.w + x];
    }

    uint64_t checksum() const { return checksum_doubles(v); }
};

}  // namespace drdg
