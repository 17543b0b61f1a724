#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

namespace lesiondet {

// Dense row-major tensor of doubles. Rank is dynamic but in practice
// 1 (vectors), 2 (matrices), or 3 (CHW feature maps). All model math is
// double precision: gradient checks against central differences need the
// headroom, and desk-scale shapes keep the cost acceptable.
struct Tensor {
    std::vector<int> dims;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> d)
        : dims(std::move(d)), v(static_cast<std::size_t>(count(dims)), 0.0) {}
    Tensor(std::vector<int> d, std::vector<double> data) : dims(std::move(d)), v(std::move(data)) {
        assert(static_cast<long>(v.size()) == count(dims));
    }

    static long count(const std::vector<int>& d) {
        long n = 1;
        for (int x : d) n *= x;
        return n;
    }

    static Tensor zeros(std::vector<int> d) { return Tensor(std::move(d)); }
    static Tensor full(std::vector<int> d, double value) {
        Tensor t(std::move(d));
        for (auto& x : t.v) x = value;
        return t;
    }
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    long size() const { return static_cast<long>(v.size()); }
    int rank() const { return static_cast<int>(dims.size()); }

    int channels() const { return dims[0]; }
    int height() const { return rank() >= 2 ? dims[1] : 1; }
    int width() const { return rank() >= 3 ? dims[2] : 1; }

    double& at(int i) { return v[static_cast<std::size_t>(i)]; }
    double at(int i) const { return v[static_cast<std::size_t>(i)]; }
    double& at(int c, int y, int x) {
        return v[(static_cast<std::size_t>(c) * dims[1] + y) * dims[2] + x];
    }
    double at(int c, int y, int x) const {
        return v[(static_cast<std::size_t>(c) * dims[1] + y) * dims[2] + x];
    }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }

    void fill(double value) {
        for (auto& x : v) x = value;
    }

    void add_scaled(const Tensor& o, double s) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += s * o.v[i];
    }
};

}  // namespace lesiondet
