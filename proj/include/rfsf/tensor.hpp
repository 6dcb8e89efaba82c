#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rfsf {

// Dense row-major tensor of 64-bit floats. Plain value type; all autodiff
// bookkeeping lives in the graph nodes, not here.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(const std::vector<int>& shape) { return Tensor(shape); }
    static Tensor full(const std::vector<int>& shape, double v);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const double& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Rank-2 accessor.
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
    const double& at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double item() const;  // value of a 1-element tensor

    void fill(double v);

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
int64_t shape_size(const std::vector<int>& shape);

}  // namespace rfsf
