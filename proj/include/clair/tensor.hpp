#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "clair/rng.hpp"

namespace clair {

struct TensorNode;
using Tensor = std::shared_ptr<TensorNode>;

// A node in the dynamic computation graph. Forward ops record their parents
// and a pull-style backprop closure; backward() replays the tape in reverse
// topological order. `data` is shared so that leaf_view() can alias parameter
// storage while keeping a private gradient buffer (one graph per worker).
struct TensorNode {
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    std::vector<double> grad;  // sized lazily; accumulates until zero_grad()
    bool requires_grad = false;
    bool needs_grad = false;  // requires_grad or any parent needs it
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backprop;

    int rows() const { return shape.size() >= 1 ? shape[0] : 1; }
    int cols() const { return shape.size() >= 2 ? shape[1] : 1; }
    size_t size() const { return data->size(); }
    double& at(int r, int c) { return (*data)[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return (*data)[static_cast<size_t>(r) * cols() + c]; }
    double scalar() const { return (*data)[0]; }

    void ensure_grad() {
        if (grad.size() != data->size()) grad.assign(data->size(), 0.0);
    }
    void zero_grad() { grad.assign(data->size(), 0.0); }
};

Tensor make_tensor(std::vector<int> shape, bool requires_grad = false);
Tensor make_tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
Tensor randn_tensor(std::vector<int> shape, Rng& rng, double scale, bool requires_grad = true);

// Alias of `param`'s storage with a private gradient buffer. Used to run
// concurrent forward/backward passes over shared parameters; the caller
// reduces view grads back into the parameter in a fixed order.
Tensor leaf_view(const Tensor& param);

// Forward ops (all differentiable unless noted)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& b);       // b is [1 x n], broadcast over rows
Tensor multiply(const Tensor& a, const Tensor& b);         // elementwise
Tensor scale(const Tensor& a, double c);
Tensor gelu(const Tensor& a);
Tensor softmax(const Tensor& a, int axis = -1);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<bool>& mask);
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor sum(const Tensor& a);

void backward(const Tensor& loss);

void zero_grads(const std::vector<Tensor>& params);

std::string shape_str(const std::vector<int>& shape);

}  // namespace clair
