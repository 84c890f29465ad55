#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "psae/common.hpp"

namespace psae {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

// Dense row-major tensor with an optional gradient buffer. Handles share
// storage (shared_ptr), so ops and backward closures can capture them by
// value cheaply. T is float for training, double for gradient checking.
template <typename T>
class TensorT {
    struct Storage {
        Shape shape;
        std::vector<T> v;
        std::vector<T> g;  // empty until ensure_grad()
        bool requires_grad = false;
    };

public:
    TensorT() = default;

    static TensorT zeros(Shape shape, bool requires_grad = false) {
        TensorT t;
        t.s_ = std::make_shared<Storage>();
        for (int64_t d : shape)
            if (d <= 0) throw Error(concat("tensor: non-positive dim in shape ", shape_str(shape)));
        t.s_->shape = std::move(shape);
        t.s_->v.assign(static_cast<size_t>(numel(t.s_->shape)), T(0));
        t.s_->requires_grad = requires_grad;
        return t;
    }

    static TensorT full(Shape shape, T value, bool requires_grad = false) {
        TensorT t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.s_->v) x = value;
        return t;
    }

    static TensorT from_vector(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (static_cast<int64_t>(values.size()) != numel(shape))
            throw Error(concat("tensor: ", values.size(), " values for shape ", shape_str(shape)));
        TensorT t = zeros(std::move(shape), requires_grad);
        t.s_->v = std::move(values);
        return t;
    }

    bool defined() const { return static_cast<bool>(s_); }
    const Shape& shape() const { return check().shape; }
    int ndim() const { return static_cast<int>(check().shape.size()); }
    int64_t dim(int i) const { return check().shape.at(static_cast<size_t>(i)); }
    int64_t size() const { return numel(check().shape); }

    bool requires_grad() const { return check().requires_grad; }
    void set_requires_grad(bool rg) { check().requires_grad = rg; }

    T* data() { return check().v.data(); }
    const T* data() const { return check().v.data(); }
    std::vector<T>& vec() { return check().v; }
    const std::vector<T>& vec() const { return check().v; }

    // Value of a one-element tensor (e.g. a loss).
    T scalar() const {
        if (size() != 1) throw Error(concat("scalar() on tensor of shape ", shape_str(shape())));
        return check().v[0];
    }

    bool grad_allocated() const { return !check().g.empty(); }
    void ensure_grad() {
        auto& st = check();
        if (st.g.empty()) st.g.assign(st.v.size(), T(0));
    }
    void zero_grad() {
        auto& st = check();
        for (auto& x : st.g) x = T(0);
    }
    T* grad_data() {
        ensure_grad();
        return check().g.data();
    }
    const std::vector<T>& grad_vec() const { return check().g; }

    // Deep copy of the values (gradient buffer not copied).
    TensorT clone() const {
        TensorT t = zeros(shape(), requires_grad());
        t.vec() = vec();
        return t;
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> out(vec().size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(vec()[i]);
        return TensorT<U>::from_vector(shape(), std::move(out), requires_grad());
    }

    // Identity of the underlying storage; used by the graph to track which
    // tensors it produced.
    const void* id() const { return s_.get(); }

private:
    Storage& check() const {
        if (!s_) throw Error("use of undefined tensor");
        return *s_;
    }
    std::shared_ptr<Storage> s_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Records backward closures while ops run forward, then replays them in
// reverse. Every op that participates in differentiation pushes exactly one
// closure, so replay visits each op once — no refcounting or toposort needed
// because execution order is already topological.
template <typename T>
class GraphT {
public:
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

    void note_output(const void* tensor_id) { outputs_.insert(tensor_id); }
    bool produced(const void* tensor_id) const { return outputs_.count(tensor_id) > 0; }

    void backward(TensorT<T>& loss) {
        if (loss.size() != 1)
            throw Error(concat("backward: loss must be a scalar, got shape ", shape_str(loss.shape())));
        if (!produced(loss.id()))
            throw Error("backward: tensor was not produced by this graph (detached)");
        loss.ensure_grad();
        loss.grad_data()[0] = T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

    size_t steps() const { return steps_.size(); }

    void reset() {
        steps_.clear();
        outputs_.clear();
    }

private:
    std::vector<std::function<void()>> steps_;
    std::unordered_set<const void*> outputs_;
};

using Graph = GraphT<float>;
using GraphD = GraphT<double>;

}  // namespace psae
