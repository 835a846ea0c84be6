#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eraser/tensor.hpp"

namespace eraser::nn {

// Named parameter matrices with gradient buffers. Weights live here, outside
// any tape, so they persist across training steps. Gradient buffers are
// mutable: backward passes may accumulate into a store reached through a
// const model handle without touching the weights.
class ParamStore {
public:
    int add(std::string name, Mat w, bool trainable = true);

    int count() const { return static_cast<int>(entries_.size()); }
    Mat& weights(int id) { return entries_[id].w; }
    const Mat& weights(int id) const { return entries_[id].w; }
    Mat& grads(int id) const { return entries_[id].g; }
    const std::string& name(int id) const { return entries_[id].name; }
    bool trainable(int id) const { return entries_[id].trainable; }

    void zero_grads() const;
    size_t scalar_count() const;

    // Flat views across all parameters, in registration order. Used by the
    // optimizer and by finite-difference checks.
    double get_flat(size_t i) const;
    void set_flat(size_t i, double x);
    double grad_flat(size_t i) const;

private:
    struct Entry {
        std::string name;
        Mat w;
        mutable Mat g;
        bool trainable;
    };
    std::vector<Entry> entries_;
};

// Reverse-mode tape over Mat values. Build a graph per evaluation; call
// backward(loss) once. With grad_enabled=false the tape only runs forward
// arithmetic (same kernels, bit-identical values).
class Tape {
public:
    struct Ref {
        int i = -1;
        bool valid() const { return i >= 0; }
    };

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Ref constant(Mat m);
    Ref param(const ParamStore& store, int id);

    Ref add(Ref a, Ref b);
    Ref add_row_broadcast(Ref a, Ref bias_row);
    Ref scale(Ref a, double k);
    Ref add_scalar(Ref a, double k);
    Ref matmul(Ref a, Ref b);
    Ref matmul_nt(Ref a, Ref b);
    Ref rows(Ref a, int off, int n);
    Ref cols(Ref a, int off, int n);
    Ref relu(Ref a);
    Ref gelu(Ref a);
    Ref layer_norm(Ref x, Ref gain, Ref bias, double eps);
    Ref causal_softmax(Ref scores);
    Ref gather_rows(Ref table, std::vector<int> ids);

    // Per-target-position conditional log-probabilities, shape (n x 1).
    // Row r is log softmax(logits[r])[targets[r]].
    Ref token_log_probs(Ref logits, std::vector<int> targets);

    // Row-wise KL(softmax(logits[r]) || exp(teacher_log_probs[r])), (n x 1).
    // The teacher side is a constant; gradients flow to logits only.
    Ref kl_rows_vs_const(Ref logits, Mat teacher_log_probs);

    Ref mean_all(Ref a);

    const Mat& value(Ref r) const { return nodes_[r.i].val; }
    const Mat& grad(Ref r) const { return nodes_[r.i].grad; }

    void backward(Ref loss);

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;          // allocated lazily on first accumulation
        bool needs_grad = false;
        bool seeded = false;
        std::function<void(Tape&)> back;
    };

    Ref push(Mat val, bool needs_grad);
    void set_back(Ref r, std::function<void(Tape&)> fn);
    bool wants_grad(Ref r) const { return nodes_[r.i].needs_grad; }

    // Accumulate an upstream-gradient contribution into node r.
    void accum(Ref r, const Mat& g);
    Mat& grad_buf(Ref r);

    std::vector<Node> nodes_;
    bool grad_enabled_;
};

}  // namespace eraser::nn
