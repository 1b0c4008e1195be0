#pragma once

#include <functional>
#include <vector>

#include "subjgen/tensor.hpp"

namespace subjgen::ad {

// Handle into a Tape.
struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

// Records forward primitive applications in topological order and replays
// them in reverse to accumulate gradients. One backward sweep per tape.
// Parameter leaves write their gradients into the owning Parameter.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // leaves
    Var input(Tensor t);                       // constant w.r.t. gradients
    Var param(Parameter& p);                   // gradient sink: p.grad
    Var zeros(std::vector<int> shape) { return input(Tensor::zeros(std::move(shape))); }

    // elementwise (any shape)
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double k);
    Var neg(Var a) { return scale(a, -1.0); }
    Var relu(Var a);
    Var tanh_(Var a);
    Var sigmoid_(Var a);
    Var log_(Var a);       // argument clamped below at 1e-300
    Var square(Var a);

    // scalar-vector
    Var smul(Var scalar, Var x);               // scalar * x

    // reductions, structure
    Var sum(Var a);
    Var mean(Var a);
    Var dot(Var a, Var b);
    Var pick(Var a, int index);                // element as scalar
    Var concat(const std::vector<Var>& xs);    // 1-D concatenation
    Var slice(Var a, int from, int len);       // 1-D slice
    Var stack_rows(const std::vector<Var>& rows);  // T vectors [n] -> [T,n]
    Var row(Var m, int r);                     // row of [T,n] as [n]

    // linear maps
    Var matvec(Var w, Var x);                  // [m,n]*[n] -> [m]
    Var vecmat(Var v, Var m);                  // [t]*[t,n] -> [n]
    Var affine(Var w, Var x, Var b);           // matvec + bias
    Var matmul_nt(Var a, Var b);               // [p,k]*[q,k] -> [p,q] = A*B^T
    Var add_rowvec(Var m, Var v);              // [t,n] + broadcast [n]

    // nn primitives
    Var embedding(Var table, std::vector<int> ids);             // [T,e]
    Var conv1d(Var seq, Var filters, Var bias, int window);     // [T,e],[f,w*e],[f] -> [T-w+1,f]
    Var max_over_time(Var m);                                   // [T,f] -> [f]
    Var softmax(Var logits);                                    // 1-D
    Var masked_softmax(Var logits, std::vector<bool> allowed);  // exact zeros on masked slots
    Var log_softmax(Var logits);
    // gates [4H,I+H], bias [4H]; returns [h';c'] concatenated as [2H]
    Var lstm_cell(Var w, Var b, Var x, Var h, Var c);
    // sums weights over positions sharing a group id: out[g] = sum_{i: gid[i]=g} w[i]
    Var group_sum(Var w, std::vector<int> group_ids, int n_groups);

    const Tensor& val(Var v) const { return recs_[static_cast<size_t>(v.i)].value; }
    const Tensor& grad(Var v) const { return recs_[static_cast<size_t>(v.i)].grad; }
    Tensor& grad_mut(Var v) { return recs_[static_cast<size_t>(v.i)].grad; }

    // Reverse sweep from a scalar. Parameters touched by the graph receive
    // accumulated gradients; everything else gets zero.
    void backward(Var loss);

    size_t size() const { return recs_.size(); }

private:
    struct Record {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back;  // null for input leaves
        Parameter* sink = nullptr;
        const char* op = "leaf";
    };
    std::vector<Record> recs_;

    Var push(Tensor value, const char* op, std::function<void(Tape&)> back);
    const Tensor& v_(int i) const { return recs_[static_cast<size_t>(i)].value; }
    Tensor& g_(int i) { return recs_[static_cast<size_t>(i)].grad; }
    static void require(bool ok, const char* op, const std::string& detail);
};

}  // namespace subjgen::ad
