#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/array.hpp"

namespace lswap {

class Tape;
class GradSink;

// A value flowing through a computation. Untracked values (node < 0) are
// constants: primitives applied to them compute eagerly and record nothing,
// so gradients for non-trainable inputs are never materialized.
struct Value {
    std::shared_ptr<const Array> arr;
    Tape* tape = nullptr;
    int node = -1;

    const Array& a() const { return *arr; }
    bool tracked() const { return node >= 0; }
};

Value constant(Array v);
Value constant(std::shared_ptr<const Array> v);

// Reverse-mode tape over dense arrays. Single-threaded; records primitives in
// execution order and replays them backwards exactly once per backward call.
class Tape {
  public:
    using BackFn = std::function<void(const Array& gout, GradSink& sink)>;

    // Registers a trainable leaf. Gradients are materialized only for leaves
    // registered here (and intermediates on paths to them).
    Value parameter(std::shared_ptr<const Array> v, std::string name);
    Value parameter(Array v, std::string name);

    // Records one primitive application. Exposed so tests can register custom
    // nodes (e.g. deliberately corrupted partials for negative controls).
    int record(std::vector<int> parents, BackFn back);
    Value adopt(Array out, std::vector<int> parents, BackFn back);

    // Reverse pass from a scalar root. Returns dRoot/dLeaf for each requested
    // leaf, zeros when the leaf does not influence the root. Does not mutate
    // the tape: repeated calls give identical results.
    std::vector<Array> gradients(const Value& root, const std::vector<Value>& leaves) const;

    size_t num_nodes() const { return nodes_.size(); }
    const std::string& leaf_name(int node) const;

  private:
    struct Node {
        std::vector<int> parents;
        BackFn back;
        Shape shape;
    };
    std::vector<Node> nodes_;
    std::vector<std::pair<int, std::string>> leaves_;
};

class GradSink {
  public:
    explicit GradSink(std::vector<std::unique_ptr<Array>>& grads) : grads_(grads) {}
    // Accumulates a gradient contribution into a parent slot. Ignores
    // untracked parents (id < 0).
    void add(int parent, const Shape& shape, const std::function<void(Array&)>& accumulate);
    void add_dense(int parent, const Array& contribution);

  private:
    std::vector<std::unique_ptr<Array>>& grads_;
};

// ---- primitives ------------------------------------------------------------
// Each primitive validates shapes, computes eagerly, and records its local
// partials when any input is tracked.

Value add(const Value& x, const Value& y);
Value sub(const Value& x, const Value& y);
Value mul(const Value& x, const Value& y);       // elementwise
Value scale(const Value& x, double c);
Value shift(const Value& x, double c);
Value matmul(const Value& a, const Value& b);    // (m,k)x(k,n) -> (m,n)
Value matvec(const Value& w, const Value& x);    // (m,k)x(k,) -> (m,)
Value concat(const Value& x, const Value& y);    // vectors, last axis
Value slice(const Value& x, size_t lo, size_t hi);  // vector slice [lo, hi)
Value row(const Value& m, size_t i);             // (r,c) -> (c,)
Value stack_rows(const std::vector<Value>& rows);   // L x (d,) -> (L,d)
Value reshape(const Value& x, Shape shape);
Value sigmoid(const Value& x);
Value swish(const Value& x);                     // x * sigmoid(x)
Value square(const Value& x);
Value absval(const Value& x);
Value sum(const Value& x);                       // -> scalar
Value mean(const Value& x);                      // -> scalar
Value dot(const Value& x, const Value& y);       // -> scalar
Value norm(const Value& x);                      // Euclidean -> scalar
Value div_scalar(const Value& x, const Value& s);   // array / scalar value
Value rowscale(const Value& m, const Value& v);  // row i of m times v[i]
Value rowshift(const Value& m, const Value& v);  // row i of m plus v[i]
// fused styled channel mixing: out[i,:] = sum_p mix[i,p] * f[p,:] * s[p] + h[i],
// with f (C,...) treated as C rows
Value modmix(const Value& f, const Value& mix, const Value& s, const Value& h);
Value avgpool2(const Value& x);                  // (C,H,W) -> (C,H/2,W/2)
Value upsample2(const Value& x);                 // (C,H,W) -> (C,2H,2W), bilinear

// ---- composites ------------------------------------------------------------
Value mse(const Value& x, const Value& y);       // mean((x-y)^2)
Value normalize(const Value& x);                 // x / (|x| + 1e-12)

// ---- gradient checking -----------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string where;      // "param <name>[i]" of the worst coordinate
    size_t coords_checked = 0;
    bool pass = false;
};

using ObjectiveFn = std::function<Value(const std::vector<Value>& params)>;

// Compares tape gradients of f at theta against central finite differences
// (step h, 64-bit). coords_per_param bounds the number of coordinates probed
// per parameter tensor; the probe set is drawn deterministically from
// coord_seed and always includes every tensor.
GradCheckReport grad_check(const ObjectiveFn& f, const std::vector<Array>& theta,
                           const std::vector<std::string>& names, double tol,
                           size_t coords_per_param = SIZE_MAX, uint64_t coord_seed = 0,
                           double h = 1e-5);

double relative_error(double a, double b);

}  // namespace lswap
