#include "core/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/rng.hpp"

namespace lswap {

namespace {

Tape* tape_of(std::initializer_list<const Value*> vs) {
    Tape* t = nullptr;
    for (const Value* v : vs) {
        if (v->tracked()) {
            if (t && t != v->tape) throw ContractError("primitive: inputs belong to different tapes");
            t = v->tape;
        }
    }
    return t;
}

Value finish(Array out, Tape* t, std::vector<int> parents, Tape::BackFn back) {
    out.apply_precision();
    if (t) return t->adopt(std::move(out), std::move(parents), std::move(back));
    Value r;
    r.arr = std::make_shared<const Array>(std::move(out));
    return r;
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Lerp {
    size_t a, b;
    double fa, fb;
};

// 1-D bilinear weights for a 2x upsample with half-pixel centers and edge
// clamping: output j samples the input at 0.5*j - 0.25.
std::vector<Lerp> up2_weights(size_t n) {
    std::vector<Lerp> w(2 * n);
    for (size_t j = 0; j < 2 * n; ++j) {
        const double c = 0.5 * static_cast<double>(j) - 0.25;
        const double fl = std::floor(c);
        const double f = c - fl;
        const long i0 = static_cast<long>(fl);
        const long lim = static_cast<long>(n) - 1;
        const size_t a = static_cast<size_t>(std::clamp(i0, 0l, lim));
        const size_t b = static_cast<size_t>(std::clamp(i0 + 1, 0l, lim));
        w[j] = {a, b, 1.0 - f, f};
    }
    return w;
}

}  // namespace

Value constant(Array v) {
    Value r;
    r.arr = std::make_shared<const Array>(std::move(v));
    return r;
}

Value constant(std::shared_ptr<const Array> v) {
    Value r;
    r.arr = std::move(v);
    return r;
}

Value Tape::parameter(std::shared_ptr<const Array> v, std::string name) {
    Value r;
    r.arr = std::move(v);
    r.tape = this;
    r.node = record({}, nullptr);
    leaves_.emplace_back(r.node, std::move(name));
    return r;
}

Value Tape::parameter(Array v, std::string name) {
    return parameter(std::make_shared<const Array>(std::move(v)), std::move(name));
}

int Tape::record(std::vector<int> parents, BackFn back) {
    nodes_.push_back(Node{std::move(parents), std::move(back), {}});
    return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::adopt(Array out, std::vector<int> parents, BackFn back) {
    Value r;
    r.arr = std::make_shared<const Array>(std::move(out));
    r.tape = this;
    r.node = record(std::move(parents), std::move(back));
    nodes_.back().shape = r.arr->shape();
    return r;
}

const std::string& Tape::leaf_name(int node) const {
    for (const auto& [id, name] : leaves_) {
        if (id == node) return name;
    }
    throw ContractError("leaf_name: node " + std::to_string(node) + " is not a registered leaf");
}

void GradSink::add(int parent, const Shape& shape, const std::function<void(Array&)>& accumulate) {
    if (parent < 0) return;
    auto& slot = grads_[static_cast<size_t>(parent)];
    if (!slot) slot = std::make_unique<Array>(shape);
    accumulate(*slot);
}

void GradSink::add_dense(int parent, const Array& contribution) {
    if (parent < 0) return;
    auto& slot = grads_[static_cast<size_t>(parent)];
    if (!slot) {
        slot = std::make_unique<Array>(contribution);
        return;
    }
    Array& g = *slot;
    for (size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

std::vector<Array> Tape::gradients(const Value& root, const std::vector<Value>& leaves) const {
    if (!root.a().is_scalar()) {
        throw ContractError("backward: root must be scalar, got shape " + shape_str(root.a().shape()));
    }
    std::vector<std::unique_ptr<Array>> grads(nodes_.size());
    if (root.tracked()) {
        if (root.tape != this) throw ContractError("backward: root recorded on a different tape");
        grads[static_cast<size_t>(root.node)] = std::make_unique<Array>(Array::scalar(1.0));
        GradSink sink(grads);
        for (int i = root.node; i >= 0; --i) {
            const Node& n = nodes_[static_cast<size_t>(i)];
            if (grads[static_cast<size_t>(i)] && n.back) n.back(*grads[static_cast<size_t>(i)], sink);
        }
    }
    std::vector<Array> out;
    out.reserve(leaves.size());
    for (const Value& leaf : leaves) {
        if (leaf.tracked() && leaf.tape == this && grads[static_cast<size_t>(leaf.node)]) {
            out.push_back(*grads[static_cast<size_t>(leaf.node)]);
        } else {
            out.push_back(Array(leaf.a().shape()));
        }
    }
    return out;
}

// ---- primitives ------------------------------------------------------------

Value add(const Value& x, const Value& y) {
    check_same_shape("add", x.a(), y.a());
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] += y.a()[i];
    const int px = x.node, py = y.node;
    const Shape sh = x.a().shape();
    return finish(std::move(out), tape_of({&x, &y}), {px, py}, [px, py, sh](const Array& g, GradSink& s) {
        s.add_dense(px, g);
        s.add_dense(py, g);
        (void)sh;
    });
}

Value sub(const Value& x, const Value& y) {
    check_same_shape("sub", x.a(), y.a());
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= y.a()[i];
    const int px = x.node, py = y.node;
    const Shape sh = x.a().shape();
    return finish(std::move(out), tape_of({&x, &y}), {px, py}, [px, py, sh](const Array& g, GradSink& s) {
        s.add_dense(px, g);
        s.add(py, sh, [&](Array& gy) {
            for (size_t i = 0; i < gy.size(); ++i) gy[i] -= g[i];
        });
    });
}

Value mul(const Value& x, const Value& y) {
    check_same_shape("mul", x.a(), y.a());
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= y.a()[i];
    const int px = x.node, py = y.node;
    auto xa = x.arr, ya = y.arr;
    return finish(std::move(out), tape_of({&x, &y}), {px, py}, [px, py, xa, ya](const Array& g, GradSink& s) {
        s.add(px, xa->shape(), [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (*ya)[i];
        });
        s.add(py, ya->shape(), [&](Array& gy) {
            for (size_t i = 0; i < gy.size(); ++i) gy[i] += g[i] * (*xa)[i];
        });
    });
}

Value scale(const Value& x, double c) {
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= c;
    const int px = x.node;
    const Shape sh = x.a().shape();
    return finish(std::move(out), tape_of({&x}), {px}, [px, c, sh](const Array& g, GradSink& s) {
        s.add(px, sh, [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += c * g[i];
        });
    });
}

Value shift(const Value& x, double c) {
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] += c;
    const int px = x.node;
    return finish(std::move(out), tape_of({&x}), {px}, [px](const Array& g, GradSink& s) {
        s.add_dense(px, g);
    });
}

Value matmul(const Value& a, const Value& b) {
    const Array& A = a.a();
    const Array& B = b.a();
    if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(A.shape()) + " x " +
                             shape_str(B.shape()));
    }
    const size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Array out(Shape{m, n});
    for (size_t i = 0; i < m; ++i) {
        const double* arow = A.data() + i * k;
        double* crow = out.data() + i * n;
        for (size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = B.data() + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    const int pa = a.node, pb = b.node;
    auto Aa = a.arr, Ba = b.arr;
    return finish(std::move(out), tape_of({&a, &b}), {pa, pb},
                  [pa, pb, Aa, Ba, m, k, n](const Array& g, GradSink& s) {
                      s.add(pa, Aa->shape(), [&](Array& ga) {
                          // dA = g * B^T
                          for (size_t i = 0; i < m; ++i) {
                              const double* grow = g.data() + i * n;
                              double* garow = ga.data() + i * k;
                              for (size_t p = 0; p < k; ++p) {
                                  const double* brow = Ba->data() + p * n;
                                  double acc = 0.0;
                                  for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                  garow[p] += acc;
                              }
                          }
                      });
                      s.add(pb, Ba->shape(), [&](Array& gb) {
                          // dB = A^T * g
                          for (size_t i = 0; i < m; ++i) {
                              const double* arow = Aa->data() + i * k;
                              const double* grow = g.data() + i * n;
                              for (size_t p = 0; p < k; ++p) {
                                  const double av = arow[p];
                                  double* gbrow = gb.data() + p * n;
                                  for (size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                              }
                          }
                      });
                  });
}

Value matvec(const Value& w, const Value& x) {
    const Array& W = w.a();
    const Array& v = x.a();
    if (W.ndim() != 2 || v.ndim() != 1 || W.dim(1) != v.dim(0)) {
        throw DimensionError("matvec: incompatible shapes " + shape_str(W.shape()) + " x " +
                             shape_str(v.shape()));
    }
    const size_t m = W.dim(0), k = W.dim(1);
    Array out(Shape{m});
    for (size_t i = 0; i < m; ++i) {
        const double* wrow = W.data() + i * k;
        double acc = 0.0;
        for (size_t p = 0; p < k; ++p) acc += wrow[p] * v[p];
        out[i] = acc;
    }
    const int pw = w.node, px = x.node;
    auto Wa = w.arr, va = x.arr;
    return finish(std::move(out), tape_of({&w, &x}), {pw, px},
                  [pw, px, Wa, va, m, k](const Array& g, GradSink& s) {
                      s.add(pw, Wa->shape(), [&](Array& gw) {
                          for (size_t i = 0; i < m; ++i) {
                              const double gi = g[i];
                              double* gwrow = gw.data() + i * k;
                              for (size_t p = 0; p < k; ++p) gwrow[p] += gi * (*va)[p];
                          }
                      });
                      s.add(px, va->shape(), [&](Array& gx) {
                          for (size_t i = 0; i < m; ++i) {
                              const double gi = g[i];
                              const double* wrow = Wa->data() + i * k;
                              for (size_t p = 0; p < k; ++p) gx[p] += gi * wrow[p];
                          }
                      });
                  });
}

Value concat(const Value& x, const Value& y) {
    if (x.a().ndim() != 1 || y.a().ndim() != 1) {
        throw DimensionError("concat: expects vectors, got " + shape_str(x.a().shape()) + " and " +
                             shape_str(y.a().shape()));
    }
    const size_t nx = x.a().size(), ny = y.a().size();
    Array out(Shape{nx + ny});
    std::copy(x.a().data(), x.a().data() + nx, out.data());
    std::copy(y.a().data(), y.a().data() + ny, out.data() + nx);
    const int px = x.node, py = y.node;
    return finish(std::move(out), tape_of({&x, &y}), {px, py},
                  [px, py, nx, ny](const Array& g, GradSink& s) {
                      s.add(px, Shape{nx}, [&](Array& gx) {
                          for (size_t i = 0; i < nx; ++i) gx[i] += g[i];
                      });
                      s.add(py, Shape{ny}, [&](Array& gy) {
                          for (size_t i = 0; i < ny; ++i) gy[i] += g[nx + i];
                      });
                  });
}

Value slice(const Value& x, size_t lo, size_t hi) {
    if (x.a().ndim() != 1) throw DimensionError("slice: expects a vector, got " + shape_str(x.a().shape()));
    const size_t n = x.a().size();
    if (lo > hi || hi > n) {
        throw DimensionError("slice: range [" + std::to_string(lo) + "," + std::to_string(hi) +
                             ") out of bounds for length " + std::to_string(n));
    }
    Array out(Shape{hi - lo});
    std::copy(x.a().data() + lo, x.a().data() + hi, out.data());
    const int px = x.node;
    return finish(std::move(out), tape_of({&x}), {px}, [px, lo, n](const Array& g, GradSink& s) {
        s.add(px, Shape{n}, [&](Array& gx) {
            for (size_t i = 0; i < g.size(); ++i) gx[lo + i] += g[i];
        });
    });
}

Value row(const Value& m, size_t i) {
    const Array& M = m.a();
    if (M.ndim() != 2) throw DimensionError("row: expects a matrix, got " + shape_str(M.shape()));
    if (i >= M.dim(0)) {
        throw DimensionError("row: index " + std::to_string(i) + " out of range for " + shape_str(M.shape()));
    }
    const size_t c = M.dim(1);
    Array out(Shape{c});
    std::copy(M.data() + i * c, M.data() + (i + 1) * c, out.data());
    const int pm = m.node;
    const Shape sh = M.shape();
    return finish(std::move(out), tape_of({&m}), {pm}, [pm, i, c, sh](const Array& g, GradSink& s) {
        s.add(pm, sh, [&](Array& gm) {
            for (size_t j = 0; j < c; ++j) gm[i * c + j] += g[j];
        });
    });
}

Value stack_rows(const std::vector<Value>& rows) {
    if (rows.empty()) throw DimensionError("stack_rows: no rows");
    const size_t d = rows[0].a().size();
    for (const Value& r : rows) {
        if (r.a().ndim() != 1 || r.a().size() != d) {
            throw DimensionError("stack_rows: rows must be equal-length vectors");
        }
    }
    const size_t L = rows.size();
    Array out(Shape{L, d});
    std::vector<int> parents(L);
    Tape* t = nullptr;
    for (size_t i = 0; i < L; ++i) {
        std::copy(rows[i].a().data(), rows[i].a().data() + d, out.data() + i * d);
        parents[i] = rows[i].node;
        if (rows[i].tracked()) t = rows[i].tape;
    }
    auto ps = parents;
    return finish(std::move(out), t, std::move(parents), [ps, d](const Array& g, GradSink& s) {
        for (size_t i = 0; i < ps.size(); ++i) {
            s.add(ps[i], Shape{d}, [&](Array& gr) {
                for (size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
            });
        }
    });
}

Value reshape(const Value& x, Shape shape) {
    if (shape_size(shape) != x.a().size()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.a().shape()) + " as " + shape_str(shape));
    }
    Array out(shape, std::vector<double>(x.a().data(), x.a().data() + x.a().size()));
    const int px = x.node;
    const Shape orig = x.a().shape();
    return finish(std::move(out), tape_of({&x}), {px}, [px, orig](const Array& g, GradSink& s) {
        s.add(px, orig, [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
        });
    });
}

Value sigmoid(const Value& x) {
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
    const int px = x.node;
    Tape* t = tape_of({&x});
    // the forward sigmoid values feed the backward rule, so keep them
    std::shared_ptr<Array> sv;
    if (t) sv = std::make_shared<Array>(out);
    return finish(std::move(out), t, {px}, [px, sv](const Array& g, GradSink& s) {
        s.add(px, sv->shape(), [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (*sv)[i] * (1.0 - (*sv)[i]);
        });
    });
}

Value swish(const Value& x) {
    const size_t n = x.a().size();
    Tape* t = tape_of({&x});
    Array out(x.a().shape());
    std::shared_ptr<Array> sv;  // sigmoid values, kept for the backward rule
    if (t) {
        sv = std::make_shared<Array>(x.a().shape());
        for (size_t i = 0; i < n; ++i) {
            const double s = sigmoid_scalar(x.a()[i]);
            (*sv)[i] = s;
            out[i] = x.a()[i] * s;
        }
    } else {
        for (size_t i = 0; i < n; ++i) out[i] = x.a()[i] * sigmoid_scalar(x.a()[i]);
    }
    const int px = x.node;
    auto xa = x.arr;
    return finish(std::move(out), t, {px}, [px, xa, sv](const Array& g, GradSink& s) {
        s.add(px, xa->shape(), [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) {
                const double svi = (*sv)[i];
                gx[i] += g[i] * (svi + (*xa)[i] * svi * (1.0 - svi));
            }
        });
    });
}

Value square(const Value& x) {
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
    const int px = x.node;
    auto xa = x.arr;
    return finish(std::move(out), tape_of({&x}), {px}, [px, xa](const Array& g, GradSink& s) {
        s.add(px, xa->shape(), [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * (*xa)[i] * g[i];
        });
    });
}

Value absval(const Value& x) {
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    const int px = x.node;
    auto xa = x.arr;
    return finish(std::move(out), tape_of({&x}), {px}, [px, xa](const Array& g, GradSink& s) {
        s.add(px, xa->shape(), [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) {
                const double xv = (*xa)[i];
                const double sign = xv > 0.0 ? 1.0 : (xv < 0.0 ? -1.0 : 0.0);
                gx[i] += sign * g[i];
            }
        });
    });
}

Value sum(const Value& x) {
    double acc = 0.0;
    for (size_t i = 0; i < x.a().size(); ++i) acc += x.a()[i];
    const int px = x.node;
    const Shape sh = x.a().shape();
    return finish(Array::scalar(acc), tape_of({&x}), {px}, [px, sh](const Array& g, GradSink& s) {
        const double gv = g[0];
        s.add(px, sh, [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
        });
    });
}

Value mean(const Value& x) {
    if (x.a().size() == 0) throw DimensionError("mean: empty array");
    double acc = 0.0;
    for (size_t i = 0; i < x.a().size(); ++i) acc += x.a()[i];
    const double inv = 1.0 / static_cast<double>(x.a().size());
    const int px = x.node;
    const Shape sh = x.a().shape();
    return finish(Array::scalar(acc * inv), tape_of({&x}), {px}, [px, sh, inv](const Array& g, GradSink& s) {
        const double gv = g[0] * inv;
        s.add(px, sh, [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
        });
    });
}

Value dot(const Value& x, const Value& y) {
    check_same_shape("dot", x.a(), y.a());
    double acc = 0.0;
    for (size_t i = 0; i < x.a().size(); ++i) acc += x.a()[i] * y.a()[i];
    const int px = x.node, py = y.node;
    auto xa = x.arr, ya = y.arr;
    return finish(Array::scalar(acc), tape_of({&x, &y}), {px, py}, [px, py, xa, ya](const Array& g, GradSink& s) {
        const double gv = g[0];
        s.add(px, xa->shape(), [&](Array& gx) {
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += gv * (*ya)[i];
        });
        s.add(py, ya->shape(), [&](Array& gy) {
            for (size_t i = 0; i < gy.size(); ++i) gy[i] += gv * (*xa)[i];
        });
    });
}

Value norm(const Value& x) {
    double acc = 0.0;
    for (size_t i = 0; i < x.a().size(); ++i) acc += x.a()[i] * x.a()[i];
    const double n = std::sqrt(acc);
    const int px = x.node;
    auto xa = x.arr;
    return finish(Array::scalar(n), tape_of({&x}), {px}, [px, xa, n](const Array& g, GradSink& s) {
        const double gv = g[0];
        s.add(px, xa->shape(), [&](Array& gx) {
            if (n == 0.0) return;  // subgradient 0 at the origin
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += gv * (*xa)[i] / n;
        });
    });
}

Value div_scalar(const Value& x, const Value& s) {
    if (!s.a().is_scalar()) throw DimensionError("div_scalar: divisor must be scalar");
    const double sv = s.a().scalar_value();
    Array out = x.a();
    for (size_t i = 0; i < out.size(); ++i) out[i] /= sv;
    const int px = x.node, ps = s.node;
    auto xa = x.arr;
    return finish(std::move(out), tape_of({&x, &s}), {px, ps},
                  [px, ps, xa, sv](const Array& g, GradSink& sink) {
                      sink.add(px, xa->shape(), [&](Array& gx) {
                          for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] / sv;
                      });
                      sink.add(ps, Shape{}, [&](Array& gs) {
                          double acc = 0.0;
                          for (size_t i = 0; i < xa->size(); ++i) acc += g[i] * (*xa)[i];
                          gs[0] -= acc / (sv * sv);
                      });
                  });
}

Value rowscale(const Value& m, const Value& v) {
    const Array& M = m.a();
    const Array& V = v.a();
    if (M.ndim() != 2 || V.ndim() != 1 || M.dim(0) != V.dim(0)) {
        throw DimensionError("rowscale: incompatible shapes " + shape_str(M.shape()) + " and " +
                             shape_str(V.shape()));
    }
    const size_t r = M.dim(0), c = M.dim(1);
    Array out = M;
    for (size_t i = 0; i < r; ++i) {
        double* orow = out.data() + i * c;
        for (size_t j = 0; j < c; ++j) orow[j] *= V[i];
    }
    const int pm = m.node, pv = v.node;
    auto Ma = m.arr, Va = v.arr;
    return finish(std::move(out), tape_of({&m, &v}), {pm, pv},
                  [pm, pv, Ma, Va, r, c](const Array& g, GradSink& s) {
                      s.add(pm, Ma->shape(), [&](Array& gm) {
                          for (size_t i = 0; i < r; ++i) {
                              const double vi = (*Va)[i];
                              for (size_t j = 0; j < c; ++j) gm[i * c + j] += g[i * c + j] * vi;
                          }
                      });
                      s.add(pv, Va->shape(), [&](Array& gv) {
                          for (size_t i = 0; i < r; ++i) {
                              double acc = 0.0;
                              for (size_t j = 0; j < c; ++j) acc += g[i * c + j] * (*Ma)[i * c + j];
                              gv[i] += acc;
                          }
                      });
                  });
}

Value rowshift(const Value& m, const Value& v) {
    const Array& M = m.a();
    const Array& V = v.a();
    if (M.ndim() != 2 || V.ndim() != 1 || M.dim(0) != V.dim(0)) {
        throw DimensionError("rowshift: incompatible shapes " + shape_str(M.shape()) + " and " +
                             shape_str(V.shape()));
    }
    const size_t r = M.dim(0), c = M.dim(1);
    Array out = M;
    for (size_t i = 0; i < r; ++i) {
        double* orow = out.data() + i * c;
        for (size_t j = 0; j < c; ++j) orow[j] += V[i];
    }
    const int pm = m.node, pv = v.node;
    const Shape msh = M.shape(), vsh = V.shape();
    return finish(std::move(out), tape_of({&m, &v}), {pm, pv},
                  [pm, pv, msh, vsh, r, c](const Array& g, GradSink& s) {
                      s.add(pm, msh, [&](Array& gm) {
                          for (size_t i = 0; i < gm.size(); ++i) gm[i] += g[i];
                      });
                      s.add(pv, vsh, [&](Array& gv) {
                          for (size_t i = 0; i < r; ++i) {
                              double acc = 0.0;
                              for (size_t j = 0; j < c; ++j) acc += g[i * c + j];
                              gv[i] += acc;
                          }
                      });
                  });
}

Value modmix(const Value& f, const Value& mix, const Value& s, const Value& h) {
    const Array& F = f.a();
    const Array& M = mix.a();
    if (F.ndim() < 2 || M.ndim() != 2) throw DimensionError("modmix: expects (C,...) features and (C,C) mixer");
    const size_t C = F.dim(0);
    const size_t N = F.size() / C;
    if (M.dim(0) != C || M.dim(1) != C || s.a().ndim() != 1 || s.a().size() != C || h.a().ndim() != 1 ||
        h.a().size() != C) {
        throw DimensionError("modmix: incompatible shapes " + shape_str(F.shape()) + ", " +
                             shape_str(M.shape()) + ", " + shape_str(s.a().shape()) + ", " +
                             shape_str(h.a().shape()));
    }
    Array out(F.shape());
    {
        // out = M * (F rowscaled by s) + h per row
        std::vector<double> scaled(N);
        for (size_t p = 0; p < C; ++p) {
            const double sp = s.a()[p];
            const double* frow = F.data() + p * N;
            for (size_t j = 0; j < N; ++j) scaled[j] = frow[j] * sp;
            for (size_t i = 0; i < C; ++i) {
                const double mip = M[i * C + p];
                double* orow = out.data() + i * N;
                for (size_t j = 0; j < N; ++j) orow[j] += mip * scaled[j];
            }
        }
        for (size_t i = 0; i < C; ++i) {
            const double hi = h.a()[i];
            double* orow = out.data() + i * N;
            for (size_t j = 0; j < N; ++j) orow[j] += hi;
        }
    }
    const int pf = f.node, pm = mix.node, ps = s.node, ph = h.node;
    auto Fa = f.arr, Ma = mix.arr, Sa = s.arr;
    return finish(std::move(out), tape_of({&f, &mix, &s, &h}), {pf, pm, ps, ph},
                  [pf, pm, ps, ph, Fa, Ma, Sa, C, N](const Array& g, GradSink& sink) {
                      // t = M^T g, shared by the f and s partials
                      Array t(Shape{C, N});
                      for (size_t i = 0; i < C; ++i) {
                          const double* grow = g.data() + i * N;
                          for (size_t p = 0; p < C; ++p) {
                              const double mip = (*Ma)[i * C + p];
                              double* trow = t.data() + p * N;
                              for (size_t j = 0; j < N; ++j) trow[j] += mip * grow[j];
                          }
                      }
                      sink.add(pf, Fa->shape(), [&](Array& gf) {
                          for (size_t p = 0; p < C; ++p) {
                              const double sp = (*Sa)[p];
                              const double* trow = t.data() + p * N;
                              double* grow = gf.data() + p * N;
                              for (size_t j = 0; j < N; ++j) grow[j] += trow[j] * sp;
                          }
                      });
                      sink.add(pm, Ma->shape(), [&](Array& gm) {
                          for (size_t i = 0; i < C; ++i) {
                              const double* grow = g.data() + i * N;
                              for (size_t p = 0; p < C; ++p) {
                                  const double sp = (*Sa)[p];
                                  const double* frow = Fa->data() + p * N;
                                  double acc = 0.0;
                                  for (size_t j = 0; j < N; ++j) acc += grow[j] * frow[j];
                                  gm[i * C + p] += acc * sp;
                              }
                          }
                      });
                      sink.add(ps, Sa->shape(), [&](Array& gs) {
                          for (size_t p = 0; p < C; ++p) {
                              const double* trow = t.data() + p * N;
                              const double* frow = Fa->data() + p * N;
                              double acc = 0.0;
                              for (size_t j = 0; j < N; ++j) acc += trow[j] * frow[j];
                              gs[p] += acc;
                          }
                      });
                      sink.add(ph, Shape{C}, [&](Array& gh) {
                          for (size_t i = 0; i < C; ++i) {
                              const double* grow = g.data() + i * N;
                              double acc = 0.0;
                              for (size_t j = 0; j < N; ++j) acc += grow[j];
                              gh[i] += acc;
                          }
                      });
                  });
}

Value avgpool2(const Value& x) {
    const Array& X = x.a();
    if (X.ndim() != 3 || X.dim(1) % 2 != 0 || X.dim(2) % 2 != 0) {
        throw DimensionError("avgpool2: expects (C,H,W) with even H,W, got " + shape_str(X.shape()));
    }
    const size_t C = X.dim(0), H = X.dim(1), W = X.dim(2);
    const size_t h = H / 2, w = W / 2;
    Array out(Shape{C, h, w});
    for (size_t ch = 0; ch < C; ++ch) {
        const double* in = X.data() + ch * H * W;
        double* op = out.data() + ch * h * w;
        for (size_t i = 0; i < h; ++i) {
            for (size_t j = 0; j < w; ++j) {
                op[i * w + j] = 0.25 * (in[(2 * i) * W + 2 * j] + in[(2 * i) * W + 2 * j + 1] +
                                        in[(2 * i + 1) * W + 2 * j] + in[(2 * i + 1) * W + 2 * j + 1]);
            }
        }
    }
    const int px = x.node;
    const Shape sh = X.shape();
    return finish(std::move(out), tape_of({&x}), {px}, [px, sh, C, H, W](const Array& g, GradSink& s) {
        s.add(px, sh, [&](Array& gx) {
            const size_t h = H / 2, w = W / 2;
            for (size_t ch = 0; ch < C; ++ch) {
                const double* gp = g.data() + ch * h * w;
                double* gi = gx.data() + ch * H * W;
                for (size_t i = 0; i < h; ++i) {
                    for (size_t j = 0; j < w; ++j) {
                        const double gv = 0.25 * gp[i * w + j];
                        gi[(2 * i) * W + 2 * j] += gv;
                        gi[(2 * i) * W + 2 * j + 1] += gv;
                        gi[(2 * i + 1) * W + 2 * j] += gv;
                        gi[(2 * i + 1) * W + 2 * j + 1] += gv;
                    }
                }
            }
        });
    });
}

Value upsample2(const Value& x) {
    const Array& X = x.a();
    if (X.ndim() != 3) throw DimensionError("upsample2: expects (C,H,W), got " + shape_str(X.shape()));
    const size_t C = X.dim(0), H = X.dim(1), W = X.dim(2);
    const auto wh = up2_weights(H);
    const auto ww = up2_weights(W);
    Array out(Shape{C, 2 * H, 2 * W});
    for (size_t ch = 0; ch < C; ++ch) {
        const double* in = X.data() + ch * H * W;
        double* op = out.data() + ch * 4 * H * W;
        for (size_t i = 0; i < 2 * H; ++i) {
            const Lerp& li = wh[i];
            for (size_t j = 0; j < 2 * W; ++j) {
                const Lerp& lj = ww[j];
                op[i * 2 * W + j] = li.fa * (lj.fa * in[li.a * W + lj.a] + lj.fb * in[li.a * W + lj.b]) +
                                    li.fb * (lj.fa * in[li.b * W + lj.a] + lj.fb * in[li.b * W + lj.b]);
            }
        }
    }
    const int px = x.node;
    const Shape sh = X.shape();
    return finish(std::move(out), tape_of({&x}), {px}, [px, sh, C, H, W](const Array& g, GradSink& s) {
        s.add(px, sh, [&](Array& gx) {
            const auto wh = up2_weights(H);
            const auto ww = up2_weights(W);
            for (size_t ch = 0; ch < C; ++ch) {
                const double* gp = g.data() + ch * 4 * H * W;
                double* gi = gx.data() + ch * H * W;
                for (size_t i = 0; i < 2 * H; ++i) {
                    const Lerp& li = wh[i];
                    for (size_t j = 0; j < 2 * W; ++j) {
                        const Lerp& lj = ww[j];
                        const double gv = gp[i * 2 * W + j];
                        gi[li.a * W + lj.a] += li.fa * lj.fa * gv;
                        gi[li.a * W + lj.b] += li.fa * lj.fb * gv;
                        gi[li.b * W + lj.a] += li.fb * lj.fa * gv;
                        gi[li.b * W + lj.b] += li.fb * lj.fb * gv;
                    }
                }
            }
        });
    });
}

// ---- composites ------------------------------------------------------------

Value mse(const Value& x, const Value& y) { return mean(square(sub(x, y))); }

Value normalize(const Value& x) { return div_scalar(x, shift(norm(x), 1e-12)); }

// ---- gradient checking -----------------------------------------------------

double relative_error(double a, double b) {
    const double denom = std::max(1e-8, std::fabs(a) + std::fabs(b));
    return std::fabs(a - b) / denom;
}

GradCheckReport grad_check(const ObjectiveFn& f, const std::vector<Array>& theta,
                           const std::vector<std::string>& names, double tol,
                           size_t coords_per_param, uint64_t coord_seed, double h) {
    if (names.size() != theta.size()) throw ContractError("grad_check: names/theta size mismatch");

    Tape tape;
    std::vector<Value> params;
    params.reserve(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) params.push_back(tape.parameter(theta[i], names[i]));
    Value root = f(params);
    if (!root.a().is_scalar()) throw ContractError("grad_check: objective must return a scalar");
    const std::vector<Array> grads = tape.gradients(root, params);

    std::vector<Array> work = theta;
    auto eval = [&]() -> double {
        std::vector<Value> ps;
        ps.reserve(work.size());
        for (const Array& a : work) ps.push_back(constant(a));
        return f(ps).a().scalar_value();
    };

    GradCheckReport rep;
    // Central differences cannot resolve derivatives below the cancellation
    // noise of the objective itself; coordinates whose gradient magnitude sits
    // under that floor are held to an absolute tolerance instead.
    const double f0 = eval();
    const double atol = 1e-13 * std::max(1.0, std::fabs(f0)) / h;
    const double denom_floor = 4.0 * atol / tol;
    Rng rng(splitmix64(coord_seed ^ 0x9d2c5680u));
    for (size_t pi = 0; pi < theta.size(); ++pi) {
        const size_t n = theta[pi].size();
        std::vector<size_t> coords;
        if (n <= coords_per_param) {
            coords.resize(n);
            std::iota(coords.begin(), coords.end(), 0);
        } else {
            std::vector<size_t> all(n);
            std::iota(all.begin(), all.end(), 0);
            for (size_t t = 0; t < coords_per_param; ++t) {
                const size_t j = t + static_cast<size_t>(rng.next_u64() % (n - t));
                std::swap(all[t], all[j]);
                coords.push_back(all[t]);
            }
        }
        for (size_t c : coords) {
            const double orig = work[pi][c];
            work[pi][c] = orig + h;
            const double fp = eval();
            work[pi][c] = orig - h;
            const double fm = eval();
            work[pi][c] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double g = grads[pi][c];
            const double rel = std::fabs(g - fd) / std::max(denom_floor, std::fabs(g) + std::fabs(fd));
            ++rep.coords_checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.where = "param " + names[pi] + "[" + std::to_string(c) + "]";
            }
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace lswap
