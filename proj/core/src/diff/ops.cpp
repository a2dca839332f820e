#include "metaood/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metaood/error.hpp"

namespace metaood::diff {

namespace {

enum class Broadcast { same, left_scalar, right_scalar };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
    if (a.shape() == b.shape()) return Broadcast::same;
    if (a.size() == 1) return Broadcast::left_scalar;
    if (b.size() == 1) return Broadcast::right_scalar;
    throw DimensionError(std::string(op) + ": incompatible shapes " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
}

// Elementwise binary op with scalar broadcasting. `f` computes the value, `dfa`
// and `dfb` the partials given (a, b).
template <typename F, typename DA, typename DB>
Var binary(const char* op, const Var& a, const Var& b, F f, DA dfa, DB dfb) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const Broadcast kind = broadcast_kind(av, bv, op);
    const Shape out_shape = kind == Broadcast::left_scalar ? bv.shape() : av.shape();
    Matrix out(out_shape.rows, out_shape.cols);
    const std::size_t n = out.size();
    const bool a_scalar = kind == Broadcast::left_scalar;
    const bool b_scalar = kind == Broadcast::right_scalar;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = f(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i]);
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record(op, std::move(out), {a, b},
                            [ia, ib, a_scalar, b_scalar, n, dfa, dfb](Tape& t, std::size_t self) {
                                const Matrix& g = t.grad(self);
                                const Matrix& av = t.value(ia);
                                const Matrix& bv = t.value(ib);
                                if (t.requires_grad(ia)) {
                                    Matrix ga(av.rows(), av.cols());
                                    for (std::size_t i = 0; i < n; ++i) {
                                        const double x = av[a_scalar ? 0 : i];
                                        const double y = bv[b_scalar ? 0 : i];
                                        ga[a_scalar ? 0 : i] += g[i] * dfa(x, y);
                                    }
                                    t.accumulate(ia, ga);
                                }
                                if (t.requires_grad(ib)) {
                                    Matrix gb(bv.rows(), bv.cols());
                                    for (std::size_t i = 0; i < n; ++i) {
                                        const double x = av[a_scalar ? 0 : i];
                                        const double y = bv[b_scalar ? 0 : i];
                                        gb[b_scalar ? 0 : i] += g[i] * dfb(x, y);
                                    }
                                    t.accumulate(ib, gb);
                                }
                            });
}

// Elementwise unary op; `df(x, y)` is the derivative given input x and output y.
template <typename F, typename DF>
Var unary(const char* op, const Var& x, F f, DF df) {
    const Matrix& xv = x.value();
    Matrix out(xv.rows(), xv.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
    const std::size_t ix = x.id();
    return x.tape()->record(op, std::move(out), {x}, [ix, df](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& xv = t.value(ix);
        const Matrix& yv = t.value(self);
        Matrix gx(xv.rows(), xv.cols());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[i] * df(xv[i], yv[i]);
        t.accumulate(ix, gx);
    });
}

struct Groups {
    std::size_t count;
    std::size_t length;
    Shape out;
    std::size_t cols;
    Axis axis;

    std::size_t index(std::size_t group, std::size_t j) const {
        switch (axis) {
            case Axis::over_rows: return j * cols + group;
            case Axis::over_cols: return group * cols + j;
            case Axis::all: break;
        }
        return j;
    }
};

Groups groups_for(const Matrix& x, Axis axis, const char* op) {
    Groups g{};
    g.cols = x.cols();
    g.axis = axis;
    switch (axis) {
        case Axis::over_rows: g = {x.cols(), x.rows(), {1, x.cols()}, x.cols(), axis}; break;
        case Axis::over_cols: g = {x.rows(), x.cols(), {x.rows(), 1}, x.cols(), axis}; break;
        case Axis::all: g = {1, x.size(), {1, 1}, x.cols(), axis}; break;
    }
    if (g.length == 0) {
        throw DimensionError(std::string(op) + ": empty reduction axis");
    }
    return g;
}

Matrix lower_triangle(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j) out(i, j) = 0.0;
    return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    Matrix out = diff::matmul(a.value(), b.value());
    const std::size_t ia = a.id(), ib = b.id();
    return a.tape()->record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ia)) t.accumulate(ia, matmul_nt(g, t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, matmul_tn(t.value(ia), g));
    });
}

Var add(const Var& a, const Var& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var relu(const Var& x) {
    return unary(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
    return unary(
        "sigmoid", x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
    return unary(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
    for (double v : x.value().data()) {
        if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
    }
    return unary(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var sqrt(const Var& x) {
    for (double v : x.value().data()) {
        if (v < 0.0) throw DomainError("sqrt: negative input " + std::to_string(v));
    }
    return unary(
        "sqrt", x, [](double v) { return std::sqrt(v); },
        [](double, double y) { return 0.5 / y; });
}

Var square(const Var& x) {
    return unary(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var reciprocal(const Var& x) {
    for (double v : x.value().data()) {
        if (v == 0.0) throw DomainError("reciprocal: zero input");
    }
    return unary(
        "reciprocal", x, [](double v) { return 1.0 / v; },
        [](double, double y) { return -y * y; });
}

Var scale(const Var& x, double s) {
    return unary(
        "scale", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& x, double c) {
    return unary(
        "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var clamp_min(const Var& x, double floor) {
    return unary(
        "clamp_min", x, [floor](double v) { return v < floor ? floor : v; },
        [floor](double v, double) { return v < floor ? 0.0 : 1.0; });
}

Var sum(const Var& x, Axis axis) {
    const Matrix& xv = x.value();
    const Groups grp = groups_for(xv, axis, "sum");
    Matrix out(grp.out.rows, grp.out.cols);
    for (std::size_t g = 0; g < grp.count; ++g) {
        double acc = 0.0;
        for (std::size_t j = 0; j < grp.length; ++j) acc += xv[grp.index(g, j)];
        out[g] = acc;
    }
    const std::size_t ix = x.id();
    return x.tape()->record("sum", std::move(out), {x}, [ix, grp](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& xv = t.value(ix);
        Matrix gx(xv.rows(), xv.cols());
        for (std::size_t k = 0; k < grp.count; ++k)
            for (std::size_t j = 0; j < grp.length; ++j) gx[grp.index(k, j)] = g[k];
        t.accumulate(ix, gx);
    });
}

Var mean(const Var& x, Axis axis) {
    const Groups grp = groups_for(x.value(), axis, "mean");
    return scale(sum(x, axis), 1.0 / static_cast<double>(grp.length));
}

Var logsumexp(const Var& x, Axis axis) {
    const Matrix& xv = x.value();
    const Groups grp = groups_for(xv, axis, "logsumexp");
    Matrix out(grp.out.rows, grp.out.cols);
    for (std::size_t g = 0; g < grp.count; ++g) {
        double m = xv[grp.index(g, 0)];
        for (std::size_t j = 1; j < grp.length; ++j) m = std::max(m, xv[grp.index(g, j)]);
        double acc = 0.0;
        for (std::size_t j = 0; j < grp.length; ++j) acc += std::exp(xv[grp.index(g, j)] - m);
        out[g] = m + std::log(acc);
    }
    const std::size_t ix = x.id();
    return x.tape()->record("logsumexp", std::move(out), {x}, [ix, grp](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        const Matrix& xv = t.value(ix);
        Matrix gx(xv.rows(), xv.cols());
        for (std::size_t k = 0; k < grp.count; ++k) {
            for (std::size_t j = 0; j < grp.length; ++j) {
                const std::size_t i = grp.index(k, j);
                gx[i] = g[k] * std::exp(xv[i] - y[k]);
            }
        }
        t.accumulate(ix, gx);
    });
}

Var max(const Var& x, Axis axis) {
    const Matrix& xv = x.value();
    const Groups grp = groups_for(xv, axis, "max");
    Matrix out(grp.out.rows, grp.out.cols);
    std::vector<std::size_t> argmax(grp.count);
    for (std::size_t g = 0; g < grp.count; ++g) {
        std::size_t best = grp.index(g, 0);
        for (std::size_t j = 1; j < grp.length; ++j) {
            const std::size_t i = grp.index(g, j);
            if (xv[i] > xv[best]) best = i;
        }
        argmax[g] = best;
        out[g] = xv[best];
    }
    const std::size_t ix = x.id();
    return x.tape()->record("max", std::move(out), {x},
                            [ix, argmax = std::move(argmax)](Tape& t, std::size_t self) {
                                const Matrix& g = t.grad(self);
                                const Matrix& xv = t.value(ix);
                                Matrix gx(xv.rows(), xv.cols());
                                for (std::size_t k = 0; k < argmax.size(); ++k) gx[argmax[k]] += g[k];
                                t.accumulate(ix, gx);
                            });
}

Var transpose(const Var& x) {
    const std::size_t ix = x.id();
    return x.tape()->record("transpose", x.value().transpose(), {x},
                            [ix](Tape& t, std::size_t self) {
                                t.accumulate(ix, t.grad(self).transpose());
                            });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
    const Matrix& xv = x.value();
    Matrix out(rows.size(), xv.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] >= xv.rows()) throw DimensionError("gather_rows: row index out of range");
        std::copy_n(&xv(rows[r], 0), xv.cols(), &out(r, 0));
    }
    const std::size_t ix = x.id();
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return x.tape()->record("gather_rows", std::move(out), {x},
                            [ix, idx = std::move(idx)](Tape& t, std::size_t self) {
                                const Matrix& g = t.grad(self);
                                const Matrix& xv = t.value(ix);
                                Matrix gx(xv.rows(), xv.cols());
                                for (std::size_t r = 0; r < idx.size(); ++r)
                                    for (std::size_t c = 0; c < g.cols(); ++c) gx(idx[r], c) += g(r, c);
                                t.accumulate(ix, gx);
                            });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t cols = parts.front().value().cols();
    std::size_t rows = 0;
    for (const Var& p : parts) {
        if (p.value().cols() != cols) throw DimensionError("concat_rows: column counts differ");
        rows += p.value().rows();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    for (const Var& p : parts) {
        std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + offset * cols);
        ids.push_back(p.id());
        offsets.push_back(offset);
        offset += p.value().rows();
    }
    return parts.front().tape()->record(
        "concat_rows", std::move(out), parts,
        [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, std::size_t self) {
            const Matrix& g = t.grad(self);
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (!t.requires_grad(ids[k])) continue;
                const Matrix& pv = t.value(ids[k]);
                Matrix gp(pv.rows(), pv.cols());
                std::copy_n(g.data().begin() + offsets[k] * g.cols(), gp.size(), gp.data().begin());
                t.accumulate(ids[k], gp);
            }
        });
}

Var diagonal(const Var& m) {
    const Matrix& mv = m.value();
    if (mv.rows() != mv.cols()) throw DimensionError("diagonal: matrix is not square");
    Matrix out(mv.rows(), 1);
    for (std::size_t i = 0; i < mv.rows(); ++i) out[i] = mv(i, i);
    const std::size_t im = m.id();
    return m.tape()->record("diagonal", std::move(out), {m}, [im](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix gm(g.rows(), g.rows());
        for (std::size_t i = 0; i < g.rows(); ++i) gm(i, i) = g[i];
        t.accumulate(im, gm);
    });
}

Var add_diagonal(const Var& m, const Var& c) {
    const Matrix& mv = m.value();
    if (mv.rows() != mv.cols()) throw DimensionError("add_diagonal: matrix is not square");
    if (c.value().size() != 1) throw DimensionError("add_diagonal: shift must be a scalar");
    Matrix out = mv;
    const double cv = c.item();
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += cv;
    const std::size_t im = m.id(), ic = c.id();
    return m.tape()->record("add_diagonal", std::move(out), {m, c}, [im, ic](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        t.accumulate(im, g);
        double trace = 0.0;
        for (std::size_t i = 0; i < g.rows(); ++i) trace += g(i, i);
        t.accumulate(ic, Matrix::scalar(trace));
    });
}

Var broadcast_rows(const Var& row, std::size_t n) {
    const Matrix& rv = row.value();
    if (rv.rows() != 1) throw DimensionError("broadcast_rows: input must be a row vector");
    Matrix out(n, rv.cols());
    for (std::size_t r = 0; r < n; ++r) std::copy_n(rv.data().begin(), rv.cols(), &out(r, 0));
    const std::size_t ir = row.id();
    return row.tape()->record("broadcast_rows", std::move(out), {row}, [ir](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        Matrix gr(1, g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
        t.accumulate(ir, gr);
    });
}

Var cholesky(const Var& s) {
    Matrix l = cholesky_factor(s.value());
    const std::size_t is = s.id();
    return s.tape()->record("cholesky", std::move(l), {s}, [is](Tape& t, std::size_t self) {
        const Matrix& l = t.value(self);
        const Matrix lbar = lower_triangle(t.grad(self));
        // P = Φ(Lᵀ·L̄): lower triangle with halved diagonal.
        Matrix p = lower_triangle(matmul_tn(l, lbar));
        for (std::size_t i = 0; i < p.rows(); ++i) p(i, i) *= 0.5;
        // S̄ = L⁻ᵀ·P·L⁻¹, symmetrized.
        const Matrix x = solve_lower_transposed(l, p);
        const Matrix y = solve_lower_transposed(l, x.transpose());
        Matrix sbar = y.transpose();
        Matrix sym = sbar + sbar.transpose();
        sym *= 0.5;
        t.accumulate(is, sym);
    });
}

Var trisolve(const Var& l, const Var& b) {
    Matrix x = solve_lower(l.value(), b.value());
    const std::size_t il = l.id(), ib = b.id();
    return l.tape()->record("trisolve", std::move(x), {l, b}, [il, ib](Tape& t, std::size_t self) {
        const Matrix& lv = t.value(il);
        const Matrix bbar = solve_lower_transposed(lv, t.grad(self));
        if (t.requires_grad(ib)) t.accumulate(ib, bbar);
        if (t.requires_grad(il)) {
            Matrix lbar = lower_triangle(matmul_nt(bbar, t.value(self)));
            lbar *= -1.0;
            t.accumulate(il, lbar);
        }
    });
}

Var logdet_from_cholesky(const Var& l) {
    return scale(sum(log(diagonal(l))), 2.0);
}

}  // namespace metaood::diff
