#include "eraser/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace eraser::nn {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace


int ParamStore::add(std::string name, Mat w, bool trainable) {
    Entry e;
    e.name = std::move(name);
    e.g = Mat(w.rows, w.cols);
    e.w = std::move(w);
    e.trainable = trainable;
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
}

void ParamStore::zero_grads() const {
    for (const auto& e : entries_) e.g.zero();
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.w.size();
    return n;
}

double ParamStore::get_flat(size_t i) const {
    for (const auto& e : entries_) {
        if (i < e.w.size()) return e.w.v[i];
        i -= e.w.size();
    }
    throw std::out_of_range("ParamStore::get_flat");
}

void ParamStore::set_flat(size_t i, double x) {
    for (auto& e : entries_) {
        if (i < e.w.size()) {
            e.w.v[i] = x;
            return;
        }
        i -= e.w.size();
    }
    throw std::out_of_range("ParamStore::set_flat");
}

double ParamStore::grad_flat(size_t i) const {
    for (const auto& e : entries_) {
        if (i < e.g.size()) return e.g.v[i];
        i -= e.g.size();
    }
    throw std::out_of_range("ParamStore::grad_flat");
}

Tape::Ref Tape::push(Mat val, bool needs_grad) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = grad_enabled_ && needs_grad;
    nodes_.push_back(std::move(n));
    return Ref{static_cast<int>(nodes_.size()) - 1};
}

void Tape::set_back(Ref r, std::function<void(Tape&)> fn) {
    if (nodes_[r.i].needs_grad) nodes_[r.i].back = std::move(fn);
}

Mat& Tape::grad_buf(Ref r) {
    Node& n = nodes_[r.i];
    if (n.grad.rows == 0) n.grad = Mat(n.val.rows, n.val.cols);
    return n.grad;
}

void Tape::accum(Ref r, const Mat& g) {
    Node& n = nodes_[r.i];
    if (!n.needs_grad) return;
    Mat& buf = grad_buf(r);
    assert(buf.same_shape(g));
    for (size_t k = 0; k < buf.size(); ++k) buf.v[k] += g.v[k];
    n.seeded = true;
}

Tape::Ref Tape::constant(Mat m) { return push(std::move(m), false); }

Tape::Ref Tape::param(const ParamStore& store, int id) {
    Ref r = push(store.weights(id), true);
    const ParamStore* sp = &store;
    set_back(r, [r, sp, id](Tape& t) {
        Mat& dst = sp->grads(id);
        const Mat& g = t.nodes_[r.i].grad;
        for (size_t k = 0; k < dst.size(); ++k) dst.v[k] += g.v[k];
    });
    return r;
}

Tape::Ref Tape::add(Ref a, Ref b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    assert(av.same_shape(bv));
    Mat out = av;
    for (size_t k = 0; k < out.size(); ++k) out.v[k] += bv.v[k];
    Ref r = push(std::move(out), wants_grad(a) || wants_grad(b));
    set_back(r, [r, a, b](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        t.accum(a, g);
        t.accum(b, g);
    });
    return r;
}

Tape::Ref Tape::add_row_broadcast(Ref a, Ref bias_row) {
    const Mat& av = value(a);
    const Mat& bv = value(bias_row);
    assert(bv.rows == 1 && bv.cols == av.cols);
    Mat out = av;
    for (int i = 0; i < out.rows; ++i) {
        double* ro = out.row(i);
        for (int j = 0; j < out.cols; ++j) ro[j] += bv.v[j];
    }
    Ref r = push(std::move(out), wants_grad(a) || wants_grad(bias_row));
    set_back(r, [r, a, bias_row](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        t.accum(a, g);
        if (t.wants_grad(bias_row)) {
            Mat gb(1, g.cols);
            for (int i = 0; i < g.rows; ++i) {
                const double* gi = g.row(i);
                for (int j = 0; j < g.cols; ++j) gb.v[j] += gi[j];
            }
            t.accum(bias_row, gb);
        }
    });
    return r;
}

Tape::Ref Tape::scale(Ref a, double k) {
    Mat out = value(a);
    for (double& x : out.v) x *= k;
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a, k](Tape& t) {
        Mat g = t.nodes_[r.i].grad;
        for (double& x : g.v) x *= k;
        t.accum(a, g);
    });
    return r;
}

Tape::Ref Tape::add_scalar(Ref a, double k) {
    Mat out = value(a);
    for (double& x : out.v) x += k;
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a](Tape& t) { t.accum(a, t.nodes_[r.i].grad); });
    return r;
}

Tape::Ref Tape::matmul(Ref a, Ref b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    Mat out(av.rows, bv.cols);
    matmul_acc(av, bv, out);
    Ref r = push(std::move(out), wants_grad(a) || wants_grad(b));
    set_back(r, [r, a, b](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        if (t.wants_grad(a)) {
            Mat ga(t.value(a).rows, t.value(a).cols);
            matmul_nt_acc(g, t.value(b), ga);
            t.accum(a, ga);
        }
        if (t.wants_grad(b)) {
            Mat gb(t.value(b).rows, t.value(b).cols);
            matmul_tn_acc(t.value(a), g, gb);
            t.accum(b, gb);
        }
    });
    return r;
}

Tape::Ref Tape::matmul_nt(Ref a, Ref b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    assert(av.cols == bv.cols);
    Mat out(av.rows, bv.rows);
    matmul_nt_acc(av, bv, out);
    Ref r = push(std::move(out), wants_grad(a) || wants_grad(b));
    set_back(r, [r, a, b](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        if (t.wants_grad(a)) {
            Mat ga(t.value(a).rows, t.value(a).cols);
            matmul_acc(g, t.value(b), ga);
            t.accum(a, ga);
        }
        if (t.wants_grad(b)) {
            Mat gb(t.value(b).rows, t.value(b).cols);
            matmul_tn_acc(g, t.value(a), gb);
            t.accum(b, gb);
        }
    });
    return r;
}

Tape::Ref Tape::rows(Ref a, int off, int n) {
    const Mat& av = value(a);
    assert(off >= 0 && off + n <= av.rows);
    Mat out(n, av.cols);
    for (int i = 0; i < n; ++i) {
        const double* src = av.row(off + i);
        double* dst = out.row(i);
        for (int j = 0; j < av.cols; ++j) dst[j] = src[j];
    }
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a, off, n](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        Mat ga(t.value(a).rows, t.value(a).cols);
        for (int i = 0; i < n; ++i) {
            const double* src = g.row(i);
            double* dst = ga.row(off + i);
            for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
        }
        t.accum(a, ga);
    });
    return r;
}

Tape::Ref Tape::cols(Ref a, int off, int n) {
    const Mat& av = value(a);
    assert(off >= 0 && off + n <= av.cols);
    Mat out(av.rows, n);
    for (int i = 0; i < av.rows; ++i) {
        const double* src = av.row(i);
        double* dst = out.row(i);
        for (int j = 0; j < n; ++j) dst[j] = src[off + j];
    }
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a, off, n](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        Mat ga(t.value(a).rows, t.value(a).cols);
        for (int i = 0; i < g.rows; ++i) {
            const double* src = g.row(i);
            double* dst = ga.row(i);
            for (int j = 0; j < n; ++j) dst[off + j] += src[j];
        }
        t.accum(a, ga);
    });
    return r;
}

Tape::Ref Tape::relu(Ref a) {
    Mat out = value(a);
    for (double& x : out.v) {
        if (x < 0.0) x = 0.0;
    }
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        const Mat& av = t.value(a);
        Mat ga(g.rows, g.cols);
        bool any = false;
        for (size_t k = 0; k < g.size(); ++k) {
            if (av.v[k] > 0.0) {
                ga.v[k] = g.v[k];
                any = true;
            }
        }
        // Inactive hinge: the clipped branch contributes no gradient at all,
        // so the upstream subgraph is never seeded.
        if (any) t.accum(a, ga);
    });
    return r;
}

Tape::Ref Tape::gelu(Ref a) {
    const Mat& av = value(a);
    Mat out(av.rows, av.cols);
    for (size_t k = 0; k < av.size(); ++k) {
        out.v[k] = gelu_scalar(av.v[k]);
    }
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        const Mat& av2 = t.value(a);
        Mat ga(g.rows, g.cols);
        for (size_t k = 0; k < g.size(); ++k) {
            const double x = av2.v[k];
            const double phi = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            ga.v[k] = g.v[k] * (cdf + x * phi);
        }
        t.accum(a, ga);
    });
    return r;
}

Tape::Ref Tape::layer_norm(Ref x, Ref gain, Ref bias, double eps) {
    const Mat& xv = value(x);
    const Mat& gv = value(gain);
    const Mat& bv = value(bias);
    assert(gv.rows == 1 && gv.cols == xv.cols && bv.rows == 1 && bv.cols == xv.cols);
    const int n = xv.rows, d = xv.cols;

    Mat out(n, d);
    Mat xhat(n, d);
    std::vector<double> inv_std(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        layernorm_row(xv.row(i), d, gv.v.data(), bv.v.data(), eps, out.row(i), xhat.row(i),
                      &inv_std[static_cast<size_t>(i)]);
    }

    Ref r = push(std::move(out), wants_grad(x) || wants_grad(gain) || wants_grad(bias));
    set_back(r, [r, x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        const Mat& gv2 = t.value(gain);
        const int n2 = g.rows, d2 = g.cols;

        if (t.wants_grad(gain)) {
            Mat gg(1, d2);
            for (int i = 0; i < n2; ++i) {
                const double* gi = g.row(i);
                const double* hi = xhat.row(i);
                for (int j = 0; j < d2; ++j) gg.v[j] += gi[j] * hi[j];
            }
            t.accum(gain, gg);
        }
        if (t.wants_grad(bias)) {
            Mat gb(1, d2);
            for (int i = 0; i < n2; ++i) {
                const double* gi = g.row(i);
                for (int j = 0; j < d2; ++j) gb.v[j] += gi[j];
            }
            t.accum(bias, gb);
        }
        if (t.wants_grad(x)) {
            Mat gx(n2, d2);
            for (int i = 0; i < n2; ++i) {
                const double* gi = g.row(i);
                const double* hi = xhat.row(i);
                double* oi = gx.row(i);
                double mean_h = 0.0, mean_hx = 0.0;
                for (int j = 0; j < d2; ++j) {
                    const double hgrad = gi[j] * gv2.v[j];
                    mean_h += hgrad;
                    mean_hx += hgrad * hi[j];
                }
                mean_h /= d2;
                mean_hx /= d2;
                const double is = inv_std[static_cast<size_t>(i)];
                for (int j = 0; j < d2; ++j) {
                    const double hgrad = gi[j] * gv2.v[j];
                    oi[j] = is * (hgrad - mean_h - hi[j] * mean_hx);
                }
            }
            t.accum(x, gx);
        }
    });
    return r;
}

Tape::Ref Tape::causal_softmax(Ref scores) {
    const Mat& sv = value(scores);
    assert(sv.rows == sv.cols);
    const int n = sv.rows;
    Mat out(n, n);
    for (int i = 0; i < n; ++i) {
        softmax_row(sv.row(i), out.row(i), i + 1);
        // columns > i stay exactly zero
    }
    Ref r = push(std::move(out), wants_grad(scores));
    set_back(r, [r, scores, n](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        const Mat& p = t.nodes_[r.i].val;
        Mat gs(n, n);
        for (int i = 0; i < n; ++i) {
            const double* gi = g.row(i);
            const double* pi = p.row(i);
            double dot = 0.0;
            for (int j = 0; j <= i; ++j) dot += gi[j] * pi[j];
            double* oi = gs.row(i);
            for (int j = 0; j <= i; ++j) oi[j] = pi[j] * (gi[j] - dot);
        }
        t.accum(scores, gs);
    });
    return r;
}

Tape::Ref Tape::gather_rows(Ref table, std::vector<int> ids) {
    const Mat& tv = value(table);
    Mat out(static_cast<int>(ids.size()), tv.cols);
    for (size_t i = 0; i < ids.size(); ++i) {
        assert(ids[i] >= 0 && ids[i] < tv.rows);
        const double* src = tv.row(ids[i]);
        double* dst = out.row(static_cast<int>(i));
        for (int j = 0; j < tv.cols; ++j) dst[j] = src[j];
    }
    Ref r = push(std::move(out), wants_grad(table));
    set_back(r, [r, table, ids = std::move(ids)](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        Mat gt(t.value(table).rows, t.value(table).cols);
        for (size_t i = 0; i < ids.size(); ++i) {
            const double* src = g.row(static_cast<int>(i));
            double* dst = gt.row(ids[i]);
            for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
        }
        t.accum(table, gt);
    });
    return r;
}

Tape::Ref Tape::token_log_probs(Ref logits, std::vector<int> targets) {
    const Mat& zv = value(logits);
    assert(static_cast<int>(targets.size()) == zv.rows);
    const int n = zv.rows, vsz = zv.cols;
    Mat out(n, 1);
    std::vector<double> lse(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* zi = zv.row(i);
        double mx = zi[0];
        for (int j = 1; j < vsz; ++j) {
            if (zi[j] > mx) mx = zi[j];
        }
        double sum = 0.0;
        for (int j = 0; j < vsz; ++j) sum += std::exp(zi[j] - mx);
        const double l = mx + std::log(sum);
        lse[static_cast<size_t>(i)] = l;
        out.v[static_cast<size_t>(i)] = zi[targets[static_cast<size_t>(i)]] - l;
    }
    Ref r = push(std::move(out), wants_grad(logits));
    set_back(r, [r, logits, targets = std::move(targets), lse = std::move(lse), vsz](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        const Mat& zv2 = t.value(logits);
        Mat gz(zv2.rows, zv2.cols);
        for (int i = 0; i < zv2.rows; ++i) {
            const double gi = g.v[static_cast<size_t>(i)];
            if (gi == 0.0) continue;
            const double* zi = zv2.row(i);
            double* oi = gz.row(i);
            const double l = lse[static_cast<size_t>(i)];
            for (int j = 0; j < vsz; ++j) oi[j] = -gi * std::exp(zi[j] - l);
            oi[targets[static_cast<size_t>(i)]] += gi;
        }
        t.accum(logits, gz);
    });
    return r;
}

Tape::Ref Tape::kl_rows_vs_const(Ref logits, Mat teacher_log_probs) {
    const Mat& zv = value(logits);
    assert(zv.same_shape(teacher_log_probs));
    const int n = zv.rows, vsz = zv.cols;
    Mat out(n, 1);
    std::vector<double> lse(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* zi = zv.row(i);
        const double* mi = teacher_log_probs.row(i);
        double mx = zi[0];
        for (int j = 1; j < vsz; ++j) {
            if (zi[j] > mx) mx = zi[j];
        }
        double sum = 0.0;
        for (int j = 0; j < vsz; ++j) sum += std::exp(zi[j] - mx);
        const double l = mx + std::log(sum);
        lse[static_cast<size_t>(i)] = l;
        double kl = 0.0;
        for (int j = 0; j < vsz; ++j) {
            const double lp = zi[j] - l;
            const double p = std::exp(lp);
            // p underflows to +0 for extremely unlikely tokens; 0 * ln 0 := 0.
            if (p > 0.0) kl += p * (lp - mi[j]);
        }
        out.v[static_cast<size_t>(i)] = kl;
    }
    Ref r = push(std::move(out), wants_grad(logits));
    set_back(r, [r, logits, m = std::move(teacher_log_probs), lse = std::move(lse), vsz](Tape& t) {
        const Mat& g = t.nodes_[r.i].grad;
        const Mat& kl = t.nodes_[r.i].val;
        const Mat& zv2 = t.value(logits);
        Mat gz(zv2.rows, zv2.cols);
        for (int i = 0; i < zv2.rows; ++i) {
            const double gi = g.v[static_cast<size_t>(i)];
            if (gi == 0.0) continue;
            const double* zi = zv2.row(i);
            const double* mi = m.row(i);
            double* oi = gz.row(i);
            const double l = lse[static_cast<size_t>(i)];
            const double kli = kl.v[static_cast<size_t>(i)];
            for (int j = 0; j < vsz; ++j) {
                const double lp = zi[j] - l;
                const double p = std::exp(lp);
                oi[j] = gi * p * (lp - mi[j] - kli);
            }
        }
        t.accum(logits, gz);
    });
    return r;
}

Tape::Ref Tape::mean_all(Ref a) {
    const Mat& av = value(a);
    assert(av.size() > 0);
    double s = 0.0;
    for (double x : av.v) s += x;
    Mat out(1, 1);
    out.v[0] = s / static_cast<double>(av.size());
    Ref r = push(std::move(out), wants_grad(a));
    set_back(r, [r, a](Tape& t) {
        const double g = t.nodes_[r.i].grad.v[0];
        const Mat& av2 = t.value(a);
        Mat ga(av2.rows, av2.cols);
        const double k = g / static_cast<double>(av2.size());
        for (double& x : ga.v) x = k;
        t.accum(a, ga);
    });
    return r;
}

void Tape::backward(Ref loss) {
    if (!grad_enabled_) throw std::logic_error("Tape::backward on a forward-only tape");
    Node& ln = nodes_[loss.i];
    assert(ln.val.rows == 1 && ln.val.cols == 1);
    if (!ln.needs_grad) return;  // loss does not depend on any parameter
    grad_buf(loss).v[0] = 1.0;
    ln.seeded = true;
    for (int i = loss.i; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.seeded && n.back) n.back(*this);
    }
}

}  // namespace eraser::nn
