#include "subjgen/tape.hpp"

#include <algorithm>
#include <cmath>

namespace subjgen::ad {

void Tape::require(bool ok, const char* op, const std::string& detail) {
    if (!ok) throw shape_error(std::string(op) + ": " + detail);
}

Var Tape::push(Tensor value, const char* op, std::function<void(Tape&)> back) {
    if (!value.all_finite())
        throw numeric_error(std::string(op) + ": non-finite value in output " + value.shape_str());
    Record r;
    r.grad = Tensor::zeros(value.shape());
    r.value = std::move(value);
    r.back = std::move(back);
    r.op = op;
    recs_.push_back(std::move(r));
    return Var{static_cast<int>(recs_.size()) - 1};
}

Var Tape::input(Tensor t) {
    return push(std::move(t), "input", nullptr);
}

Var Tape::param(Parameter& p) {
    Var v = push(p.value, "param", nullptr);
    recs_.back().sink = &p;
    return v;
}

Var Tape::add(Var a, Var b) {
    const Tensor& x = v_(a.i);
    const Tensor& y = v_(b.i);
    require(x.same_shape(y), "add", x.shape_str() + " vs " + y.shape_str());
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    int ai = a.i, bi = b.i;
    Var o = push(std::move(out), "add", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, bi, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& ga = t.g_(ai);
        Tensor& gb = t.g_(bi);
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    };
    return o;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& x = v_(a.i);
    const Tensor& y = v_(b.i);
    require(x.same_shape(y), "sub", x.shape_str() + " vs " + y.shape_str());
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
    int ai = a.i, bi = b.i;
    Var o = push(std::move(out), "sub", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, bi, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& ga = t.g_(ai);
        Tensor& gb = t.g_(bi);
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] -= go[i];
        }
    };
    return o;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& x = v_(a.i);
    const Tensor& y = v_(b.i);
    require(x.same_shape(y), "mul", x.shape_str() + " vs " + y.shape_str());
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
    int ai = a.i, bi = b.i;
    Var o = push(std::move(out), "mul", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, bi, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& x2 = t.v_(ai);
        const Tensor& y2 = t.v_(bi);
        Tensor& ga = t.g_(ai);
        Tensor& gb = t.g_(bi);
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i] * y2[i];
            gb[i] += go[i] * x2[i];
        }
    };
    return o;
}

Var Tape::scale(Var a, double k) {
    Tensor out = v_(a.i);
    for (size_t i = 0; i < out.size(); ++i) out[i] *= k;
    int ai = a.i;
    Var o = push(std::move(out), "scale", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi, k](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < go.size(); ++i) ga[i] += k * go[i];
    };
    return o;
}

Var Tape::relu(Var a) {
    Tensor out = v_(a.i);
    for (size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    int ai = a.i;
    Var o = push(std::move(out), "relu", nullptr);
    int oi = o.i;
    // subgradient at 0 is taken as 0
    recs_[static_cast<size_t>(oi)].back = [ai, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& x = t.v_(ai);
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < go.size(); ++i)
            if (x[i] > 0.0) ga[i] += go[i];
    };
    return o;
}

Var Tape::tanh_(Var a) {
    Tensor out = v_(a.i);
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    int ai = a.i;
    Var o = push(std::move(out), "tanh", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& y = t.v_(oi);
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
    };
    return o;
}

Var Tape::sigmoid_(Var a) {
    Tensor out = v_(a.i);
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    int ai = a.i;
    Var o = push(std::move(out), "sigmoid", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& y = t.v_(oi);
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
    };
    return o;
}

Var Tape::log_(Var a) {
    const Tensor& x = v_(a.i);
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(out[i], 1e-300));
    int ai = a.i;
    Var o = push(std::move(out), "log", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& x2 = t.v_(ai);
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / std::max(x2[i], 1e-300);
    };
    return o;
}

Var Tape::square(Var a) {
    Tensor out = v_(a.i);
    for (size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
    int ai = a.i;
    Var o = push(std::move(out), "square", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& x = t.v_(ai);
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < go.size(); ++i) ga[i] += 2.0 * go[i] * x[i];
    };
    return o;
}

Var Tape::smul(Var scalar, Var x) {
    const Tensor& s = v_(scalar.i);
    require(s.size() == 1, "smul", "first operand must be scalar, got " + s.shape_str());
    double sv = s[0];
    Tensor out = v_(x.i);
    for (size_t i = 0; i < out.size(); ++i) out[i] *= sv;
    int si = scalar.i, xi = x.i;
    Var o = push(std::move(out), "smul", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [si, xi, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& xv = t.v_(xi);
        double sv2 = t.v_(si)[0];
        Tensor& gs = t.g_(si);
        Tensor& gx = t.g_(xi);
        for (size_t i = 0; i < go.size(); ++i) {
            gs[0] += go[i] * xv[i];
            gx[i] += go[i] * sv2;
        }
    };
    return o;
}

Var Tape::sum(Var a) {
    const Tensor& x = v_(a.i);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i];
    int ai = a.i;
    Var o = push(Tensor::scalar(s), "sum", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi](Tape& t) {
        double go = t.g_(oi)[0];
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += go;
    };
    return o;
}

Var Tape::mean(Var a) {
    const Tensor& x = v_(a.i);
    require(x.size() > 0, "mean", "empty tensor");
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i];
    double n = static_cast<double>(x.size());
    int ai = a.i;
    Var o = push(Tensor::scalar(s / n), "mean", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi, n](Tape& t) {
        double go = t.g_(oi)[0] / n;
        Tensor& ga = t.g_(ai);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += go;
    };
    return o;
}

Var Tape::dot(Var a, Var b) {
    const Tensor& x = v_(a.i);
    const Tensor& y = v_(b.i);
    require(x.size() == y.size(), "dot", x.shape_str() + " vs " + y.shape_str());
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    int ai = a.i, bi = b.i;
    Var o = push(Tensor::scalar(s), "dot", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, bi, oi](Tape& t) {
        double go = t.g_(oi)[0];
        const Tensor& x2 = t.v_(ai);
        const Tensor& y2 = t.v_(bi);
        Tensor& ga = t.g_(ai);
        Tensor& gb = t.g_(bi);
        for (size_t i = 0; i < x2.size(); ++i) {
            ga[i] += go * y2[i];
            gb[i] += go * x2[i];
        }
    };
    return o;
}

Var Tape::pick(Var a, int index) {
    const Tensor& x = v_(a.i);
    require(index >= 0 && static_cast<size_t>(index) < x.size(), "pick",
            "index " + std::to_string(index) + " out of " + x.shape_str());
    int ai = a.i;
    Var o = push(Tensor::scalar(x[static_cast<size_t>(index)]), "pick", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi, index](Tape& t) {
        t.g_(ai)[static_cast<size_t>(index)] += t.g_(oi)[0];
    };
    return o;
}

Var Tape::concat(const std::vector<Var>& xs) {
    require(!xs.empty(), "concat", "no operands");
    size_t total = 0;
    for (Var x : xs) total += v_(x.i).size();
    Tensor out({static_cast<int>(total)});
    size_t off = 0;
    std::vector<int> idx;
    std::vector<size_t> offs;
    for (Var x : xs) {
        const Tensor& t = v_(x.i);
        idx.push_back(x.i);
        offs.push_back(off);
        for (size_t i = 0; i < t.size(); ++i) out[off + i] = t[i];
        off += t.size();
    }
    Var o = push(std::move(out), "concat", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [idx, offs, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        for (size_t k = 0; k < idx.size(); ++k) {
            Tensor& g = t.g_(idx[k]);
            for (size_t i = 0; i < g.size(); ++i) g[i] += go[offs[k] + i];
        }
    };
    return o;
}

Var Tape::slice(Var a, int from, int len) {
    const Tensor& x = v_(a.i);
    require(from >= 0 && len >= 0 && static_cast<size_t>(from + len) <= x.size(), "slice",
            "range [" + std::to_string(from) + "," + std::to_string(from + len) + ") of " +
                x.shape_str());
    Tensor out({len});
    for (int i = 0; i < len; ++i) out[static_cast<size_t>(i)] = x[static_cast<size_t>(from + i)];
    int ai = a.i;
    Var o = push(std::move(out), "slice", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, oi, from, len](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& ga = t.g_(ai);
        for (int i = 0; i < len; ++i) ga[static_cast<size_t>(from + i)] += go[static_cast<size_t>(i)];
    };
    return o;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    require(!rows.empty(), "stack_rows", "no rows");
    const Tensor& first = v_(rows[0].i);
    int n = static_cast<int>(first.size());
    int t_len = static_cast<int>(rows.size());
    Tensor out({t_len, n});
    std::vector<int> idx;
    for (int r = 0; r < t_len; ++r) {
        const Tensor& x = v_(rows[static_cast<size_t>(r)].i);
        require(static_cast<int>(x.size()) == n, "stack_rows",
                "row " + std::to_string(r) + " has size " + std::to_string(x.size()));
        idx.push_back(rows[static_cast<size_t>(r)].i);
        for (int c = 0; c < n; ++c) out.at(r, c) = x[static_cast<size_t>(c)];
    }
    Var o = push(std::move(out), "stack_rows", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [idx, n, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        for (size_t r = 0; r < idx.size(); ++r) {
            Tensor& g = t.g_(idx[r]);
            for (int c = 0; c < n; ++c) g[static_cast<size_t>(c)] += go.at(static_cast<int>(r), c);
        }
    };
    return o;
}

Var Tape::row(Var m, int r) {
    const Tensor& x = v_(m.i);
    require(x.ndim() == 2, "row", "expected matrix, got " + x.shape_str());
    require(r >= 0 && r < x.rows(), "row", "row " + std::to_string(r) + " of " + x.shape_str());
    int n = x.cols();
    Tensor out({n});
    for (int c = 0; c < n; ++c) out[static_cast<size_t>(c)] = x.at(r, c);
    int mi = m.i;
    Var o = push(std::move(out), "row", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [mi, oi, r, n](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& gm = t.g_(mi);
        for (int c = 0; c < n; ++c) gm.at(r, c) += go[static_cast<size_t>(c)];
    };
    return o;
}

Var Tape::matvec(Var w, Var x) {
    const Tensor& wm = v_(w.i);
    const Tensor& xv = v_(x.i);
    require(wm.ndim() == 2, "matvec", "weight must be matrix, got " + wm.shape_str());
    require(static_cast<int>(xv.size()) == wm.cols(), "matvec",
            wm.shape_str() + " * " + xv.shape_str());
    int m = wm.rows(), n = wm.cols();
    Tensor out({m});
    const double* wd = wm.data();
    const double* xd = xv.data();
    for (int i = 0; i < m; ++i) {
        const double* wrow = wd + static_cast<size_t>(i) * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += wrow[j] * xd[j];
        out[static_cast<size_t>(i)] = s;
    }
    int wi = w.i, xi = x.i;
    Var o = push(std::move(out), "matvec", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [wi, xi, oi, m, n](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& wv = t.v_(wi);
        const Tensor& xv2 = t.v_(xi);
        Tensor& gw = t.g_(wi);
        Tensor& gx = t.g_(xi);
        for (int i = 0; i < m; ++i) {
            double gi = go[static_cast<size_t>(i)];
            if (gi == 0.0) continue;
            const double* wrow = wv.data() + static_cast<size_t>(i) * n;
            double* gwrow = gw.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                gwrow[j] += gi * xv2[static_cast<size_t>(j)];
                gx[static_cast<size_t>(j)] += gi * wrow[j];
            }
        }
    };
    return o;
}

Var Tape::vecmat(Var v, Var m) {
    const Tensor& vv = v_(v.i);
    const Tensor& mm = v_(m.i);
    require(mm.ndim() == 2, "vecmat", "expected matrix, got " + mm.shape_str());
    require(static_cast<int>(vv.size()) == mm.rows(), "vecmat",
            vv.shape_str() + " * " + mm.shape_str());
    int t_len = mm.rows(), n = mm.cols();
    Tensor out({n});
    for (int r = 0; r < t_len; ++r) {
        double vr = vv[static_cast<size_t>(r)];
        if (vr == 0.0) continue;
        const double* mrow = mm.data() + static_cast<size_t>(r) * n;
        for (int c = 0; c < n; ++c) out[static_cast<size_t>(c)] += vr * mrow[c];
    }
    int vi = v.i, mi = m.i;
    Var o = push(std::move(out), "vecmat", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [vi, mi, oi, t_len, n](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& vv2 = t.v_(vi);
        const Tensor& mv = t.v_(mi);
        Tensor& gv = t.g_(vi);
        Tensor& gm = t.g_(mi);
        for (int r = 0; r < t_len; ++r) {
            const double* mrow = mv.data() + static_cast<size_t>(r) * n;
            double* gmrow = gm.data() + static_cast<size_t>(r) * n;
            double vr = vv2[static_cast<size_t>(r)];
            double acc = 0.0;
            for (int c = 0; c < n; ++c) {
                acc += go[static_cast<size_t>(c)] * mrow[c];
                gmrow[c] += go[static_cast<size_t>(c)] * vr;
            }
            gv[static_cast<size_t>(r)] += acc;
        }
    };
    return o;
}

Var Tape::affine(Var w, Var x, Var b) {
    Var y = matvec(w, x);
    return add(y, b);
}

Var Tape::matmul_nt(Var a, Var b) {
    const Tensor& am = v_(a.i);
    const Tensor& bm = v_(b.i);
    require(am.ndim() == 2 && bm.ndim() == 2, "matmul_nt",
            am.shape_str() + " * " + bm.shape_str());
    require(am.cols() == bm.cols(), "matmul_nt",
            "inner dims differ: " + am.shape_str() + " vs " + bm.shape_str());
    int p = am.rows(), k = am.cols(), q = bm.rows();
    Tensor out({p, q});
    for (int i = 0; i < p; ++i) {
        const double* arow = am.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < q; ++j) {
            const double* brow = bm.data() + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int c = 0; c < k; ++c) s += arow[c] * brow[c];
            out.at(i, j) = s;
        }
    }
    int ai = a.i, bi = b.i;
    Var o = push(std::move(out), "matmul_nt", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ai, bi, oi, p, k, q](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& av = t.v_(ai);
        const Tensor& bv = t.v_(bi);
        Tensor& ga = t.g_(ai);
        Tensor& gb = t.g_(bi);
        for (int i = 0; i < p; ++i) {
            const double* arow = av.data() + static_cast<size_t>(i) * k;
            double* garow = ga.data() + static_cast<size_t>(i) * k;
            for (int j = 0; j < q; ++j) {
                double gij = go.at(i, j);
                if (gij == 0.0) continue;
                const double* brow = bv.data() + static_cast<size_t>(j) * k;
                double* gbrow = gb.data() + static_cast<size_t>(j) * k;
                for (int c = 0; c < k; ++c) {
                    garow[c] += gij * brow[c];
                    gbrow[c] += gij * arow[c];
                }
            }
        }
    };
    return o;
}

Var Tape::add_rowvec(Var m, Var v) {
    const Tensor& mm = v_(m.i);
    const Tensor& vv = v_(v.i);
    require(mm.ndim() == 2, "add_rowvec", "expected matrix, got " + mm.shape_str());
    require(static_cast<int>(vv.size()) == mm.cols(), "add_rowvec",
            mm.shape_str() + " + " + vv.shape_str());
    int t_len = mm.rows(), n = mm.cols();
    Tensor out = mm;
    for (int r = 0; r < t_len; ++r)
        for (int c = 0; c < n; ++c) out.at(r, c) += vv[static_cast<size_t>(c)];
    int mi = m.i, vi = v.i;
    Var o = push(std::move(out), "add_rowvec", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [mi, vi, oi, t_len, n](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& gm = t.g_(mi);
        Tensor& gv = t.g_(vi);
        for (int r = 0; r < t_len; ++r)
            for (int c = 0; c < n; ++c) {
                gm.at(r, c) += go.at(r, c);
                gv[static_cast<size_t>(c)] += go.at(r, c);
            }
    };
    return o;
}

Var Tape::embedding(Var table, std::vector<int> ids) {
    const Tensor& tab = v_(table.i);
    require(tab.ndim() == 2, "embedding", "table must be matrix, got " + tab.shape_str());
    int e = tab.cols();
    int t_len = static_cast<int>(ids.size());
    require(t_len > 0, "embedding", "empty id sequence");
    Tensor out({t_len, e});
    for (int r = 0; r < t_len; ++r) {
        int id = ids[static_cast<size_t>(r)];
        require(id >= 0 && id < tab.rows(), "embedding",
                "id " + std::to_string(id) + " out of table " + tab.shape_str());
        for (int c = 0; c < e; ++c) out.at(r, c) = tab.at(id, c);
    }
    int ti = table.i;
    Var o = push(std::move(out), "embedding", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [ti, oi, ids, e](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& gt = t.g_(ti);
        for (size_t r = 0; r < ids.size(); ++r)
            for (int c = 0; c < e; ++c) gt.at(ids[r], c) += go.at(static_cast<int>(r), c);
    };
    return o;
}

Var Tape::conv1d(Var seq, Var filters, Var bias, int window) {
    const Tensor& s = v_(seq.i);
    const Tensor& f = v_(filters.i);
    const Tensor& b = v_(bias.i);
    require(s.ndim() == 2 && f.ndim() == 2, "conv1d", s.shape_str() + ", " + f.shape_str());
    int t_len = s.rows(), e = s.cols(), nf = f.rows();
    require(f.cols() == window * e, "conv1d",
            "filter width " + std::to_string(f.cols()) + " != window*emb " +
                std::to_string(window * e));
    require(static_cast<int>(b.size()) == nf, "conv1d", "bias " + b.shape_str());
    require(t_len >= window, "conv1d",
            "sequence length " + std::to_string(t_len) + " < window " + std::to_string(window));
    int np = t_len - window + 1;
    Tensor out({np, nf});
    for (int p = 0; p < np; ++p) {
        const double* win = s.data() + static_cast<size_t>(p) * e;
        for (int k = 0; k < nf; ++k) {
            const double* frow = f.data() + static_cast<size_t>(k) * (window * e);
            double acc = b[static_cast<size_t>(k)];
            for (int j = 0; j < window * e; ++j) acc += frow[j] * win[j];
            out.at(p, k) = acc;
        }
    }
    int si = seq.i, fi = filters.i, bi = bias.i;
    Var o = push(std::move(out), "conv1d", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [si, fi, bi, oi, window, e, nf, np](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& sv = t.v_(si);
        const Tensor& fv = t.v_(fi);
        Tensor& gs = t.g_(si);
        Tensor& gf = t.g_(fi);
        Tensor& gb = t.g_(bi);
        for (int p = 0; p < np; ++p) {
            const double* win = sv.data() + static_cast<size_t>(p) * e;
            double* gwin = gs.data() + static_cast<size_t>(p) * e;
            for (int k = 0; k < nf; ++k) {
                double gpk = go.at(p, k);
                if (gpk == 0.0) continue;
                gb[static_cast<size_t>(k)] += gpk;
                const double* frow = fv.data() + static_cast<size_t>(k) * (window * e);
                double* gfrow = gf.data() + static_cast<size_t>(k) * (window * e);
                for (int j = 0; j < window * e; ++j) {
                    gfrow[j] += gpk * win[j];
                    gwin[j] += gpk * frow[j];
                }
            }
        }
    };
    return o;
}

Var Tape::max_over_time(Var m) {
    const Tensor& x = v_(m.i);
    require(x.ndim() == 2, "max_over_time", "expected matrix, got " + x.shape_str());
    int t_len = x.rows(), nf = x.cols();
    require(t_len >= 1, "max_over_time", "empty time axis");
    Tensor out({nf});
    std::vector<int> argmax(static_cast<size_t>(nf), 0);
    for (int c = 0; c < nf; ++c) {
        double best = x.at(0, c);
        int bi = 0;
        for (int r = 1; r < t_len; ++r)
            if (x.at(r, c) > best) {
                best = x.at(r, c);
                bi = r;
            }
        out[static_cast<size_t>(c)] = best;
        argmax[static_cast<size_t>(c)] = bi;
    }
    int mi = m.i;
    Var o = push(std::move(out), "max_over_time", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [mi, oi, argmax, nf](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& gm = t.g_(mi);
        for (int c = 0; c < nf; ++c)
            gm.at(argmax[static_cast<size_t>(c)], c) += go[static_cast<size_t>(c)];
    };
    return o;
}

Var Tape::softmax(Var logits) {
    const Tensor& x = v_(logits.i);
    std::vector<bool> allowed(x.size(), true);
    return masked_softmax(logits, std::move(allowed));
}

Var Tape::masked_softmax(Var logits, std::vector<bool> allowed) {
    const Tensor& x = v_(logits.i);
    require(x.size() == allowed.size(), "masked_softmax",
            "mask length " + std::to_string(allowed.size()) + " vs " + x.shape_str());
    bool any = false;
    double mx = -1e308;
    for (size_t i = 0; i < x.size(); ++i)
        if (allowed[i]) {
            any = true;
            mx = std::max(mx, x[i]);
        }
    require(any, "masked_softmax", "all slots masked");
    Tensor out(x.shape());
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (!allowed[i]) continue;
        out[i] = std::exp(x[i] - mx);
        z += out[i];
    }
    for (size_t i = 0; i < x.size(); ++i)
        out[i] = allowed[i] ? out[i] / z : 0.0;
    int li = logits.i;
    Var o = push(std::move(out), "masked_softmax", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [li, oi, allowed](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& y = t.v_(oi);
        Tensor& gl = t.g_(li);
        double inner = 0.0;
        for (size_t i = 0; i < y.size(); ++i)
            if (allowed[i]) inner += go[i] * y[i];
        for (size_t i = 0; i < y.size(); ++i)
            if (allowed[i]) gl[i] += y[i] * (go[i] - inner);
    };
    return o;
}

Var Tape::log_softmax(Var logits) {
    const Tensor& x = v_(logits.i);
    require(x.size() >= 1, "log_softmax", "empty input");
    double mx = x[0];
    for (size_t i = 1; i < x.size(); ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
    double lz = std::log(z) + mx;
    Tensor out(x.shape());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lz;
    int li = logits.i;
    Var o = push(std::move(out), "log_softmax", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [li, oi](Tape& t) {
        const Tensor& go = t.g_(oi);
        const Tensor& y = t.v_(oi);
        Tensor& gl = t.g_(li);
        double gsum = 0.0;
        for (size_t i = 0; i < go.size(); ++i) gsum += go[i];
        for (size_t i = 0; i < go.size(); ++i) gl[i] += go[i] - std::exp(y[i]) * gsum;
    };
    return o;
}

Var Tape::lstm_cell(Var w, Var b, Var x, Var h, Var c) {
    const Tensor& wm = v_(w.i);
    const Tensor& bv = v_(b.i);
    const Tensor& xv = v_(x.i);
    const Tensor& hv = v_(h.i);
    const Tensor& cv = v_(c.i);
    int in_dim = static_cast<int>(xv.size());
    int hid = static_cast<int>(hv.size());
    require(static_cast<int>(cv.size()) == hid, "lstm_cell",
            "h " + hv.shape_str() + " vs c " + cv.shape_str());
    require(wm.ndim() == 2 && wm.rows() == 4 * hid && wm.cols() == in_dim + hid, "lstm_cell",
            "weights " + wm.shape_str() + " for input " + std::to_string(in_dim) + " hidden " +
                std::to_string(hid));
    require(static_cast<int>(bv.size()) == 4 * hid, "lstm_cell", "bias " + bv.shape_str());

    // gate order: input, forget, cell candidate, output
    std::vector<double> gates(static_cast<size_t>(4 * hid));
    for (int r = 0; r < 4 * hid; ++r) {
        const double* wrow = wm.data() + static_cast<size_t>(r) * (in_dim + hid);
        double acc = bv[static_cast<size_t>(r)];
        for (int j = 0; j < in_dim; ++j) acc += wrow[j] * xv[static_cast<size_t>(j)];
        for (int j = 0; j < hid; ++j) acc += wrow[in_dim + j] * hv[static_cast<size_t>(j)];
        gates[static_cast<size_t>(r)] = acc;
    }
    std::vector<double> gi(static_cast<size_t>(hid)), gf(static_cast<size_t>(hid)),
        gg(static_cast<size_t>(hid)), go_(static_cast<size_t>(hid)),
        cn(static_cast<size_t>(hid)), tc(static_cast<size_t>(hid));
    Tensor out({2 * hid});
    for (int k = 0; k < hid; ++k) {
        double iv = 1.0 / (1.0 + std::exp(-gates[static_cast<size_t>(k)]));
        double fv = 1.0 / (1.0 + std::exp(-gates[static_cast<size_t>(hid + k)]));
        double gv = std::tanh(gates[static_cast<size_t>(2 * hid + k)]);
        double ov = 1.0 / (1.0 + std::exp(-gates[static_cast<size_t>(3 * hid + k)]));
        double cnew = fv * cv[static_cast<size_t>(k)] + iv * gv;
        double tcv = std::tanh(cnew);
        gi[static_cast<size_t>(k)] = iv;
        gf[static_cast<size_t>(k)] = fv;
        gg[static_cast<size_t>(k)] = gv;
        go_[static_cast<size_t>(k)] = ov;
        cn[static_cast<size_t>(k)] = cnew;
        tc[static_cast<size_t>(k)] = tcv;
        out[static_cast<size_t>(k)] = ov * tcv;
        out[static_cast<size_t>(hid + k)] = cnew;
    }
    int wi = w.i, bi = b.i, xi = x.i, hi = h.i, ci = c.i;
    Var o = push(std::move(out), "lstm_cell", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [wi, bi, xi, hi, ci, oi, in_dim, hid, gi, gf, gg, go_,
                                           tc](Tape& t) {
        const Tensor& gout = t.g_(oi);
        const Tensor& wv2 = t.v_(wi);
        const Tensor& xv2 = t.v_(xi);
        const Tensor& hv2 = t.v_(hi);
        const Tensor& cv2 = t.v_(ci);
        Tensor& gw = t.g_(wi);
        Tensor& gb = t.g_(bi);
        Tensor& gx = t.g_(xi);
        Tensor& gh = t.g_(hi);
        Tensor& gc = t.g_(ci);
        std::vector<double> dz(static_cast<size_t>(4 * hid));
        for (int k = 0; k < hid; ++k) {
            double dh = gout[static_cast<size_t>(k)];
            double dc_out = gout[static_cast<size_t>(hid + k)];
            double ov = go_[static_cast<size_t>(k)];
            double tcv = tc[static_cast<size_t>(k)];
            double dct = dc_out + dh * ov * (1.0 - tcv * tcv);
            double iv = gi[static_cast<size_t>(k)];
            double fv = gf[static_cast<size_t>(k)];
            double gv = gg[static_cast<size_t>(k)];
            double dov = dh * tcv;
            double dfv = dct * cv2[static_cast<size_t>(k)];
            double div = dct * gv;
            double dgv = dct * iv;
            gc[static_cast<size_t>(k)] += dct * fv;
            dz[static_cast<size_t>(k)] = div * iv * (1.0 - iv);
            dz[static_cast<size_t>(hid + k)] = dfv * fv * (1.0 - fv);
            dz[static_cast<size_t>(2 * hid + k)] = dgv * (1.0 - gv * gv);
            dz[static_cast<size_t>(3 * hid + k)] = dov * ov * (1.0 - ov);
        }
        for (int r = 0; r < 4 * hid; ++r) {
            double d = dz[static_cast<size_t>(r)];
            if (d == 0.0) continue;
            gb[static_cast<size_t>(r)] += d;
            const double* wrow = wv2.data() + static_cast<size_t>(r) * (in_dim + hid);
            double* gwrow = gw.data() + static_cast<size_t>(r) * (in_dim + hid);
            for (int j = 0; j < in_dim; ++j) {
                gwrow[j] += d * xv2[static_cast<size_t>(j)];
                gx[static_cast<size_t>(j)] += d * wrow[j];
            }
            for (int j = 0; j < hid; ++j) {
                gwrow[in_dim + j] += d * hv2[static_cast<size_t>(j)];
                gh[static_cast<size_t>(j)] += d * wrow[in_dim + j];
            }
        }
    };
    return o;
}

Var Tape::group_sum(Var w, std::vector<int> group_ids, int n_groups) {
    const Tensor& x = v_(w.i);
    require(x.size() == group_ids.size(), "group_sum",
            "weights " + x.shape_str() + " vs " + std::to_string(group_ids.size()) + " ids");
    Tensor out({n_groups});
    for (size_t i = 0; i < x.size(); ++i) {
        int g = group_ids[i];
        require(g >= 0 && g < n_groups, "group_sum", "group id " + std::to_string(g));
        out[static_cast<size_t>(g)] += x[i];
    }
    int wi = w.i;
    Var o = push(std::move(out), "group_sum", nullptr);
    int oi = o.i;
    recs_[static_cast<size_t>(oi)].back = [wi, oi, group_ids](Tape& t) {
        const Tensor& go = t.g_(oi);
        Tensor& gw = t.g_(wi);
        for (size_t i = 0; i < group_ids.size(); ++i)
            gw[i] += go[static_cast<size_t>(group_ids[i])];
    };
    return o;
}

void Tape::backward(Var loss) {
    if (!loss.valid() || static_cast<size_t>(loss.i) >= recs_.size())
        throw contract_error("backward: invalid loss handle");
    Record& lrec = recs_[static_cast<size_t>(loss.i)];
    if (lrec.value.size() != 1)
        throw contract_error("backward: loss must be scalar, got " + lrec.value.shape_str());
    lrec.grad[0] = 1.0;
    for (int i = loss.i; i >= 0; --i) {
        Record& r = recs_[static_cast<size_t>(i)];
        if (r.back) r.back(*this);
        if (r.sink) {
            for (size_t k = 0; k < r.grad.size(); ++k) r.sink->grad[k] += r.grad[k];
        }
    }
}

}  // namespace subjgen::ad
