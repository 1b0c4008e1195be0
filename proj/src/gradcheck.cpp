#include "subjgen/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "subjgen/rng.hpp"

namespace subjgen::ad {

namespace {
double eval(const LossBuilder& build) {
    Tape tape;
    Var loss = build(tape);
    return tape.val(loss).item();
}
}  // namespace

std::vector<std::pair<std::string, double>> primitive_gradcheck_suite(uint64_t seed, int points) {
    Rng rng(seed);
    auto rand_param = [&rng](const char* name, std::vector<int> shape, double lo, double hi) {
        Tensor t(std::move(shape));
        t.fill_uniform(rng, lo, hi);
        return Parameter(name, std::move(t));
    };
    auto kink_free = [&rng](const char* name, std::vector<int> shape) {
        Tensor t(std::move(shape));
        for (size_t i = 0; i < t.size(); ++i) {
            double v = rng.uniform(0.15, 1.0);
            t[i] = rng.next_double() < 0.5 ? -v : v;
        }
        return Parameter(name, std::move(t));
    };

    std::vector<std::pair<std::string, double>> results;
    auto run = [&](const char* name, const std::function<double()>& one_point) {
        double worst = 0.0;
        for (int k = 0; k < points; ++k) worst = std::max(worst, one_point());
        results.emplace_back(name, worst);
    };

    run("add_sub_mul_scale", [&]() {
        Parameter a = rand_param("a", {5}, -1, 1);
        Parameter b = rand_param("b", {5}, -1, 1);
        return grad_check({&a, &b}, [&](Tape& t) {
                   Var x = t.param(a), y = t.param(b);
                   return t.sum(t.scale(t.mul(t.add(x, y), t.sub(x, y)), 0.7));
               }).max_rel_err;
    });
    run("tanh_sigmoid_log_square", [&]() {
        Parameter a = kink_free("a", {5});
        return grad_check({&a}, [&](Tape& t) {
                   Var x = t.param(a);
                   Var lg = t.log_(t.add(t.square(x), t.input(Tensor({5}, {1, 1, 1, 1, 1}))));
                   return t.sum(t.add(t.mul(t.tanh_(x), t.sigmoid_(x)), lg));
               }).max_rel_err;
    });
    run("relu", [&]() {
        Parameter a = kink_free("a", {6});
        Parameter p = rand_param("p", {6}, -1, 1);
        return grad_check({&a, &p}, [&](Tape& t) {
                   return t.dot(t.relu(t.param(a)), t.param(p));
               }).max_rel_err;
    });
    run("matvec_vecmat_matmul_affine", [&]() {
        Parameter w = rand_param("w", {3, 4}, -1, 1);
        Parameter u = rand_param("u", {5, 4}, -1, 1);
        Parameter x = rand_param("x", {3}, -1, 1);
        Parameter b = rand_param("b", {5}, -1, 1);
        return grad_check({&w, &u, &x, &b}, [&](Tape& t) {
                   Var m = t.matmul_nt(t.param(w), t.param(u));
                   Var m2 = t.add_rowvec(m, t.param(b));
                   Var v = t.vecmat(t.param(x), m2);
                   Var y = t.affine(m2, v, t.param(x));
                   return t.sum(t.tanh_(y));
               }).max_rel_err;
    });
    run("softmax_nll", [&]() {
        Parameter l = rand_param("l", {7}, -2, 2);
        return grad_check({&l}, [&](Tape& t) {
                   return t.neg(t.log_(t.pick(t.softmax(t.param(l)), 3)));
               }).max_rel_err;
    });
    run("masked_softmax", [&]() {
        Parameter l = rand_param("l", {6}, -2, 2);
        std::vector<bool> allowed = {true, false, true, true, false, true};
        return grad_check({&l}, [&](Tape& t) {
                   return t.neg(t.log_(t.pick(t.masked_softmax(t.param(l), allowed), 2)));
               }).max_rel_err;
    });
    run("log_softmax", [&]() {
        Parameter l = rand_param("l", {6}, -3, 3);
        Parameter p = rand_param("p", {6}, -1, 1);
        return grad_check({&l, &p}, [&](Tape& t) {
                   return t.dot(t.log_softmax(t.param(l)), t.param(p));
               }).max_rel_err;
    });
    run("embedding", [&]() {
        Parameter tab = rand_param("tab", {5, 3}, -1, 1);
        Parameter p = rand_param("p", {6}, -1, 1);
        return grad_check({&tab, &p}, [&](Tape& t) {
                   Var e = t.embedding(t.param(tab), {1, 4, 1});
                   return t.dot(t.concat({t.row(e, 0), t.row(e, 2)}), t.param(p));
               }).max_rel_err;
    });
    run("conv1d_relu_maxpool", [&]() {
        Parameter seq = rand_param("seq", {6, 3}, -1, 1);
        Parameter f = rand_param("f", {4, 2 * 3}, -1, 1);
        Parameter b = rand_param("b", {4}, 0.2, 0.8);
        Parameter p = rand_param("p", {4}, -1, 1);
        return grad_check({&seq, &f, &b, &p}, [&](Tape& t) {
                   Var c = t.max_over_time(t.relu(t.conv1d(t.param(seq), t.param(f), t.param(b), 2)));
                   return t.dot(c, t.param(p));
               }).max_rel_err;
    });
    run("lstm_cell", [&]() {
        int in = 3, hid = 4;
        Parameter w = rand_param("w", {4 * hid, in + hid}, -0.5, 0.5);
        Parameter b = rand_param("b", {4 * hid}, -0.5, 0.5);
        Parameter x = rand_param("x", {in}, -1, 1);
        Parameter h = rand_param("h", {hid}, -0.5, 0.5);
        Parameter c = rand_param("c", {hid}, -0.5, 0.5);
        Parameter p = rand_param("p", {2 * hid}, -1, 1);
        return grad_check({&w, &b, &x, &h, &c, &p}, [&](Tape& t) {
                   Var hc = t.lstm_cell(t.param(w), t.param(b), t.param(x), t.param(h), t.param(c));
                   return t.dot(hc, t.param(p));
               }).max_rel_err;
    });
    run("structure_ops", [&]() {
        Parameter a = rand_param("a", {4}, -1, 1);
        Parameter b = rand_param("b", {4}, -1, 1);
        Parameter s = rand_param("s", {1}, 0.2, 0.9);
        return grad_check({&a, &b, &s}, [&](Tape& t) {
                   Var st = t.stack_rows({t.param(a), t.param(b)});
                   Var sl = t.slice(t.concat({t.row(st, 0), t.row(st, 1)}), 1, 5);
                   Var g = t.group_sum(t.smul(t.param(s), sl), {0, 1, 0, 2, 1}, 3);
                   return t.add(t.mean(g), t.dot(t.param(a), t.param(b)));
               }).max_rel_err;
    });
    return results;
}

GradCheckResult grad_check(const std::vector<Parameter*>& params, const LossBuilder& build,
                           double h, int max_coords, uint64_t seed) {
    if (h <= 0.0) throw contract_error("grad_check: h must be positive");
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Var loss = build(tape);
        tape.backward(loss);
    }
    GradCheckResult res;
    Rng rng(seed);
    for (Parameter* p : params) {
        size_t n = p->value.size();
        std::vector<size_t> coords;
        if (n <= static_cast<size_t>(max_coords)) {
            coords.resize(n);
            for (size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int k = 0; k < max_coords; ++k)
                coords.push_back(rng.next_u64() % n);
        }
        for (size_t i : coords) {
            double analytic = p->grad[i];
            double rel = 1e300;
            // retry with smaller steps: a perturbation that straddles a
            // ReLU/max kink produces a bogus difference quotient that
            // vanishes once the step no longer crosses the kink
            double step = h;
            for (int attempt = 0; attempt < 3; ++attempt, step /= 10.0) {
                double saved = p->value[i];
                p->value[i] = saved + step;
                double fp = eval(build);
                p->value[i] = saved - step;
                double fm = eval(build);
                p->value[i] = saved;
                double numeric = (fp - fm) / (2.0 * step);
                double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
                rel = std::min(rel, std::abs(analytic - numeric) / denom);
                if (rel < 1e-4) break;
            }
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.coords_checked;
        }
    }
    return res;
}

}  // namespace subjgen::ad
