#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "subjgen/metrics.hpp"
#include "subjgen/rng.hpp"
#include "subjgen/stopwords.hpp"
#include "subjgen/synthetic.hpp"

using namespace subjgen;

namespace {

// ---- independent oracles ----------------------------------------------

// rouge-n by multiset consumption instead of clipped count maps
PrfScore oracle_rouge_n(const TokenList& cand, const TokenList& ref, int n) {
    auto grams = [n](const TokenList& t) {
        std::vector<std::string> out;
        for (size_t i = 0; i + n <= t.size(); ++i) {
            std::string g;
            for (int k = 0; k < n; ++k) g += t[i + k] + "\x01";
            out.push_back(g);
        }
        return out;
    };
    std::vector<std::string> cg = grams(cand), rg = grams(ref);
    std::multiset<std::string> pool(rg.begin(), rg.end());
    double match = 0;
    for (const auto& g : cg) {
        auto it = pool.find(g);
        if (it != pool.end()) {
            pool.erase(it);
            match += 1;
        }
    }
    PrfScore s;
    if (!cg.empty()) s.precision = match / cg.size();
    if (!rg.empty()) s.recall = match / rg.size();
    if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

// recursive LCS with memoization
int oracle_lcs(const TokenList& a, const TokenList& b) {
    std::map<std::pair<size_t, size_t>, int> memo;
    std::function<int(size_t, size_t)> rec = [&](size_t i, size_t j) -> int {
        if (i == a.size() || j == b.size()) return 0;
        auto key = std::make_pair(i, j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        int v;
        if (a[i] == b[j])
            v = 1 + rec(i + 1, j + 1);
        else
            v = std::max(rec(i + 1, j), rec(i, j + 1));
        memo[key] = v;
        return v;
    };
    return rec(0, 0);
}

// exhaustive alignment search over all injective mappings
struct OracleAlign {
    int exact = -1, stems = -1, chunks = 1 << 20;
};
void oracle_align_rec(const TokenList& c, const TokenList& r, size_t i, std::vector<int>& used,
                      int exact, int stems, int chunks, int last_i, int last_j,
                      OracleAlign& best) {
    if (i == c.size()) {
        if (exact > best.exact ||
            (exact == best.exact &&
             (stems > best.stems || (stems == best.stems && chunks < best.chunks)))) {
            best = {exact, stems, chunks};
        }
        return;
    }
    oracle_align_rec(c, r, i + 1, used, exact, stems, chunks, last_i, last_j, best);
    for (size_t j = 0; j < r.size(); ++j) {
        if (used[j]) continue;
        int kind = 0;
        if (c[i] == r[j])
            kind = 2;
        else if (stem(c[i]) == stem(r[j]))
            kind = 1;
        if (kind == 0) continue;
        used[j] = 1;
        bool extends = static_cast<int>(i) == last_i + 1 && static_cast<int>(j) == last_j + 1;
        oracle_align_rec(c, r, i + 1, used, exact + (kind == 2), stems + (kind == 1),
                         chunks + (extends ? 0 : 1), static_cast<int>(i), static_cast<int>(j),
                         best);
        used[j] = 0;
    }
}
double oracle_meteor_single(const TokenList& c, const TokenList& r) {
    OracleAlign best;
    std::vector<int> used(r.size(), 0);
    oracle_align_rec(c, r, 0, used, 0, 0, 0, -2, -2, best);
    int matches = best.exact + best.stems;
    if (matches <= 0) return 0.0;
    double p = static_cast<double>(matches) / c.size();
    double rr = static_cast<double>(matches) / r.size();
    double f = 10 * p * rr / (rr + 9 * p);
    double frag = static_cast<double>(best.chunks) / matches;
    return f * (1 - 0.5 * frag * frag * frag);
}

// textbook computational formula
double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

std::vector<double> oracle_ranks(const std::vector<double>& x) {
    std::vector<double> ranks(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        double less = 0, equal = 0;
        for (size_t j = 0; j < x.size(); ++j) {
            if (x[j] < x[i]) ++less;
            if (x[j] == x[i]) ++equal;
        }
        ranks[i] = less + (equal + 1.0) / 2.0;
    }
    return ranks;
}

// two-sided p by Simpson quadrature of the t density
double oracle_t_pvalue(double t, int dof) {
    double at = std::abs(t);
    if (dof == 1) return 1.0 - 2.0 / M_PI * std::atan(at);
    if (dof == 2) return 1.0 - at / std::sqrt(2.0 + at * at);
    double nu = dof;
    auto pdf = [nu](double u) {
        return std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) /
               std::sqrt(nu * M_PI) * std::pow(1 + u * u / nu, -(nu + 1) / 2);
    };
    double lo = std::abs(t), hi = std::abs(t) + 80.0;
    const int k = 80001;
    double h = (hi - lo) / (k - 1);
    double s = pdf(lo) + pdf(hi);
    for (int i = 1; i < k - 1; ++i) s += pdf(lo + i * h) * (i % 2 == 1 ? 4 : 2);
    return 2 * s * h / 3;
}

TokenList random_tokens(Rng& rng, int min_len, int max_len) {
    static const std::vector<std::string> pool = {
        "budget", "budgets", "report",  "reports", "acme",   "monday", "meeting",
        "plan",   "planned", "launch",  "launching", "review", "q3",   "notes",
        "team",   "update",  "updates", "invoice", "final",  "draft",
    };
    int len = min_len + rng.next_int(max_len - min_len + 1);
    TokenList out;
    for (int i = 0; i < len; ++i)
        out.push_back(pool[static_cast<size_t>(rng.next_int(pool.size()))]);
    return out;
}

}  // namespace

TEST_CASE("rouge-1 hand cases") {
    CHECK(rouge_n({"a", "b", "c"}, {{"a", "c", "d"}}, 1).precision == doctest::Approx(2.0 / 3));
    CHECK(rouge_n({"a", "b", "c"}, {{"a", "c", "d"}}, 1).recall == doctest::Approx(2.0 / 3));
    CHECK(rouge_n({"a", "b", "c"}, {{"a", "c", "d"}}, 1).f1 == doctest::Approx(2.0 / 3));
    CHECK(rouge_n({"x", "y"}, {{"x", "y"}}, 1).f1 == doctest::Approx(1.0));
    CHECK(rouge_n({"x", "y"}, {{"p", "q"}}, 1).f1 == doctest::Approx(0.0));
    CHECK_THROWS_AS(rouge_n({"a"}, {{"a"}}, 3), contract_error);
    CHECK_THROWS_AS(rouge_n({}, {{"a"}}, 1), contract_error);
    CHECK_THROWS_AS(rouge_n({"a"}, {}, 1), contract_error);
}

TEST_CASE("rouge-l hand cases") {
    CHECK(rouge_l({"a", "b", "c", "d"}, {{"a", "c", "b", "d"}}).f1 == doctest::Approx(0.75));
    CHECK(rouge_l({"a", "b", "c"}, {{"a", "b", "c"}}).f1 == doctest::Approx(1.0));
    CHECK(rouge_l({"a", "b", "c"}, {{"c", "b", "a"}}).f1 == doctest::Approx(1.0 / 3));
}

TEST_CASE("rouge duality and reference-order invariance") {
    Rng rng(71);
    for (int trial = 0; trial < 50; ++trial) {
        TokenList a = random_tokens(rng, 1, 8);
        TokenList b = random_tokens(rng, 1, 8);
        PrfScore ab = rouge_n(a, {b}, 1);
        PrfScore ba = rouge_n(b, {a}, 1);
        CHECK(ab.precision == doctest::Approx(ba.recall).epsilon(1e-12));
        CHECK(ab.recall == doctest::Approx(ba.precision).epsilon(1e-12));

        TokenList c = random_tokens(rng, 1, 8);
        CHECK(rouge_n(a, {b, c}, 1).f1 == doctest::Approx(rouge_n(a, {c, b}, 1).f1));
        CHECK(rouge_l(a, {b, c}).f1 == doctest::Approx(rouge_l(a, {c, b}).f1));
        CHECK(meteor(a, {b, c}) == doctest::Approx(meteor(a, {c, b})));
    }
}

TEST_CASE("rouge_l equals rouge_1 on single-token pairs") {
    Rng rng(72);
    for (int trial = 0; trial < 30; ++trial) {
        TokenList a = random_tokens(rng, 1, 1);
        TokenList b = random_tokens(rng, 1, 1);
        CHECK(rouge_l(a, {b}).f1 == doctest::Approx(rouge_n(a, {b}, 1).f1));
    }
}

TEST_CASE("rouge matches independent oracles on 40 fixed cases") {
    Rng rng(73);
    for (int trial = 0; trial < 40; ++trial) {
        TokenList cand = random_tokens(rng, 1, 9);
        TokenList ref = random_tokens(rng, 1, 9);
        for (int n : {1, 2}) {
            PrfScore mine = rouge_n(cand, {ref}, n);
            PrfScore want = oracle_rouge_n(cand, ref, n);
            CHECK(std::abs(mine.f1 - want.f1) <= 1e-9);
            CHECK(std::abs(mine.precision - want.precision) <= 1e-9);
            CHECK(std::abs(mine.recall - want.recall) <= 1e-9);
        }
        double lcs = oracle_lcs(cand, ref);
        PrfScore mine = rouge_l(cand, {ref});
        double p = lcs / cand.size(), r = lcs / ref.size();
        double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        CHECK(std::abs(mine.f1 - f) <= 1e-9);
    }
}

TEST_CASE("stemmer joins singular/plural and verbal forms") {
    CHECK(stem("reports") == stem("report"));
    CHECK(stem("budgets") == stem("budget"));
    CHECK(stem("parties") == stem("party"));
    CHECK(stem("classes") == stem("class"));
    CHECK(stem("planned") != "planned");   // ed stripped
    CHECK(stem("launching") == stem("launch"));
    CHECK(stem("is") == "is");             // short tokens untouched
    CHECK(stem("bus") == "bus");
}

TEST_CASE("meteor hand cases") {
    SUBCASE("identical 4-token strings score 0.9921875") {
        TokenList t = {"please", "review", "the", "budget"};
        CHECK(meteor(t, {t}) == doctest::Approx(0.9921875).epsilon(1e-12));
    }
    SUBCASE("zero overlap scores 0") {
        CHECK(meteor({"alpha", "beta"}, {{"gamma", "delta"}}) == doctest::Approx(0.0));
    }
    SUBCASE("stem match counts: budget reports vs budget report") {
        MeteorAlignment a = meteor_align({"budget", "reports"}, {"budget", "report"});
        CHECK(a.matches == 2);
        CHECK(a.chunks == 1);
        // P=R=1, F=1, penalty = 0.5*(1/2)^3
        CHECK(meteor({"budget", "reports"}, {{"budget", "report"}}) ==
              doctest::Approx(1.0 - 0.5 * 0.125).epsilon(1e-12));
    }
    SUBCASE("fragmented match pays the chunk penalty") {
        // reversal: two matches, two chunks
        MeteorAlignment a = meteor_align({"a", "b"}, {"b", "a"});
        CHECK(a.matches == 2);
        CHECK(a.chunks == 2);
    }
}

TEST_CASE("meteor matches the exhaustive oracle on 30 fixed cases") {
    Rng rng(74);
    int checked = 0;
    while (checked < 30) {
        TokenList cand = random_tokens(rng, 1, 6);
        TokenList ref = random_tokens(rng, 1, 6);
        double mine = meteor(cand, {ref});
        double want = oracle_meteor_single(cand, ref);
        CHECK(std::abs(mine - want) <= 1e-9);
        ++checked;
    }
}

TEST_CASE("meteor penalty stays within [0, 0.5] and score at most f_mean") {
    Rng rng(75);
    for (int trial = 0; trial < 100; ++trial) {
        TokenList cand = random_tokens(rng, 1, 10);
        TokenList ref = random_tokens(rng, 1, 10);
        MeteorAlignment a = meteor_align(cand, ref);
        if (a.matches == 0) {
            CHECK(meteor(cand, {ref}) == 0.0);
            continue;
        }
        CHECK(a.chunks >= 1);
        CHECK(a.chunks <= a.matches);
        double p = static_cast<double>(a.matches) / cand.size();
        double r = static_cast<double>(a.matches) / ref.size();
        double f_mean = 10 * p * r / (r + 9 * p);
        double score = meteor(cand, {ref});
        CHECK(score <= f_mean + 1e-12);
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
    }
}

TEST_CASE("lead2 concatenates the first two sentences") {
    auto synth = generate_synthetic(5, 44);
    for (const auto& se : synth) {
        TokenList out = lead2(se.email);
        const auto& s = se.email.body_sentences;
        REQUIRE(s.size() >= 2);
        CHECK(out.size() == s[0].size() + s[1].size());
        for (size_t i = 0; i < s[0].size(); ++i) CHECK(out[i] == s[0][i]);
        for (size_t i = 0; i < s[1].size(); ++i) CHECK(out[s[0].size() + i] == s[1][i]);
    }
}

TEST_CASE("pearson hand case and identities") {
    std::vector<double> x = {1, 2, 3, 5};
    std::vector<double> y = {2, 1, 4, 5};
    CHECK(pearson(x, y) == doctest::Approx(0.8552359741197579).epsilon(1e-12));
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    std::vector<double> neg;
    for (double v : x) neg.push_back(-v);
    CHECK(pearson(x, neg) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), contract_error);
    CHECK_THROWS_AS(pearson({1}, {1}), contract_error);
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), contract_error);
}

TEST_CASE("pearson and spearman match oracles on fixed random cases") {
    Rng rng(76);
    for (int trial = 0; trial < 25; ++trial) {
        int n = 3 + rng.next_int(10);
        std::vector<double> x, y;
        for (int i = 0; i < n; ++i) {
            x.push_back(rng.uniform(-3, 3));
            y.push_back(rng.uniform(-3, 3));
        }
        CHECK(std::abs(pearson(x, y) - oracle_pearson(x, y)) <= 1e-9);
        double mine = spearman(x, y);
        double want = oracle_pearson(oracle_ranks(x), oracle_ranks(y));
        CHECK(std::abs(mine - want) <= 1e-9);
    }
}

TEST_CASE("spearman ties and invariances") {
    CHECK(spearman({1, 1, 2}, {3, 5, 4}) == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<double> x = {0.2, 1.5, 3.7, 9.0, 12.0};
    std::vector<double> fx;
    for (double v : x) fx.push_back(std::exp(v));  // strictly monotone transform
    CHECK(spearman(x, fx) == doctest::Approx(1.0));
    std::vector<double> rev(x.rbegin(), x.rend());
    CHECK(spearman(x, rev) == doctest::Approx(-1.0));

    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + rng.next_int(8);
        std::vector<double> a, b;
        for (int i = 0; i < n; ++i) {
            a.push_back(rng.uniform(-2, 2));
            b.push_back(rng.uniform(-2, 2));
        }
        double base = spearman(a, b);
        std::vector<double> a_cubed;
        for (double v : a) a_cubed.push_back(v * v * v);
        CHECK(spearman(a_cubed, b) == doctest::Approx(base).epsilon(1e-9));
        double rp = pearson(a, b);
        std::vector<double> a_affine;
        for (double v : a) a_affine.push_back(2.5 * v + 1.0);
        CHECK(pearson(a_affine, b) == doctest::Approx(rp).epsilon(1e-9));
        std::vector<double> a_negscaled;
        for (double v : a) a_negscaled.push_back(-1.5 * v);
        CHECK(pearson(a_negscaled, b) == doctest::Approx(-rp).epsilon(1e-9));
    }
}

TEST_CASE("paired t-test matches the frozen reference computation") {
    std::vector<double> a = {3.1, 2.8, 3.5, 3.0, 2.9, 3.3, 3.7, 2.6, 3.2, 3.4};
    std::vector<double> b = {2.9, 2.7, 3.1, 3.2, 2.5, 3.0, 3.6, 2.8, 2.9, 3.1};
    TTestResult r = paired_t_test(a, b);
    CHECK(r.t == doctest::Approx(2.4285714285714284).epsilon(1e-9));
    CHECK(std::abs(r.p - 0.03807165500467171) <= 1e-4);
    CHECK(r.dof == 9);

    std::vector<double> a2 = {1.0, 1.2, 0.8, 1.1, 0.9, 1.05, 1.15, 0.95};
    std::vector<double> b2 = {1.3, 1.1, 1.0, 1.4, 1.2, 1.00, 1.30, 1.10};
    TTestResult r2 = paired_t_test(a2, b2);
    CHECK(r2.t == doctest::Approx(-2.817819882980807).epsilon(1e-9));
    CHECK(std::abs(r2.p - 0.02585403390831663) <= 1e-4);
}

TEST_CASE("t distribution closed forms at 1 and 2 dof") {
    for (double t : {0.5, 1.3, 2.7}) {
        double p1 = incomplete_beta(0.5, 0.5, 1.0 / (1.0 + t * t));
        CHECK(p1 == doctest::Approx(1.0 - 2.0 / M_PI * std::atan(t)).epsilon(1e-9));
        double p2 = incomplete_beta(1.0, 0.5, 2.0 / (2.0 + t * t));
        CHECK(p2 == doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)).epsilon(1e-9));
    }
}

TEST_CASE("paired t-test degenerate and quadrature-oracle cases") {
    std::vector<double> a = {1, 2, 3, 4, 5};
    std::vector<double> b = {2, 3, 4, 5, 6};  // exact constant shift
    CHECK_THROWS_AS(paired_t_test(a, b), contract_error);
    CHECK_THROWS_AS(paired_t_test(a, a), contract_error);

    Rng rng(78);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + rng.next_int(12);
        std::vector<double> x, y;
        for (int i = 0; i < n; ++i) {
            double base = rng.uniform(-1, 1);
            x.push_back(base + rng.uniform(-0.5, 0.5));
            y.push_back(base + rng.uniform(-0.5, 0.5));
        }
        TTestResult r = paired_t_test(x, y);
        CHECK(std::abs(r.p - oracle_t_pvalue(r.t, r.dof)) <= 1e-4);
        CHECK(r.p >= 0.0);
        CHECK(r.p <= 1.0);
    }
}

TEST_CASE("permuted halves of symmetric noise give large p most of the time") {
    // sanity: when the two systems are exchangeable, p should rarely be tiny
    Rng rng(79);
    int small_p = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        int n = 12;
        std::vector<double> x, y;
        for (int i = 0; i < n; ++i) {
            double base = rng.uniform(0, 1);
            double noise = rng.uniform(-0.3, 0.3);
            if (rng.next_double() < 0.5) {
                x.push_back(base + noise);
                y.push_back(base - noise);
            } else {
                x.push_back(base - noise);
                y.push_back(base + noise);
            }
        }
        try {
            if (paired_t_test(x, y).p < 0.05) ++small_p;
        } catch (const contract_error&) {
        }
    }
    // roughly 5% expected; allow generous slack
    CHECK(small_p < trials / 5);
}

TEST_CASE("evaluate_system end to end") {
    auto synth = generate_synthetic(8, 45);
    std::vector<Email> corpus = strip_synthetic(synth);

    SystemOutput gold_out{"gold", {}};
    SystemOutput lead_out{"lead2", {}};
    for (const Email& e : corpus) {
        gold_out.subjects.push_back(e.subject_tokens);
        lead_out.subjects.push_back(lead2(e));
    }

    EvalOptions opts;
    opts.stopwords = builtin_stopwords();
    SUBCASE("gold outputs score 1.0 on every rouge variant") {
        SystemScores s = evaluate_system(gold_out, corpus, opts);
        for (const char* m : {"rouge1_f", "rouge2_f", "rougeL_f"})
            for (double v : s.per_example.at(m)) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("misaligned counts are rejected") {
        SystemOutput bad{"bad", {{"a"}}};
        CHECK_THROWS_AS(evaluate_system(bad, corpus, opts), contract_error);
    }
    SUBCASE("empty and all-stopword candidates score zero, not error") {
        SystemOutput weird{"weird", {}};
        for (size_t i = 0; i < corpus.size(); ++i)
            weird.subjects.push_back(i % 2 == 0 ? TokenList{} : TokenList{"the", "of"});
        SystemScores s = evaluate_system(weird, corpus, opts);
        for (double v : s.per_example.at("rouge1_f")) CHECK(v == 0.0);
    }
    SUBCASE("multi-system report carries p-values and correlations") {
        std::vector<double> ratings;
        const auto& stop = builtin_stopwords();
        for (size_t i = 0; i < corpus.size(); ++i) ratings.push_back(1.0 + (i % 4));
        EvalOptions opts2 = opts;
        opts2.ratings = &ratings;
        EvalReport rep = evaluate_systems({gold_out, lead_out}, corpus, opts2);
        (void)stop;
        CHECK(rep.designated_system == "gold");
        for (const auto& [metric, by_system] : rep.p_values)
            for (const auto& [sys, p] : by_system) {
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
            }
        // report files round-trip without error
        write_report_csv(rep, "report_test.csv");
        write_report_json(rep, "report_test.json");
        std::remove("report_test.csv");
        std::remove("report_test.json");
    }
}
