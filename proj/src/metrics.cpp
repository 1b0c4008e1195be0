#include "subjgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "subjgen/esqe.hpp"
#include "subjgen/text.hpp"
#include "subjgen/vocab.hpp"

namespace subjgen {

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const TokenList& toks, int n) {
    std::map<std::vector<std::string>, int> out;
    if (static_cast<int>(toks.size()) < n) return out;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return out;
}

PrfScore prf_from_counts(double match, double cand_total, double ref_total) {
    PrfScore s;
    if (cand_total > 0) s.precision = match / cand_total;
    if (ref_total > 0) s.recall = match / ref_total;
    if (s.precision + s.recall > 0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

int lcs_length(const TokenList& a, const TokenList& b) {
    size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

void check_metric_inputs(const TokenList& candidate, const std::vector<TokenList>& references,
                         const char* op) {
    if (candidate.empty()) throw contract_error(std::string(op) + ": empty candidate");
    if (references.empty()) throw contract_error(std::string(op) + ": no references");
    for (const auto& r : references)
        if (r.empty()) throw contract_error(std::string(op) + ": empty reference");
}

}  // namespace

PrfScore rouge_n(const TokenList& candidate, const std::vector<TokenList>& references, int n) {
    if (n != 1 && n != 2) throw contract_error("rouge_n: n must be 1 or 2");
    check_metric_inputs(candidate, references, "rouge_n");
    auto cand = ngram_counts(candidate, n);
    double cand_total = 0;
    for (const auto& [g, c] : cand) cand_total += c;
    PrfScore best;
    bool first = true;
    for (const auto& ref : references) {
        auto rg = ngram_counts(ref, n);
        double ref_total = 0, match = 0;
        for (const auto& [g, c] : rg) ref_total += c;
        for (const auto& [g, c] : cand) {
            auto it = rg.find(g);
            if (it != rg.end()) match += std::min(c, it->second);
        }
        PrfScore s = prf_from_counts(match, cand_total, ref_total);
        if (first || s.f1 > best.f1) best = s;
        first = false;
    }
    return best;
}

PrfScore rouge_l(const TokenList& candidate, const std::vector<TokenList>& references) {
    check_metric_inputs(candidate, references, "rouge_l");
    PrfScore best;
    bool first = true;
    for (const auto& ref : references) {
        double lcs = lcs_length(candidate, ref);
        PrfScore s = prf_from_counts(lcs, static_cast<double>(candidate.size()),
                                     static_cast<double>(ref.size()));
        if (first || s.f1 > best.f1) best = s;
        first = false;
    }
    return best;
}

std::string stem(const std::string& word) {
    std::string s = word;
    auto ends_with = [&](const char* suf) {
        size_t len = std::strlen(suf);
        return s.size() >= len && s.compare(s.size() - len, len, suf) == 0;
    };
    // plural forms
    if (s.size() > 4 && ends_with("sses")) {
        s.erase(s.size() - 2);
    } else if (s.size() > 4 && ends_with("ies")) {
        s.erase(s.size() - 3);
        s.push_back('y');
    } else if (s.size() > 3 && ends_with("s") && !ends_with("ss") && !ends_with("us") &&
               !ends_with("is")) {
        s.pop_back();
    }
    // common verbal/derivational suffixes
    if (s.size() > 5 && ends_with("ing")) {
        s.erase(s.size() - 3);
    } else if (s.size() > 4 && ends_with("ed")) {
        s.erase(s.size() - 2);
    } else if (s.size() > 5 && ends_with("ly")) {
        s.erase(s.size() - 2);
    } else if (s.size() > 6 && ends_with("ness")) {
        s.erase(s.size() - 4);
    } else if (s.size() > 6 && ends_with("ment")) {
        s.erase(s.size() - 4);
    }
    return s;
}

namespace {

// match quality between two tokens: 2 exact, 1 stem, 0 none
int match_kind(const std::string& c, const std::string& r) {
    if (c == r) return 2;
    if (stem(c) == stem(r)) return 1;
    return 0;
}

struct AlignValue {
    int exact = 0;
    int stems = 0;
    int chunks = 0;
    bool valid = false;

    bool better_than(const AlignValue& o) const {
        if (!o.valid) return valid;
        if (exact != o.exact) return exact > o.exact;
        if (stems != o.stems) return stems > o.stems;
        return chunks < o.chunks;
    }
};

// Exhaustive bitmask DP over reference positions: maximize exact matches,
// then stem matches, then minimize chunk count.
MeteorAlignment align_exact_dp(const TokenList& cand, const TokenList& ref) {
    int m = static_cast<int>(cand.size());
    int n = static_cast<int>(ref.size());
    size_t n_masks = size_t{1} << n;
    // state: (mask, prev_j+1) where prev_j is the ref position matched at
    // the previous candidate position (-1 when unmatched)
    std::vector<AlignValue> cur(n_masks * static_cast<size_t>(n + 1));
    std::vector<AlignValue> next(cur.size());
    auto at = [n](std::vector<AlignValue>& v, size_t mask, int prev) -> AlignValue& {
        return v[mask * static_cast<size_t>(n + 1) + static_cast<size_t>(prev + 1)];
    };
    at(cur, 0, -1) = {0, 0, 0, true};
    for (int i = 0; i < m; ++i) {
        for (auto& v : next) v = AlignValue{};
        for (size_t mask = 0; mask < n_masks; ++mask) {
            for (int prev = -1; prev < n; ++prev) {
                AlignValue base = at(cur, mask, prev);
                if (!base.valid) continue;
                // skip candidate token i
                AlignValue skip = base;
                if (skip.better_than(at(next, mask, -1))) at(next, mask, -1) = skip;
                // match candidate token i to an unused reference position
                for (int j = 0; j < n; ++j) {
                    if (mask & (size_t{1} << j)) continue;
                    int kind = match_kind(cand[static_cast<size_t>(i)],
                                          ref[static_cast<size_t>(j)]);
                    if (kind == 0) continue;
                    AlignValue nv = base;
                    if (kind == 2)
                        ++nv.exact;
                    else
                        ++nv.stems;
                    // a chunk continues only when candidate and reference
                    // positions are both consecutive
                    if (!(prev >= 0 && j == prev + 1)) ++nv.chunks;
                    size_t nmask = mask | (size_t{1} << j);
                    if (nv.better_than(at(next, nmask, j))) at(next, nmask, j) = nv;
                }
            }
        }
        std::swap(cur, next);
    }
    AlignValue best;
    for (const auto& v : cur)
        if (v.valid && v.better_than(best)) best = v;
    return {best.exact + best.stems, best.chunks};
}

// Greedy fallback for long inputs: exact stage then stem stage, preferring
// the reference position that extends the current run.
MeteorAlignment align_greedy(const TokenList& cand, const TokenList& ref) {
    int m = static_cast<int>(cand.size());
    int n = static_cast<int>(ref.size());
    std::vector<int> match_to(static_cast<size_t>(m), -1);
    std::vector<bool> used(static_cast<size_t>(n), false);
    for (int want : {2, 1}) {
        for (int i = 0; i < m; ++i) {
            if (match_to[static_cast<size_t>(i)] >= 0) continue;
            int prev = i > 0 ? match_to[static_cast<size_t>(i - 1)] : -1;
            int pick = -1;
            if (prev >= 0 && prev + 1 < n && !used[static_cast<size_t>(prev + 1)] &&
                match_kind(cand[static_cast<size_t>(i)], ref[static_cast<size_t>(prev + 1)]) ==
                    want)
                pick = prev + 1;
            else
                for (int j = 0; j < n; ++j)
                    if (!used[static_cast<size_t>(j)] &&
                        match_kind(cand[static_cast<size_t>(i)], ref[static_cast<size_t>(j)]) ==
                            want) {
                        pick = j;
                        break;
                    }
            if (pick >= 0) {
                match_to[static_cast<size_t>(i)] = pick;
                used[static_cast<size_t>(pick)] = true;
            }
        }
    }
    MeteorAlignment out;
    int last_i = -2, last_j = -2;
    for (int i = 0; i < m; ++i) {
        int j = match_to[static_cast<size_t>(i)];
        if (j < 0) continue;
        ++out.matches;
        if (!(i == last_i + 1 && j == last_j + 1)) ++out.chunks;
        last_i = i;
        last_j = j;
    }
    return out;
}

}  // namespace

MeteorAlignment meteor_align(const TokenList& candidate, const TokenList& reference) {
    if (reference.size() <= 14 && candidate.size() <= 24)
        return align_exact_dp(candidate, reference);
    return align_greedy(candidate, reference);
}

double meteor(const TokenList& candidate, const std::vector<TokenList>& references) {
    check_metric_inputs(candidate, references, "meteor");
    double best = 0.0;
    for (const auto& ref : references) {
        MeteorAlignment a = meteor_align(candidate, ref);
        if (a.matches == 0) continue;
        double p = static_cast<double>(a.matches) / candidate.size();
        double r = static_cast<double>(a.matches) / ref.size();
        double f_mean = 10.0 * p * r / (r + 9.0 * p);
        double frag = static_cast<double>(a.chunks) / a.matches;
        double penalty = 0.5 * frag * frag * frag;
        best = std::max(best, f_mean * (1.0 - penalty));
    }
    return best;
}

TokenList lead2(const Email& email) {
    if (email.body_sentences.empty()) throw contract_error("lead2: unsegmented email");
    TokenList out = email.body_sentences[0];
    if (email.body_sentences.size() > 1)
        out.insert(out.end(), email.body_sentences[1].begin(), email.body_sentences[1].end());
    return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw contract_error("pearson: length mismatch");
    if (x.size() < 2) throw contract_error("pearson: need at least 2 points");
    double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw contract_error("pearson: undefined correlation for constant input");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> fractional_ranks(const std::vector<double>& x) {
    std::vector<size_t> order(x.size());
    for (size_t i = 0; i < x.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size(), 0.0);
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw contract_error("spearman: length mismatch");
    if (x.size() < 2) throw contract_error("spearman: need at least 2 points");
    return pearson(fractional_ranks(x), fractional_ranks(y));
}

namespace {

// continued fraction for the regularized incomplete beta (modified Lentz)
double betacf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 3e-14, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw contract_error("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                      b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw contract_error("paired_t_test: length mismatch");
    if (a.size() < 2) throw contract_error("paired_t_test: need at least 2 pairs");
    size_t n = a.size();
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    double mean = 0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double v : d) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0)
        throw contract_error("paired_t_test: degenerate zero-variance differences");
    TTestResult res;
    res.dof = static_cast<int>(n) - 1;
    res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    double nu = static_cast<double>(res.dof);
    res.p = incomplete_beta(nu / 2.0, 0.5, nu / (nu + res.t * res.t));
    return res;
}

namespace {

bool scoreable(const TokenList& cand, const std::set<std::string>& stopwords) {
    if (cand.empty()) return false;
    if (stopwords.empty()) return true;
    for (const auto& t : cand)
        if (!is_punct_token(t) && !stopwords.count(t)) return true;
    return false;
}

std::vector<TokenList> references_for(const Email& e) {
    std::vector<TokenList> refs;
    if (!e.subject_tokens.empty()) refs.push_back(e.subject_tokens);
    for (const auto& r : e.reference_subjects)
        if (!r.empty()) refs.push_back(r);
    return refs;
}

}  // namespace

SystemScores evaluate_system(const SystemOutput& output, const std::vector<Email>& corpus,
                             const EvalOptions& options) {
    if (output.subjects.size() != corpus.size())
        throw contract_error("evaluate_system: " + output.name + " has " +
                             std::to_string(output.subjects.size()) + " outputs for " +
                             std::to_string(corpus.size()) + " emails");
    if (options.esqe && !options.vocab)
        throw contract_error("evaluate_system: esqe scoring needs a vocabulary");
    SystemScores scores;
    scores.name = output.name;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const TokenList& cand = output.subjects[i];
        std::vector<TokenList> refs = references_for(corpus[i]);
        if (refs.empty())
            throw contract_error("evaluate_system: email " + corpus[i].id + " has no reference");
        bool ok = scoreable(cand, options.stopwords);
        scores.per_example["rouge1_f"].push_back(ok ? rouge_n(cand, refs, 1).f1 : 0.0);
        scores.per_example["rouge2_f"].push_back(ok ? rouge_n(cand, refs, 2).f1 : 0.0);
        scores.per_example["rougeL_f"].push_back(ok ? rouge_l(cand, refs).f1 : 0.0);
        scores.per_example["meteor"].push_back(ok ? meteor(cand, refs) : 0.0);
        if (options.esqe) {
            double s = 0.0;
            if (!cand.empty()) {
                auto body = options.vocab->encode(corpus[i].all_body_tokens());
                auto subj = options.vocab->encode(cand);
                s = esqe_score(*const_cast<EsqeModel*>(options.esqe), body, subj);
            }
            scores.per_example["esqe"].push_back(s);
        }
    }
    for (auto& [metric, vals] : scores.per_example) {
        double m = 0;
        for (double v : vals) m += v;
        scores.mean[metric] = vals.empty() ? 0.0 : m / static_cast<double>(vals.size());
    }
    return scores;
}

EvalReport evaluate_systems(const std::vector<SystemOutput>& outputs,
                            const std::vector<Email>& corpus, const EvalOptions& options) {
    if (outputs.empty()) throw contract_error("evaluate_systems: no systems");
    EvalReport report;
    for (const auto& out : outputs) report.systems.push_back(evaluate_system(out, corpus, options));
    for (const auto& [metric, vals] : report.systems.front().per_example)
        report.metric_names.push_back(metric);
    report.designated_system = report.systems.front().name;

    for (size_t s = 1; s < report.systems.size(); ++s) {
        for (const auto& metric : report.metric_names) {
            const auto& a = report.systems[s].per_example.at(metric);
            const auto& b = report.systems.front().per_example.at(metric);
            double p = 1.0;
            try {
                p = paired_t_test(a, b).p;
            } catch (const contract_error&) {
                // identical scores carry no evidence of a difference
            }
            report.p_values[metric][report.systems[s].name] = p;
        }
    }

    if (options.ratings) {
        const auto& ratings = *options.ratings;
        if (ratings.size() != corpus.size())
            throw contract_error("evaluate_systems: ratings misaligned with corpus");
        for (const auto& metric : report.metric_names) {
            const auto& scores = report.systems.front().per_example.at(metric);
            try {
                report.pearson_vs_ratings[metric] = pearson(scores, ratings);
                report.spearman_vs_ratings[metric] = spearman(scores, ratings);
            } catch (const contract_error&) {
                // constant scores: correlation undefined, omit the entry
            }
        }
    }
    return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write report: " + path);
    out << "system,example";
    for (const auto& m : report.metric_names) out << "," << m;
    out << "\n";
    for (const auto& sys : report.systems) {
        size_t n = sys.per_example.begin()->second.size();
        for (size_t i = 0; i < n; ++i) {
            out << sys.name << "," << i;
            for (const auto& m : report.metric_names)
                out << "," << sys.per_example.at(m)[i];
            out << "\n";
        }
    }
}

void write_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["designated_system"] = report.designated_system;
    j["metrics"] = report.metric_names;
    for (const auto& sys : report.systems) j["means"][sys.name] = sys.mean;
    for (const auto& [metric, by_system] : report.p_values)
        j["p_values"][metric] = by_system;
    if (!report.pearson_vs_ratings.empty()) {
        j["correlation"]["pearson"] = report.pearson_vs_ratings;
        j["correlation"]["spearman"] = report.spearman_vs_ratings;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write report: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace subjgen
