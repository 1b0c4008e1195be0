#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "subjgen/corpus.hpp"

namespace subjgen {

using TokenList = std::vector<std::string>;

struct PrfScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Clipped n-gram overlap F1; multi-reference aggregation takes the best-F1
// reference. n must be 1 or 2.
PrfScore rouge_n(const TokenList& candidate, const std::vector<TokenList>& references, int n);

// Longest-common-subsequence F1, best reference.
PrfScore rouge_l(const TokenList& candidate, const std::vector<TokenList>& references);

// Two-stage (exact, then suffix-stem) one-to-one alignment chosen to
// minimize chunks; recall-weighted harmonic mean with the fragmentation
// penalty. Best reference.
double meteor(const TokenList& candidate, const std::vector<TokenList>& references);

// Compact suffix stripper used by the METEOR stem stage.
std::string stem(const std::string& word);

struct MeteorAlignment {
    int matches = 0;
    int chunks = 0;
};
// Exposed for oracle tests: alignment statistics against one reference.
MeteorAlignment meteor_align(const TokenList& candidate, const TokenList& reference);

// First two body sentences as the candidate subject.
TokenList lead2(const Email& email);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// average ranks for ties, 1-based
std::vector<double> fractional_ranks(const std::vector<double>& x);

struct TTestResult {
    double t = 0.0;
    double p = 0.0;  // two-sided
    int dof = 0;
};
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta, continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

struct SystemOutput {
    std::string name;
    std::vector<TokenList> subjects;  // aligned with the corpus
};

struct SystemScores {
    std::string name;
    std::map<std::string, std::vector<double>> per_example;  // metric -> scores
    std::map<std::string, double> mean;
};

struct EvalReport {
    std::vector<std::string> metric_names;
    std::vector<SystemScores> systems;
    // metric -> system -> two-sided p against the designated system
    std::map<std::string, std::map<std::string, double>> p_values;
    std::string designated_system;
    // metric -> correlation with mean ratings (first system only)
    std::map<std::string, double> pearson_vs_ratings;
    std::map<std::string, double> spearman_vs_ratings;
};

class EsqeModel;
class Vocabulary;

struct EvalOptions {
    const EsqeModel* esqe = nullptr;        // adds the reference-less column
    const Vocabulary* vocab = nullptr;      // required with esqe
    const std::vector<double>* ratings = nullptr;  // aligned mean ratings
    std::set<std::string> stopwords;        // empty/all-stopword outputs score 0
};

// Scores one system against gold plus annotated references (max
// aggregation). Reference-based metrics treat empty or all-stopword
// candidates as 0 instead of erroring.
SystemScores evaluate_system(const SystemOutput& output, const std::vector<Email>& corpus,
                             const EvalOptions& options);

// Full report over several aligned systems; the first is the designated
// baseline for paired t-tests.
EvalReport evaluate_systems(const std::vector<SystemOutput>& outputs,
                            const std::vector<Email>& corpus, const EvalOptions& options);

void write_report_csv(const EvalReport& report, const std::string& path);
void write_report_json(const EvalReport& report, const std::string& path);

}  // namespace subjgen
