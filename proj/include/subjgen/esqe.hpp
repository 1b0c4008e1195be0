#pragma once

#include <set>
#include <string>
#include <vector>

#include "subjgen/corpus.hpp"
#include "subjgen/rng.hpp"
#include "subjgen/tape.hpp"
#include "subjgen/vocab.hpp"

namespace subjgen {

struct EsqeDims {
    int emb = 128;
    int filters = 100;
    std::vector<int> windows = {3, 4, 5};
    int ff_hidden = 256;

    int conv_out() const { return filters * static_cast<int>(windows.size()); }
    int max_window() const;
};

// Reference-less subject quality regressor: separate CNN encoders for body
// and subject feed a feed-forward head with an unbounded scalar output.
class EsqeModel {
public:
    EsqeModel(int vocab_size, EsqeDims dims, Rng& rng);

    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;
    const EsqeDims& dims() const { return dims_; }
    int vocab_size() const { return vocab_size_; }

    ad::Parameter body_emb, subj_emb;
    std::vector<ad::Parameter> body_conv_w, body_conv_b;
    std::vector<ad::Parameter> subj_conv_w, subj_conv_b;
    ad::Parameter ff1_w, ff1_b;  // hidden layer with ReLU
    ad::Parameter ff2_w, ff2_b;  // linear scalar head

private:
    EsqeDims dims_;
    int vocab_size_;
};

// Scalar quality score on the tape (whole-body encoding).
ad::Var esqe_score_var(ad::Tape& tape, EsqeModel& model, const std::vector<int>& body_ids,
                       const std::vector<int>& subject_ids);

// Convenience forward pass without gradients.
double esqe_score(EsqeModel& model, const std::vector<int>& body_ids,
                  const std::vector<int>& subject_ids);

double esqe_score_tokens(EsqeModel& model, const Vocabulary& vocab,
                         const std::vector<std::string>& body_tokens,
                         const std::vector<std::string>& subject_tokens);

struct RatingExample {
    std::vector<int> body_ids;
    std::vector<int> subject_ids;
    double rating = 0.0;  // in [1, 4]
};

struct EsqeTrainConfig {
    int batch_size = 16;
    double lr = 1e-3;
    double clip_norm = 2.0;
    int patience = 3;
    int max_epochs = 40;
    uint64_t seed = 1;
};

struct EsqeTrainResult {
    double best_dev_mse = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
    bool constant_target_warning = false;
};

// Minimizes mean squared error between the score and the rating; early
// stops on dev MSE and restores the best-dev parameters.
EsqeTrainResult train_esqe(EsqeModel& model, const std::vector<RatingExample>& train,
                           const std::vector<RatingExample>& dev, const EsqeTrainConfig& config);

// Deterministic surrogate for human ratings on synthetic emails with known
// planted keywords (the non-stopword gold subject tokens):
//   1 + 3 * (0.3 * fluency + 0.7 * overlap_f1), clipped to [1, 4],
// fluency = 1 - repeated-token fraction of the candidate.
double synthetic_rating(const Email& email, const std::vector<std::string>& candidate,
                        const std::set<std::string>& stopwords);

// JSON Lines {body, subject, rating} for externally supplied ratings.
struct RawRating {
    std::string body;
    std::string subject;
    double rating = 0.0;
};
std::vector<RawRating> load_ratings_jsonl(const std::string& path);

// Oracle-rated training mix for the desk-scale corpus: per email the gold
// subject plus one distractor (shuffled gold or another email's subject,
// equally likely), so the dataset is half gold, a quarter each distractor
// kind.
std::vector<RatingExample> build_rating_dataset(const std::vector<Email>& emails,
                                                const Vocabulary& vocab,
                                                const std::set<std::string>& stopwords, Rng& rng);

}  // namespace subjgen
