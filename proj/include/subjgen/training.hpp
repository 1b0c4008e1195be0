#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subjgen/abstractor.hpp"
#include "subjgen/corpus.hpp"
#include "subjgen/esqe.hpp"
#include "subjgen/extractor.hpp"

namespace subjgen {

struct TrainConfig {
    int batch_size = 16;
    double lr_supervised = 1e-3;
    double lr_rl = 1e-4;
    double clip_norm = 2.0;
    int patience = 3;
    int max_epochs = 30;
    uint64_t seed = 1;
    int max_ext = 5;   // extraction cap (greedy and episodes)
    int max_len = 12;  // abstractor generation cap

    void validate() const;
};

enum class StopMode { min, max };

struct EarlyStopDecision {
    bool halt = false;
    int best_index = 0;
};

// Halt when the last `patience` entries all fail to improve on the best;
// ties count as non-improvements.
EarlyStopDecision early_stop(const std::vector<double>& history, int patience, StopMode mode);

// Appends one CSV row per epoch: epoch,split,loss,esqe_mean.
class TrainLog {
public:
    explicit TrainLog(const std::string& path);
    void row(int epoch, const std::string& split, double loss, double esqe_mean);

private:
    std::string path_;
};

struct LabeledEmail {
    std::string id;
    std::vector<std::vector<int>> sentences;             // padded token ids
    std::vector<std::vector<std::string>> sentence_tokens;
    std::vector<int> body_ids;                           // whole body for scoring
    std::vector<std::string> subject_tokens;
    std::vector<int> positives;                          // proxy-positive indices
};

// Joins corpus, vocabulary and proxy labels into training records.
std::vector<LabeledEmail> label_corpus(const std::vector<Email>& emails, const Vocabulary& vocab,
                                       const std::set<std::string>& stopwords,
                                       const ExtractorDims& dims);

// Supervised pointer-network training; returns with the best-dev
// parameters restored.
struct FitResult {
    double best_dev = 0.0;
    int best_epoch = -1;
    int epochs_run = 0;
};
FitResult pretrain_extractor(ExtractorModel& model, const std::vector<LabeledEmail>& train,
                             const std::vector<LabeledEmail>& dev, const TrainConfig& config,
                             TrainLog* log = nullptr);

// Greedy-extraction precision/recall against proxy positives.
struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};
PrecisionRecall extraction_precision_recall(ExtractorModel& model,
                                            const std::vector<LabeledEmail>& data, int max_ext);

// Supervised rewriter training on (proxy-positive sentences, gold subject)
// pairs drawn from the labeled corpus.
FitResult pretrain_abstractor(AbstractorModel& model, const std::vector<LabeledEmail>& train,
                              const std::vector<LabeledEmail>& dev, const Vocabulary& vocab,
                              const TrainConfig& config, TrainLog* log = nullptr);

// Unigram recall of generated subjects against non-stopword gold tokens.
double keyword_recall(AbstractorModel& model, ExtractorModel& extractor,
                      const std::vector<LabeledEmail>& data, const Vocabulary& vocab,
                      const std::set<std::string>& stopwords, const TrainConfig& config);

// Scalar reward head mirroring the extractor decoder: its own projection
// of the previous selection, its own LSTM, a linear head per step.
class BaselineNetwork {
public:
    BaselineNetwork(const ExtractorDims& dims, Rng& rng);
    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;

    // b_t for each decision step; prev_d[t] holds the (detached) document
    // representation of the selection made before step t, empty tensor at 0.
    std::vector<ad::Var> forward(ad::Tape& tape, const std::vector<ad::Tensor>& prev_d);

    ad::Parameter in_proj;
    ad::Parameter lstm_w, lstm_b;
    ad::Parameter head_w, head_b;

private:
    int hidden_;
    int dvec_;
};

struct RlResult {
    double pre_dev_esqe = 0.0;
    double best_dev_esqe = 0.0;
    int best_epoch = -1;  // -1 keeps the pre-RL policy
    int epochs_run = 0;
    int skipped_episodes = 0;
    double max_policy_grad_norm = 0.0;  // pre-clip, over all batches
};

// test hook: replaces the estimator reward
using RewardFn = std::function<double(const LabeledEmail&, const std::vector<std::string>&)>;

// REINFORCE over sampled extraction episodes with the frozen abstractor
// producing subjects and the frozen estimator scoring them. The baseline
// regresses the episode reward per step; advantages treat it as constant.
// Returns with the best policy by dev mean score restored (the pre-RL
// checkpoint counts as the initial candidate).
RlResult rl_train(ExtractorModel& policy, BaselineNetwork& baseline, AbstractorModel& abstractor,
                  EsqeModel& esqe, const std::vector<LabeledEmail>& train,
                  const std::vector<LabeledEmail>& dev, const Vocabulary& vocab,
                  const TrainConfig& config, TrainLog* log = nullptr,
                  const RewardFn* reward_override = nullptr);

// Mean estimator score of the greedy pipeline over a split (emails whose
// generation comes out empty are skipped).
double mean_pipeline_esqe(ExtractorModel& extractor, AbstractorModel& abstractor, EsqeModel& esqe,
                          const std::vector<LabeledEmail>& data, const Vocabulary& vocab,
                          const TrainConfig& config);

// Greedy extract-then-rewrite for one email.
std::vector<std::string> generate_for_email(ExtractorModel& extractor,
                                            AbstractorModel& abstractor,
                                            const LabeledEmail& email, const Vocabulary& vocab,
                                            const TrainConfig& config, int beam = 1);

uint64_t parameter_checksum(const std::vector<const ad::Parameter*>& params);
uint64_t parameter_checksum(const std::vector<ad::Parameter*>& params);

}  // namespace subjgen
