#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "subjgen/stopwords.hpp"
#include "subjgen/synthetic.hpp"
#include "subjgen/training.hpp"

using namespace subjgen;
using ad::Tape;
using ad::Var;

namespace {

ExtractorDims small_ext_dims() {
    ExtractorDims d;
    d.emb = 16;
    d.filters = 12;
    d.windows = {2, 3};
    d.hidden = 24;
    return d;
}

AbstractorDims small_abs_dims() {
    AbstractorDims d;
    d.emb = 16;
    d.hidden = 24;
    return d;
}

EsqeDims small_esqe_dims() {
    EsqeDims d;
    d.emb = 8;
    d.filters = 6;
    d.windows = {2, 3};
    d.ff_hidden = 12;
    return d;
}

struct Pipeline {
    std::vector<LabeledEmail> train, dev;
    Vocabulary vocab;
};

Pipeline make_pipeline(int n_train, int n_dev, uint64_t seed) {
    auto synth = generate_synthetic(n_train + n_dev, seed);
    std::vector<Email> all = strip_synthetic(synth);
    std::vector<Email> train(all.begin(), all.begin() + n_train);
    std::vector<Email> dev(all.begin() + n_train, all.end());
    Vocabulary vocab = Vocabulary::build(train, 1);
    const auto& stop = builtin_stopwords();
    ExtractorDims dims = small_ext_dims();
    return {label_corpus(train, vocab, stop, dims), label_corpus(dev, vocab, stop, dims),
            std::move(vocab)};
}

}  // namespace

TEST_CASE("early_stop rule") {
    SUBCASE("worsening tail after an early best") {
        EarlyStopDecision d = early_stop({5, 4, 4.5, 4.6, 4.7}, 3, StopMode::min);
        CHECK(d.halt);
        CHECK(d.best_index == 1);
    }
    SUBCASE("strictly improving history never halts") {
        std::vector<double> h;
        for (int i = 0; i < 30; ++i) {
            h.push_back(100.0 - i);
            CHECK(!early_stop(h, 3, StopMode::min).halt);
        }
    }
    SUBCASE("ties count as non-improvements") {
        EarlyStopDecision d = early_stop({5, 5, 5, 5}, 3, StopMode::min);
        CHECK(d.halt);
        CHECK(d.best_index == 0);
    }
    SUBCASE("max mode") {
        EarlyStopDecision d = early_stop({1, 2, 3, 2.5, 2.9, 3.0}, 3, StopMode::max);
        CHECK(d.halt);
        CHECK(d.best_index == 2);
    }
    SUBCASE("contract") {
        CHECK_THROWS_AS(early_stop({}, 3, StopMode::min), contract_error);
        CHECK_THROWS_AS(early_stop({1.0}, 0, StopMode::min), contract_error);
    }
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
}

TEST_CASE("label_corpus ties labels to proxy positives") {
    auto synth = generate_synthetic(10, 91);
    std::vector<Email> corpus = strip_synthetic(synth);
    Vocabulary vocab = Vocabulary::build(corpus, 1);
    const auto& stop = builtin_stopwords();
    auto labeled = label_corpus(corpus, vocab, stop, small_ext_dims());
    REQUIRE(labeled.size() == corpus.size());
    for (size_t i = 0; i < labeled.size(); ++i) {
        CHECK(labeled[i].positives == proxy_labels(corpus[i], stop).positive_indices);
        CHECK(labeled[i].sentences.size() == corpus[i].body_sentences.size());
        CHECK(!labeled[i].positives.empty());
    }
}

TEST_CASE("extractor pretraining reaches high dev precision and is deterministic") {
    Pipeline p = make_pipeline(60, 20, 301);
    TrainConfig cfg;
    cfg.max_epochs = 20;
    cfg.lr_supervised = 3e-3;
    cfg.seed = 9;

    auto run = [&]() {
        Rng init(42);
        ExtractorModel model(p.vocab.size(), small_ext_dims(), init);
        pretrain_extractor(model, p.train, p.dev, cfg);
        return model;
    };
    ExtractorModel a = run();
    PrecisionRecall pr = extraction_precision_recall(a, p.dev, cfg.max_ext);
    CHECK(pr.precision >= 0.9);

    ExtractorModel b = run();
    CHECK(parameter_checksum(a.parameters()) == parameter_checksum(b.parameters()));
}

TEST_CASE("abstractor pretraining early-stops on patience and restores best") {
    Pipeline p = make_pipeline(24, 8, 302);
    Rng init(43);
    AbstractorModel model(p.vocab.size(), small_abs_dims(), init);
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.lr_supervised = 5e-3;
    cfg.patience = 3;
    cfg.seed = 10;
    FitResult res = pretrain_abstractor(model, p.train, p.dev, p.vocab, cfg);
    CHECK(res.epochs_run <= cfg.max_epochs);
    // halting implies the last `patience` epochs did not beat the best
    if (res.epochs_run < cfg.max_epochs)
        CHECK(res.best_epoch <= res.epochs_run - 1 - cfg.patience);
}

TEST_CASE("training log rows") {
    std::string path = "train_log_test.csv";
    {
        TrainLog log(path);
        log.row(0, "dev", 1.5, 2.0);
        log.row(1, "dev", 1.2, 2.1);
    }
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,split,loss,esqe_mean");
    std::getline(in, line);
    CHECK(line == "0,dev,1.5,2");
    std::remove(path.c_str());
}

TEST_CASE("policy gradient is exactly zero under a constant reward with matched baseline") {
    Pipeline p = make_pipeline(16, 4, 303);
    Rng init(44);
    ExtractorModel policy(p.vocab.size(), small_ext_dims(), init);
    AbstractorModel abstractor(p.vocab.size(), small_abs_dims(), init);
    EsqeModel esqe(p.vocab.size(), small_esqe_dims(), init);
    BaselineNetwork baseline(small_ext_dims(), init);

    const double c = 2.5;
    baseline.head_w.value.zero();
    baseline.head_b.value.fill(c);
    RewardFn constant_reward = [c](const LabeledEmail&, const std::vector<std::string>&) {
        return c;
    };

    TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.patience = 5;
    cfg.seed = 11;
    RlResult res = rl_train(policy, baseline, abstractor, esqe, p.train, p.dev, p.vocab, cfg,
                            nullptr, &constant_reward);
    CHECK(res.max_policy_grad_norm < 1e-8);
    // matched baseline stays matched: its loss gradient is zero too
    CHECK(baseline.head_b.value[0] == c);
}

TEST_CASE("score-function estimator is unbiased under constant reward") {
    // tiny policy, one document, 10k sampled episodes, no baseline:
    // the mean of grad sum_t log pi(a_t) should vanish coordinate-wise
    Rng init(45);
    ExtractorDims dims;
    dims.emb = 4;
    dims.filters = 3;
    dims.windows = {2};
    dims.hidden = 4;
    ExtractorModel policy(20, dims, init);
    std::vector<std::vector<int>> doc = {{4, 5}, {6, 7}, {8, 9}};

    auto params = policy.parameters();
    size_t total = 0;
    for (auto* p : params) total += p->value.size();
    std::vector<double> sum(total, 0.0), sumsq(total, 0.0);

    const int n_episodes = 10000;
    Rng ep_rng(777);
    for (int e = 0; e < n_episodes; ++e) {
        for (auto* p : params) p->zero_grad();
        Tape tape;
        EncodedDocument enc = encode_document(tape, doc, policy);
        ExtractionEpisode ep = sample_episode(tape, enc, policy, ep_rng, 3, false);
        Var obj = tape.sum(tape.concat(ep.action_logprobs));
        tape.backward(obj);
        size_t off = 0;
        for (auto* p : params)
            for (size_t i = 0; i < p->grad.size(); ++i, ++off) {
                sum[off] += p->grad[i];
                sumsq[off] += p->grad[i] * p->grad[i];
            }
    }
    int violations = 0;
    for (size_t i = 0; i < total; ++i) {
        double mean = sum[i] / n_episodes;
        double var = sumsq[i] / n_episodes - mean * mean;
        double sigma = std::sqrt(std::max(var, 0.0) / n_episodes);
        if (std::abs(mean) > 3.0 * sigma + 1e-12) ++violations;
    }
    // 3-sigma bound: ~0.3% expected violation rate by chance
    CHECK(violations <= static_cast<int>(total / 50));
}

TEST_CASE("rl training keeps frozen models frozen and never worsens dev score") {
    Pipeline p = make_pipeline(24, 8, 304);
    Rng init(46);
    ExtractorModel policy(p.vocab.size(), small_ext_dims(), init);
    AbstractorModel abstractor(p.vocab.size(), small_abs_dims(), init);
    EsqeModel esqe(p.vocab.size(), small_esqe_dims(), init);
    BaselineNetwork baseline(small_ext_dims(), init);

    TrainConfig pre_cfg;
    pre_cfg.max_epochs = 6;
    pre_cfg.lr_supervised = 3e-3;
    pre_cfg.seed = 12;
    pretrain_extractor(policy, p.train, p.dev, pre_cfg);
    pretrain_abstractor(abstractor, p.train, p.dev, p.vocab, pre_cfg);

    uint64_t abs_sum = parameter_checksum(abstractor.parameters());
    uint64_t esqe_sum = parameter_checksum(esqe.parameters());

    TrainConfig cfg;
    cfg.max_epochs = 2;
    cfg.seed = 13;
    RlResult res = rl_train(policy, baseline, abstractor, esqe, p.train, p.dev, p.vocab, cfg);
    CHECK(parameter_checksum(abstractor.parameters()) == abs_sum);
    CHECK(parameter_checksum(esqe.parameters()) == esqe_sum);
    CHECK(res.best_dev_esqe >= res.pre_dev_esqe);
    double final_dev = mean_pipeline_esqe(policy, abstractor, esqe, p.dev, p.vocab, cfg);
    CHECK(final_dev == doctest::Approx(res.best_dev_esqe).epsilon(1e-9));
}

TEST_CASE("rl training is deterministic for a fixed seed") {
    Pipeline p = make_pipeline(12, 4, 305);
    auto run = [&]() {
        Rng init(47);
        ExtractorModel policy(p.vocab.size(), small_ext_dims(), init);
        AbstractorModel abstractor(p.vocab.size(), small_abs_dims(), init);
        EsqeModel esqe(p.vocab.size(), small_esqe_dims(), init);
        BaselineNetwork baseline(small_ext_dims(), init);
        TrainConfig cfg;
        cfg.max_epochs = 2;
        cfg.seed = 14;
        rl_train(policy, baseline, abstractor, esqe, p.train, p.dev, p.vocab, cfg);
        return parameter_checksum(policy.parameters());
    };
    CHECK(run() == run());
}
