#include "subjgen/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include "subjgen/init.hpp"
#include "subjgen/optim.hpp"
#include "subjgen/text.hpp"

namespace subjgen {

using ad::Tape;
using ad::Tensor;
using ad::Var;

void TrainConfig::validate() const {
    if (batch_size < 1 || patience < 1 || max_epochs < 1 || max_ext < 1 || max_len < 1 ||
        lr_supervised <= 0 || lr_rl <= 0 || clip_norm <= 0)
        throw contract_error("train config: all values must be positive");
}

EarlyStopDecision early_stop(const std::vector<double>& history, int patience, StopMode mode) {
    if (history.empty()) throw contract_error("early_stop: empty history");
    if (patience < 1) throw contract_error("early_stop: patience must be >= 1");
    EarlyStopDecision d;
    for (size_t i = 1; i < history.size(); ++i) {
        bool better = mode == StopMode::min ? history[i] < history[d.best_index]
                                            : history[i] > history[d.best_index];
        if (better) d.best_index = static_cast<int>(i);
    }
    int since_best = static_cast<int>(history.size()) - 1 - d.best_index;
    d.halt = since_best >= patience;
    return d;
}

TrainLog::TrainLog(const std::string& path) : path_(path) {
    std::ofstream out(path_, std::ios::binary);
    if (!out) throw io_error("cannot write training log: " + path_);
    out << "epoch,split,loss,esqe_mean\n";
}

void TrainLog::row(int epoch, const std::string& split, double loss, double esqe_mean) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << epoch << "," << split << "," << loss << "," << esqe_mean << "\n";
}

std::vector<LabeledEmail> label_corpus(const std::vector<Email>& emails, const Vocabulary& vocab,
                                       const std::set<std::string>& stopwords,
                                       const ExtractorDims& dims) {
    std::vector<LabeledEmail> out;
    for (const Email& e : emails) {
        LabeledEmail le;
        le.id = e.id;
        le.sentences = sentence_token_ids(e, vocab, dims);
        le.sentence_tokens = e.body_sentences;
        le.body_ids = vocab.encode(e.all_body_tokens());
        le.subject_tokens = e.subject_tokens;
        le.positives = proxy_labels(e, stopwords).positive_indices;
        out.push_back(std::move(le));
    }
    return out;
}

namespace {

std::vector<Tensor> snapshot_values(const std::vector<ad::Parameter*>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const ad::Parameter* p : params) out.push_back(p->value);
    return out;
}

void restore_values(const std::vector<ad::Parameter*>& params, const std::vector<Tensor>& vals) {
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = vals[i];
}

}  // namespace

FitResult pretrain_extractor(ExtractorModel& model, const std::vector<LabeledEmail>& train,
                             const std::vector<LabeledEmail>& dev, const TrainConfig& config,
                             TrainLog* log) {
    config.validate();
    if (train.empty() || dev.empty())
        throw contract_error("pretrain_extractor: empty train or dev split");

    std::vector<ad::Parameter*> params = model.parameters();
    ad::Adam opt(params, {.lr = config.lr_supervised});
    Rng shuffle_rng(Rng(config.seed).split("ext.shuffle").next_u64());

    auto dev_loss = [&]() {
        double total = 0.0;
        for (const auto& le : dev) {
            Tape tape;
            EncodedDocument enc = encode_document(tape, le.sentences, model);
            total += tape.val(extractor_loss(tape, enc, model, le.positives)).item();
        }
        return total / static_cast<double>(dev.size());
    };

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    FitResult res;
    std::vector<double> history;
    std::vector<Tensor> best_values = snapshot_values(params);
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double train_loss = 0.0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            opt.zero_grad();
            Tape tape;
            std::vector<Var> losses;
            for (size_t k = start; k < end; ++k) {
                const LabeledEmail& le = train[order[k]];
                EncodedDocument enc = encode_document(tape, le.sentences, model);
                losses.push_back(extractor_loss(tape, enc, model, le.positives));
            }
            Var loss = tape.mean(tape.concat(losses));
            train_loss += tape.val(loss).item() * static_cast<double>(end - start);
            tape.backward(loss);
            ad::clip_global_norm(params, config.clip_norm);
            opt.step();
        }
        train_loss /= static_cast<double>(train.size());
        double dv = dev_loss();
        history.push_back(dv);
        res.epochs_run = epoch + 1;
        if (log) log->row(epoch, "dev", dv, 0.0);
        EarlyStopDecision d = early_stop(history, config.patience, StopMode::min);
        if (d.best_index == epoch) best_values = snapshot_values(params);
        res.best_epoch = d.best_index;
        if (d.halt) break;
    }
    restore_values(params, best_values);
    res.best_dev = history[static_cast<size_t>(res.best_epoch)];
    return res;
}

PrecisionRecall extraction_precision_recall(ExtractorModel& model,
                                            const std::vector<LabeledEmail>& data, int max_ext) {
    double tp = 0, selected = 0, positive = 0;
    for (const auto& le : data) {
        std::vector<int> sel = extract_greedy(le.sentences, model, max_ext);
        selected += static_cast<double>(sel.size());
        positive += static_cast<double>(le.positives.size());
        for (int s : sel)
            if (std::find(le.positives.begin(), le.positives.end(), s) != le.positives.end())
                tp += 1;
    }
    PrecisionRecall pr;
    if (selected > 0) pr.precision = tp / selected;
    if (positive > 0) pr.recall = tp / positive;
    return pr;
}

namespace {

struct AbsPair {
    Source src;
    std::vector<std::string> target;
};

std::vector<AbsPair> abstractor_pairs(const std::vector<LabeledEmail>& data,
                                      const Vocabulary& vocab) {
    std::vector<AbsPair> out;
    for (const auto& le : data) {
        std::vector<std::vector<std::string>> sel;
        for (int idx : le.positives) sel.push_back(le.sentence_tokens[static_cast<size_t>(idx)]);
        if (sel.empty()) continue;
        out.push_back({build_source(sel, vocab), le.subject_tokens});
    }
    return out;
}

}  // namespace

FitResult pretrain_abstractor(AbstractorModel& model, const std::vector<LabeledEmail>& train,
                              const std::vector<LabeledEmail>& dev, const Vocabulary& vocab,
                              const TrainConfig& config, TrainLog* log) {
    config.validate();
    std::vector<AbsPair> train_pairs = abstractor_pairs(train, vocab);
    std::vector<AbsPair> dev_pairs = abstractor_pairs(dev, vocab);
    if (train_pairs.empty() || dev_pairs.empty())
        throw contract_error("pretrain_abstractor: empty train or dev pairs");

    std::vector<ad::Parameter*> params = model.parameters();
    ad::Adam opt(params, {.lr = config.lr_supervised});
    Rng shuffle_rng(Rng(config.seed).split("abs.shuffle").next_u64());

    auto dev_loss = [&]() {
        double total = 0.0;
        for (const auto& pr : dev_pairs) {
            Tape tape;
            total += tape.val(abstractor_loss(tape, model, pr.src, pr.target, vocab)).item();
        }
        return total / static_cast<double>(dev_pairs.size());
    };

    std::vector<size_t> order(train_pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    FitResult res;
    std::vector<double> history;
    std::vector<Tensor> best_values = snapshot_values(params);
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            opt.zero_grad();
            Tape tape;
            std::vector<Var> losses;
            for (size_t k = start; k < end; ++k) {
                const AbsPair& pr = train_pairs[order[k]];
                losses.push_back(abstractor_loss(tape, model, pr.src, pr.target, vocab));
            }
            Var loss = tape.mean(tape.concat(losses));
            tape.backward(loss);
            ad::clip_global_norm(params, config.clip_norm);
            opt.step();
        }
        double dv = dev_loss();
        history.push_back(dv);
        res.epochs_run = epoch + 1;
        if (log) log->row(epoch, "dev", dv, 0.0);
        EarlyStopDecision d = early_stop(history, config.patience, StopMode::min);
        if (d.best_index == epoch) best_values = snapshot_values(params);
        res.best_epoch = d.best_index;
        if (d.halt) break;
    }
    restore_values(params, best_values);
    res.best_dev = history[static_cast<size_t>(res.best_epoch)];
    return res;
}

std::vector<std::string> generate_for_email(ExtractorModel& extractor,
                                            AbstractorModel& abstractor,
                                            const LabeledEmail& email, const Vocabulary& vocab,
                                            const TrainConfig& config, int beam) {
    std::vector<int> sel = extract_greedy(email.sentences, extractor, config.max_ext);
    std::sort(sel.begin(), sel.end());  // document order for the rewriter
    std::vector<std::vector<std::string>> sentences;
    for (int idx : sel) sentences.push_back(email.sentence_tokens[static_cast<size_t>(idx)]);
    return generate_subject(sentences, abstractor, vocab, config.max_len, beam);
}

double keyword_recall(AbstractorModel& model, ExtractorModel& extractor,
                      const std::vector<LabeledEmail>& data, const Vocabulary& vocab,
                      const std::set<std::string>& stopwords, const TrainConfig& config) {
    double total = 0.0;
    int counted = 0;
    for (const auto& le : data) {
        std::set<std::string> keywords;
        for (const auto& t : le.subject_tokens)
            if (!is_punct_token(t) && !stopwords.count(t)) keywords.insert(t);
        if (keywords.empty()) continue;
        std::vector<std::string> gen = generate_for_email(extractor, model, le, vocab, config);
        std::set<std::string> got(gen.begin(), gen.end());
        int hit = 0;
        for (const auto& k : keywords) hit += got.count(k) ? 1 : 0;
        total += static_cast<double>(hit) / static_cast<double>(keywords.size());
        ++counted;
    }
    return counted ? total / counted : 0.0;
}

BaselineNetwork::BaselineNetwork(const ExtractorDims& dims, Rng& rng)
    : hidden_(dims.hidden), dvec_(dims.dvec()) {
    in_proj = ad::Parameter("bl.in_proj", ad::xavier_init({hidden_, dvec_}, rng));
    lstm_w = ad::Parameter("bl.lstm.w", ad::xavier_init({4 * hidden_, 2 * hidden_}, rng));
    lstm_b = ad::Parameter("bl.lstm.b", ad::lstm_bias_init(hidden_));
    head_w = ad::Parameter("bl.head.w", ad::xavier_init({1, hidden_}, rng));
    head_b = ad::Parameter("bl.head.b", Tensor({1}));
}

std::vector<ad::Parameter*> BaselineNetwork::parameters() {
    return {&in_proj, &lstm_w, &lstm_b, &head_w, &head_b};
}

std::vector<const ad::Parameter*> BaselineNetwork::parameters() const {
    auto mut = const_cast<BaselineNetwork*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<Var> BaselineNetwork::forward(Tape& tape, const std::vector<Tensor>& prev_d) {
    std::vector<Var> out;
    Var h = tape.zeros({hidden_});
    Var c = tape.zeros({hidden_});
    for (size_t t = 0; t < prev_d.size(); ++t) {
        Var x;
        if (prev_d[t].size() == 0)
            x = tape.zeros({hidden_});
        else
            x = tape.matvec(tape.param(in_proj), tape.input(prev_d[t]));
        Var hc = tape.lstm_cell(tape.param(lstm_w), tape.param(lstm_b), x, h, c);
        h = tape.slice(hc, 0, hidden_);
        c = tape.slice(hc, hidden_, hidden_);
        out.push_back(tape.pick(tape.affine(tape.param(head_w), h, tape.param(head_b)), 0));
    }
    return out;
}

double mean_pipeline_esqe(ExtractorModel& extractor, AbstractorModel& abstractor, EsqeModel& esqe,
                          const std::vector<LabeledEmail>& data, const Vocabulary& vocab,
                          const TrainConfig& config) {
    double total = 0.0;
    int counted = 0;
    for (const auto& le : data) {
        std::vector<std::string> gen = generate_for_email(extractor, abstractor, le, vocab,
                                                          config);
        if (gen.empty()) continue;
        total += esqe_score(esqe, le.body_ids, vocab.encode(gen));
        ++counted;
    }
    return counted ? total / counted : 0.0;
}

RlResult rl_train(ExtractorModel& policy, BaselineNetwork& baseline, AbstractorModel& abstractor,
                  EsqeModel& esqe, const std::vector<LabeledEmail>& train,
                  const std::vector<LabeledEmail>& dev, const Vocabulary& vocab,
                  const TrainConfig& config, TrainLog* log, const RewardFn* reward_override) {
    config.validate();
    if (train.empty() || dev.empty()) throw contract_error("rl_train: empty train or dev split");

    std::vector<ad::Parameter*> policy_params = policy.parameters();
    std::vector<ad::Parameter*> baseline_params = baseline.parameters();
    ad::Adam policy_opt(policy_params, {.lr = config.lr_rl});
    ad::Adam baseline_opt(baseline_params, {.lr = config.lr_rl});

    Rng rng(config.seed);
    Rng shuffle_rng = rng.split("rl.shuffle");
    Rng episode_rng = rng.split("rl.episode");

    RlResult res;
    bool baseline_primed = false;
    res.pre_dev_esqe = mean_pipeline_esqe(policy, abstractor, esqe, dev, vocab, config);
    res.best_dev_esqe = res.pre_dev_esqe;
    std::vector<Tensor> best_values = snapshot_values(policy_params);
    if (log) log->row(-1, "dev", 0.0, res.pre_dev_esqe);

    std::vector<double> history = {res.pre_dev_esqe};  // pre-RL candidate at index 0

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            policy_opt.zero_grad();
            baseline_opt.zero_grad();
            // the baseline must sit near the reward scale before advantages
            // mean anything; prime its bias from the first batch
            if (!baseline_primed) {
                double reward_sum = 0.0;
                int reward_n = 0;
                Rng probe_rng = episode_rng;  // copy; sampling stream unchanged
                for (size_t k = start; k < end; ++k) {
                    const LabeledEmail& le = train[order[k]];
                    Tape tape;
                    EncodedDocument enc = encode_document(tape, le.sentences, policy);
                    ExtractionEpisode ep = sample_episode(tape, enc, policy, probe_rng,
                                                          config.max_ext, true);
                    std::vector<int> sel = ep.selected;
                    std::sort(sel.begin(), sel.end());
                    std::vector<std::vector<std::string>> sentences;
                    for (int idx : sel)
                        sentences.push_back(le.sentence_tokens[static_cast<size_t>(idx)]);
                    std::vector<std::string> gen =
                        generate_subject(sentences, abstractor, vocab, config.max_len, 1);
                    if (gen.empty()) continue;
                    double r = reward_override
                                   ? (*reward_override)(le, gen)
                                   : esqe_score(esqe, le.body_ids, vocab.encode(gen));
                    if (!std::isfinite(r)) continue;
                    reward_sum += r;
                    ++reward_n;
                }
                if (reward_n > 0) baseline.head_b.value.fill(reward_sum / reward_n);
                baseline_primed = true;
            }
            int batch_episodes = 0;
            for (size_t k = start; k < end; ++k) {
                const LabeledEmail& le = train[order[k]];
                Tape tape;
                EncodedDocument enc = encode_document(tape, le.sentences, policy);
                ExtractionEpisode ep = sample_episode(tape, enc, policy, episode_rng,
                                                      config.max_ext, true);
                // frozen rewriter on the sampled selection, document order
                std::vector<int> sel = ep.selected;
                std::sort(sel.begin(), sel.end());
                std::vector<std::vector<std::string>> sentences;
                for (int idx : sel)
                    sentences.push_back(le.sentence_tokens[static_cast<size_t>(idx)]);
                std::vector<std::string> gen =
                    generate_subject(sentences, abstractor, vocab, config.max_len, 1);
                if (gen.empty()) {
                    ++res.skipped_episodes;
                    std::cerr << "rl_train: empty generation for " << le.id
                              << ", episode skipped\n";
                    continue;
                }
                double reward = reward_override
                                    ? (*reward_override)(le, gen)
                                    : esqe_score(esqe, le.body_ids, vocab.encode(gen));
                if (!std::isfinite(reward)) {
                    ++res.skipped_episodes;
                    std::cerr << "rl_train: non-finite reward for " << le.id
                              << ", episode skipped\n";
                    continue;
                }
                ep.reward = reward;

                // baseline inputs: detached representations of the previous
                // selection per decision step
                std::vector<Tensor> prev_d(ep.actions.size());
                for (size_t t = 1; t < ep.actions.size(); ++t) {
                    int prev_action = ep.actions[t - 1];
                    prev_d[t] = tape.val(enc.d[static_cast<size_t>(prev_action)]);
                }
                std::vector<Var> b_vars = baseline.forward(tape, prev_d);

                std::vector<Var> policy_terms;
                std::vector<Var> baseline_terms;
                for (size_t t = 0; t < ep.actions.size(); ++t) {
                    double b_t = tape.val(b_vars[t]).item();
                    ep.baselines.push_back(b_t);
                    double advantage = reward - b_t;  // constant inside the policy term
                    policy_terms.push_back(tape.scale(ep.action_logprobs[t], -advantage));
                    Var diff = tape.sub(b_vars[t], tape.input(Tensor::scalar(reward)));
                    baseline_terms.push_back(tape.square(diff));
                }
                Var email_loss = tape.add(tape.sum(tape.concat(policy_terms)),
                                          tape.mean(tape.concat(baseline_terms)));
                tape.backward(email_loss);
                ++batch_episodes;
            }
            if (batch_episodes == 0) continue;
            // mean gradient over the batch
            double inv = 1.0 / static_cast<double>(batch_episodes);
            for (ad::Parameter* p : policy_params)
                for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= inv;
            for (ad::Parameter* p : baseline_params)
                for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= inv;
            double pre_clip = ad::clip_global_norm(policy_params, config.clip_norm);
            res.max_policy_grad_norm = std::max(res.max_policy_grad_norm, pre_clip);
            ad::clip_global_norm(baseline_params, config.clip_norm);
            policy_opt.step();
            baseline_opt.step();
        }
        double dv = mean_pipeline_esqe(policy, abstractor, esqe, dev, vocab, config);
        history.push_back(dv);
        res.epochs_run = epoch + 1;
        if (log) log->row(epoch, "dev", 0.0, dv);
        EarlyStopDecision d = early_stop(history, config.patience, StopMode::max);
        if (d.best_index == epoch + 1) {
            best_values = snapshot_values(policy_params);
            res.best_epoch = epoch;
            res.best_dev_esqe = dv;
        }
        if (d.halt) break;
    }
    restore_values(policy_params, best_values);
    return res;
}

uint64_t parameter_checksum(const std::vector<const ad::Parameter*>& params) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* data, size_t len) {
        const unsigned char* bytes = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const ad::Parameter* p : params) {
        mix(p->name.data(), p->name.size());
        for (size_t i = 0; i < p->value.size(); ++i) {
            double v = p->value[i];
            mix(&v, sizeof(v));
        }
    }
    return h;
}

uint64_t parameter_checksum(const std::vector<ad::Parameter*>& params) {
    std::vector<const ad::Parameter*> view(params.begin(), params.end());
    return parameter_checksum(view);
}

}  // namespace subjgen

