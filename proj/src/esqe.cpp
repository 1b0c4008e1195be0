#include "subjgen/esqe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "subjgen/init.hpp"
#include "subjgen/optim.hpp"
#include "subjgen/text.hpp"

namespace subjgen {

using ad::Tape;
using ad::Tensor;
using ad::Var;

int EsqeDims::max_window() const {
    int m = 1;
    for (int w : windows) m = std::max(m, w);
    return m;
}

EsqeModel::EsqeModel(int vocab_size, EsqeDims dims, Rng& rng)
    : dims_(dims), vocab_size_(vocab_size) {
    if (vocab_size < 4) throw contract_error("esqe: vocabulary too small");
    int e = dims.emb;
    body_emb = ad::Parameter("esqe.body.emb", ad::uniform_init({vocab_size, e}, rng));
    subj_emb = ad::Parameter("esqe.subj.emb", ad::uniform_init({vocab_size, e}, rng));
    for (int w : dims.windows) {
        body_conv_w.emplace_back("esqe.body.conv" + std::to_string(w) + ".w",
                                 ad::xavier_init({dims.filters, w * e}, rng));
        body_conv_b.emplace_back("esqe.body.conv" + std::to_string(w) + ".b",
                                 Tensor({dims.filters}));
        subj_conv_w.emplace_back("esqe.subj.conv" + std::to_string(w) + ".w",
                                 ad::xavier_init({dims.filters, w * e}, rng));
        subj_conv_b.emplace_back("esqe.subj.conv" + std::to_string(w) + ".b",
                                 Tensor({dims.filters}));
    }
    ff1_w = ad::Parameter("esqe.ff1.w", ad::xavier_init({dims.ff_hidden, 2 * dims.conv_out()}, rng));
    ff1_b = ad::Parameter("esqe.ff1.b", Tensor({dims.ff_hidden}));
    ff2_w = ad::Parameter("esqe.ff2.w", ad::xavier_init({1, dims.ff_hidden}, rng));
    ff2_b = ad::Parameter("esqe.ff2.b", Tensor({1}));
}

std::vector<ad::Parameter*> EsqeModel::parameters() {
    std::vector<ad::Parameter*> out = {&body_emb, &subj_emb};
    for (auto& p : body_conv_w) out.push_back(&p);
    for (auto& p : body_conv_b) out.push_back(&p);
    for (auto& p : subj_conv_w) out.push_back(&p);
    for (auto& p : subj_conv_b) out.push_back(&p);
    for (ad::Parameter* p : {&ff1_w, &ff1_b, &ff2_w, &ff2_b}) out.push_back(p);
    return out;
}

std::vector<const ad::Parameter*> EsqeModel::parameters() const {
    auto mut = const_cast<EsqeModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

namespace {

Var cnn_encode(Tape& tape, EsqeModel& model, ad::Parameter& table,
               std::vector<ad::Parameter>& conv_w, std::vector<ad::Parameter>& conv_b,
               std::vector<int> ids) {
    while (static_cast<int>(ids.size()) < model.dims().max_window())
        ids.push_back(Vocabulary::pad_id);
    Var seq = tape.embedding(tape.param(table), ids);
    std::vector<Var> pooled;
    for (size_t k = 0; k < conv_w.size(); ++k) {
        Var c = tape.conv1d(seq, tape.param(conv_w[k]), tape.param(conv_b[k]),
                            model.dims().windows[k]);
        pooled.push_back(tape.max_over_time(tape.relu(c)));
    }
    return tape.concat(pooled);
}

}  // namespace

Var esqe_score_var(Tape& tape, EsqeModel& model, const std::vector<int>& body_ids,
                   const std::vector<int>& subject_ids) {
    if (body_ids.empty()) throw contract_error("esqe_score: empty body");
    if (subject_ids.empty()) throw contract_error("esqe_score: empty subject");
    Var body = cnn_encode(tape, model, model.body_emb, model.body_conv_w, model.body_conv_b,
                          body_ids);
    Var subj = cnn_encode(tape, model, model.subj_emb, model.subj_conv_w, model.subj_conv_b,
                          subject_ids);
    Var joint = tape.concat({body, subj});
    Var hidden = tape.relu(tape.affine(tape.param(model.ff1_w), joint, tape.param(model.ff1_b)));
    Var out = tape.affine(tape.param(model.ff2_w), hidden, tape.param(model.ff2_b));
    return tape.pick(out, 0);
}

double esqe_score(EsqeModel& model, const std::vector<int>& body_ids,
                  const std::vector<int>& subject_ids) {
    Tape tape;
    return tape.val(esqe_score_var(tape, model, body_ids, subject_ids)).item();
}

double esqe_score_tokens(EsqeModel& model, const Vocabulary& vocab,
                         const std::vector<std::string>& body_tokens,
                         const std::vector<std::string>& subject_tokens) {
    return esqe_score(model, vocab.encode(body_tokens), vocab.encode(subject_tokens));
}

EsqeTrainResult train_esqe(EsqeModel& model, const std::vector<RatingExample>& train,
                           const std::vector<RatingExample>& dev, const EsqeTrainConfig& config) {
    if (train.size() < 2) throw contract_error("train_esqe: need at least 2 training examples");
    if (dev.empty()) throw contract_error("train_esqe: empty dev split");

    EsqeTrainResult res;
    {
        double first = train.front().rating;
        bool constant = true;
        for (const auto& ex : train) constant = constant && ex.rating == first;
        if (constant) {
            res.constant_target_warning = true;
            std::cerr << "train_esqe: warning: all training ratings are identical ("
                      << first << ")\n";
        }
    }

    auto dev_mse = [&]() {
        double total = 0.0;
        for (const auto& ex : dev) {
            double diff = esqe_score(model, ex.body_ids, ex.subject_ids) - ex.rating;
            total += diff * diff;
        }
        return total / static_cast<double>(dev.size());
    };

    std::vector<ad::Parameter*> params = model.parameters();
    ad::Adam opt(params, {.lr = config.lr});
    Rng shuffle_rng(Rng(config.seed).split("esqe.shuffle").next_u64());

    std::vector<Tensor> best_values;
    double best = 0.0;
    std::vector<double> history;
    auto snapshot = [&]() {
        best_values.clear();
        for (ad::Parameter* p : params) best_values.push_back(p->value);
    };

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < train.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            opt.zero_grad();
            Tape tape;
            std::vector<Var> losses;
            for (size_t k = start; k < end; ++k) {
                const RatingExample& ex = train[order[k]];
                Var pred = esqe_score_var(tape, model, ex.body_ids, ex.subject_ids);
                Var diff = tape.sub(pred, tape.input(Tensor::scalar(ex.rating)));
                losses.push_back(tape.square(diff));
            }
            Var loss = tape.mean(tape.concat(losses));
            tape.backward(loss);
            ad::clip_global_norm(params, config.clip_norm);
            opt.step();
        }
        double mse = dev_mse();
        history.push_back(mse);
        res.epochs_run = epoch + 1;
        if (res.best_epoch < 0 || mse < best) {
            best = mse;
            res.best_epoch = epoch;
            snapshot();
        }
        int since_best = static_cast<int>(history.size()) - 1 - res.best_epoch;
        if (since_best >= config.patience) break;
    }
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
    res.best_dev_mse = best;
    return res;
}

double synthetic_rating(const Email& email, const std::vector<std::string>& candidate,
                        const std::set<std::string>& stopwords) {
    std::set<std::string> keywords;
    for (const std::string& t : email.subject_tokens)
        if (!is_punct_token(t) && !stopwords.count(t)) keywords.insert(t);

    double fluency = 0.0;
    if (!candidate.empty()) {
        std::set<std::string> distinct(candidate.begin(), candidate.end());
        double repeated =
            static_cast<double>(candidate.size() - distinct.size()) / candidate.size();
        fluency = 1.0 - repeated;
    }

    std::set<std::string> cand_words;
    for (const std::string& t : candidate)
        if (!is_punct_token(t) && !stopwords.count(t)) cand_words.insert(t);
    double f1 = 0.0;
    if (!cand_words.empty() && !keywords.empty()) {
        int inter = 0;
        for (const auto& t : cand_words) inter += keywords.count(t) ? 1 : 0;
        double p = static_cast<double>(inter) / cand_words.size();
        double r = static_cast<double>(inter) / keywords.size();
        if (p + r > 0.0) f1 = 2.0 * p * r / (p + r);
    }

    double rating = 1.0 + 3.0 * (0.3 * fluency + 0.7 * f1);
    return std::clamp(rating, 1.0, 4.0);
}

std::vector<RatingExample> build_rating_dataset(const std::vector<Email>& emails,
                                                const Vocabulary& vocab,
                                                const std::set<std::string>& stopwords, Rng& rng) {
    if (emails.empty()) throw contract_error("build_rating_dataset: empty corpus");
    std::vector<RatingExample> out;
    for (size_t i = 0; i < emails.size(); ++i) {
        const Email& e = emails[i];
        std::vector<int> body_ids = vocab.encode(e.all_body_tokens());

        RatingExample gold;
        gold.body_ids = body_ids;
        gold.subject_ids = vocab.encode(e.subject_tokens);
        gold.rating = synthetic_rating(e, e.subject_tokens, stopwords);
        out.push_back(std::move(gold));

        std::vector<std::string> distractor;
        if (rng.next_double() < 0.5 || emails.size() == 1) {
            distractor = e.subject_tokens;
            rng.shuffle(distractor);
        } else {
            size_t j = i;
            while (j == i) j = static_cast<size_t>(rng.next_int(static_cast<int>(emails.size())));
            distractor = emails[j].subject_tokens;
        }
        RatingExample neg;
        neg.body_ids = body_ids;
        neg.subject_ids = vocab.encode(distractor);
        neg.rating = synthetic_rating(e, distractor, stopwords);
        out.push_back(std::move(neg));
    }
    return out;
}

std::vector<RawRating> load_ratings_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open ratings file: " + path);
    std::vector<RawRating> out;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error(path + ":" + std::to_string(n) + ": bad JSON: " + e.what());
        }
        RawRating r;
        r.body = j.value("body", "");
        r.subject = j.value("subject", "");
        if (!j.contains("rating") || !j["rating"].is_number())
            throw format_error(path + ":" + std::to_string(n) + ": missing numeric rating");
        r.rating = j["rating"];
        if (r.rating < 1.0 || r.rating > 4.0)
            throw format_error(path + ":" + std::to_string(n) + ": rating outside [1,4]");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace subjgen
