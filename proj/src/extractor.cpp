#include "subjgen/extractor.hpp"

#include <algorithm>

#include "subjgen/init.hpp"

namespace subjgen {

using ad::Tape;
using ad::Tensor;
using ad::Var;

int ExtractorDims::max_window() const {
    int m = 1;
    for (int w : windows) m = std::max(m, w);
    return m;
}

ExtractorModel::ExtractorModel(int vocab_size, ExtractorDims dims, Rng& rng)
    : dims_(dims), vocab_size_(vocab_size) {
    if (vocab_size < 4) throw contract_error("extractor: vocabulary too small");
    int e = dims.emb, hid = dims.hidden, cdim = dims.conv_out(), dvec = dims.dvec();
    emb = ad::Parameter("ext.emb", ad::uniform_init({vocab_size, e}, rng));
    for (size_t k = 0; k < dims.windows.size(); ++k) {
        int w = dims.windows[k];
        conv_w.emplace_back("ext.conv" + std::to_string(w) + ".w",
                            ad::xavier_init({dims.filters, w * e}, rng));
        conv_b.emplace_back("ext.conv" + std::to_string(w) + ".b", Tensor({dims.filters}));
    }
    fwd_w = ad::Parameter("ext.doc_fwd.w", ad::xavier_init({4 * hid, cdim + hid}, rng));
    fwd_b = ad::Parameter("ext.doc_fwd.b", ad::lstm_bias_init(hid));
    bwd_w = ad::Parameter("ext.doc_bwd.w", ad::xavier_init({4 * hid, cdim + hid}, rng));
    bwd_b = ad::Parameter("ext.doc_bwd.b", ad::lstm_bias_init(hid));
    dec_w = ad::Parameter("ext.dec.w", ad::xavier_init({4 * hid, hid + hid}, rng));
    dec_b = ad::Parameter("ext.dec.b", ad::lstm_bias_init(hid));
    w_e = ad::Parameter("ext.attn.w_e", ad::xavier_init({hid, dvec}, rng));
    u_e = ad::Parameter("ext.attn.u_e", ad::xavier_init({hid, hid}, rng));
    v_e = ad::Parameter("ext.attn.v_e", ad::xavier_init({hid}, rng));
    w_o = ad::Parameter("ext.attn.w_o", ad::xavier_init({hid, dvec}, rng));
    u_o = ad::Parameter("ext.attn.u_o", ad::xavier_init({hid, hid}, rng));
    v_o = ad::Parameter("ext.attn.v_o", ad::xavier_init({hid}, rng));
    stop = ad::Parameter("ext.stop", ad::uniform_init({dvec}, rng));
}

std::vector<ad::Parameter*> ExtractorModel::parameters() {
    std::vector<ad::Parameter*> out = {&emb};
    for (auto& p : conv_w) out.push_back(&p);
    for (auto& p : conv_b) out.push_back(&p);
    for (ad::Parameter* p : {&fwd_w, &fwd_b, &bwd_w, &bwd_b, &dec_w, &dec_b, &w_e, &u_e, &v_e,
                             &w_o, &u_o, &v_o, &stop})
        out.push_back(p);
    return out;
}

std::vector<const ad::Parameter*> ExtractorModel::parameters() const {
    auto mut = const_cast<ExtractorModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<std::vector<int>> sentence_token_ids(const Email& email, const Vocabulary& vocab,
                                                 const ExtractorDims& dims) {
    std::vector<std::vector<int>> out;
    int min_len = dims.max_window();
    for (const auto& sent : email.body_sentences) {
        std::vector<int> ids = vocab.encode(sent);
        while (static_cast<int>(ids.size()) < min_len) ids.push_back(Vocabulary::pad_id);
        out.push_back(std::move(ids));
    }
    return out;
}

namespace {

// CNN sentence representation: per window size, conv -> ReLU -> max-over-time,
// then concatenation across window sizes.
Var sentence_cnn(Tape& tape, Var emb_table, const std::vector<int>& ids, ExtractorModel& model) {
    Var seq = tape.embedding(emb_table, ids);
    std::vector<Var> pooled;
    for (size_t k = 0; k < model.dims().windows.size(); ++k) {
        Var c = tape.conv1d(seq, tape.param(model.conv_w[k]), tape.param(model.conv_b[k]),
                            model.dims().windows[k]);
        pooled.push_back(tape.max_over_time(tape.relu(c)));
    }
    return tape.concat(pooled);
}

struct LstmVars {
    Var w, b;
};

std::vector<Var> run_lstm(Tape& tape, const LstmVars& cell, const std::vector<Var>& inputs,
                          int hidden, bool reverse) {
    std::vector<Var> states(inputs.size());
    Var h = tape.zeros({hidden});
    Var c = tape.zeros({hidden});
    int n = static_cast<int>(inputs.size());
    for (int k = 0; k < n; ++k) {
        int idx = reverse ? n - 1 - k : k;
        Var hc = tape.lstm_cell(cell.w, cell.b, inputs[static_cast<size_t>(idx)], h, c);
        h = tape.slice(hc, 0, hidden);
        c = tape.slice(hc, hidden, hidden);
        states[static_cast<size_t>(idx)] = h;
    }
    return states;
}

}  // namespace

EncodedDocument encode_document(Tape& tape, const std::vector<std::vector<int>>& sentences,
                                ExtractorModel& model) {
    if (sentences.empty()) throw contract_error("encode_document: empty document");
    int hid = model.dims().hidden;
    EncodedDocument enc;
    enc.n_sentences = static_cast<int>(sentences.size());

    Var table = tape.param(model.emb);
    for (const auto& ids : sentences) enc.c.push_back(sentence_cnn(tape, table, ids, model));

    LstmVars fwd{tape.param(model.fwd_w), tape.param(model.fwd_b)};
    LstmVars bwd{tape.param(model.bwd_w), tape.param(model.bwd_b)};
    std::vector<Var> hs_f = run_lstm(tape, fwd, enc.c, hid, false);
    std::vector<Var> hs_b = run_lstm(tape, bwd, enc.c, hid, true);
    for (size_t j = 0; j < enc.c.size(); ++j)
        enc.d.push_back(tape.concat({hs_f[j], hs_b[j]}));

    enc.d_mat = tape.stack_rows(enc.d);
    enc.hop1_proj = tape.matmul_nt(enc.d_mat, tape.param(model.w_e));
    enc.hop2_proj = tape.matmul_nt(enc.d_mat, tape.param(model.w_o));
    enc.stop_proj = tape.matvec(tape.param(model.w_o), tape.param(model.stop));
    return enc;
}

DecoderState extractor_initial_state(Tape& tape, const ExtractorModel& model) {
    return {tape.zeros({model.dims().hidden}), tape.zeros({model.dims().hidden})};
}

ExtractorStep extractor_step(Tape& tape, const EncodedDocument& enc, ExtractorModel& model,
                             DecoderState state, const std::vector<int>& selected, int prev,
                             bool stop_allowed) {
    int n = enc.n_sentences;
    int hid = model.dims().hidden;
    for (int s : selected)
        if (s < 0 || s >= n) throw contract_error("extractor_step: bad selected index");

    Var x = prev < 0 ? tape.zeros({hid}) : tape.row(enc.hop1_proj, prev);
    Var hc = tape.lstm_cell(tape.param(model.dec_w), tape.param(model.dec_b), x, state.h, state.c);
    Var h = tape.slice(hc, 0, hid);
    Var c = tape.slice(hc, hid, hid);

    // hop 1: context over sentences only
    Var scores1 = tape.matvec(tape.tanh_(tape.add_rowvec(enc.hop1_proj,
                                                         tape.matvec(tape.param(model.u_e), h))),
                              tape.param(model.v_e));
    Var alpha = tape.softmax(scores1);
    Var context = tape.vecmat(alpha, enc.hop1_proj);

    // hop 2: score sentences and the stop slot against the context
    Var u_ctx = tape.matvec(tape.param(model.u_o), context);
    Var sent_scores = tape.matvec(tape.tanh_(tape.add_rowvec(enc.hop2_proj, u_ctx)),
                                  tape.param(model.v_o));
    Var stop_score = tape.dot(tape.param(model.v_o), tape.tanh_(tape.add(enc.stop_proj, u_ctx)));
    Var logits = tape.concat({sent_scores, stop_score});

    std::vector<bool> allowed(static_cast<size_t>(n + 1), true);
    for (int s : selected) allowed[static_cast<size_t>(s)] = false;
    allowed[static_cast<size_t>(n)] = stop_allowed;

    ExtractorStep out;
    out.probs = tape.masked_softmax(logits, allowed);
    out.next = {h, c};
    return out;
}

std::vector<int> extract_greedy(const std::vector<std::vector<int>>& sentences,
                                ExtractorModel& model, int max_ext) {
    if (max_ext < 1) throw contract_error("extract_greedy: max_ext must be >= 1");
    Tape tape;
    EncodedDocument enc = encode_document(tape, sentences, model);
    DecoderState state = extractor_initial_state(tape, model);
    std::vector<int> selected;
    int prev = -1;
    int n = enc.n_sentences;
    while (static_cast<int>(selected.size()) < std::min(max_ext, n)) {
        ExtractorStep step = extractor_step(tape, enc, model, state, selected, prev);
        const Tensor& p = tape.val(step.probs);
        int best = 0;
        for (int i = 1; i <= n; ++i)
            if (p[static_cast<size_t>(i)] > p[static_cast<size_t>(best)]) best = i;
        if (best == n) {  // stop slot
            if (!selected.empty()) break;
            // stop won immediately: emit the best sentence instead
            int fallback = 0;
            for (int i = 1; i < n; ++i)
                if (p[static_cast<size_t>(i)] > p[static_cast<size_t>(fallback)]) fallback = i;
            selected.push_back(fallback);
            break;
        }
        selected.push_back(best);
        prev = best;
        state = step.next;
    }
    return selected;
}

ExtractionEpisode sample_episode(Tape& tape, const EncodedDocument& enc, ExtractorModel& model,
                                 Rng& rng, int cap, bool forbid_stop_first) {
    ExtractionEpisode ep;
    DecoderState state = extractor_initial_state(tape, model);
    int n = enc.n_sentences;
    int max_sel = std::min(cap, n);
    int prev = -1;
    while (true) {
        bool stop_allowed = !(forbid_stop_first && ep.selected.empty());
        ExtractorStep step = extractor_step(tape, enc, model, state, ep.selected, prev,
                                            stop_allowed);
        const Tensor& p = tape.val(step.probs);
        std::vector<double> dist(p.data(), p.data() + p.size());
        int action = rng.sample(dist);
        ep.step_distributions.push_back(std::move(dist));
        ep.actions.push_back(action);
        ep.action_logprobs.push_back(tape.log_(tape.pick(step.probs, action)));
        if (action == n) {
            ep.stopped = true;
            break;
        }
        ep.selected.push_back(action);
        prev = action;
        state = step.next;
        if (static_cast<int>(ep.selected.size()) >= max_sel) break;
    }
    return ep;
}

ad::Var extractor_loss(Tape& tape, const EncodedDocument& enc, ExtractorModel& model,
                       const std::vector<int>& positive_indices) {
    if (positive_indices.empty())
        throw contract_error("extractor_loss: empty positive set");
    std::vector<int> targets = positive_indices;
    std::sort(targets.begin(), targets.end());
    for (int t : targets)
        if (t < 0 || t >= enc.n_sentences)
            throw contract_error("extractor_loss: label index " + std::to_string(t) +
                                 " out of range for " + std::to_string(enc.n_sentences) +
                                 " sentences");
    targets.push_back(enc.n_sentences);  // stop

    DecoderState state = extractor_initial_state(tape, model);
    std::vector<int> selected;
    std::vector<Var> step_losses;
    int prev = -1;
    for (int target : targets) {
        ExtractorStep step = extractor_step(tape, enc, model, state, selected, prev);
        step_losses.push_back(tape.neg(tape.log_(tape.pick(step.probs, target))));
        if (target < enc.n_sentences) selected.push_back(target);
        prev = target < enc.n_sentences ? target : prev;
        state = step.next;
    }
    return tape.mean(tape.concat(step_losses));
}

}  // namespace subjgen
