#include "subjgen/abstractor.hpp"

#include <algorithm>
#include <map>

#include "subjgen/init.hpp"

namespace subjgen {

using ad::Tape;
using ad::Tensor;
using ad::Var;

AbstractorModel::AbstractorModel(int vocab_size, AbstractorDims dims, Rng& rng)
    : dims_(dims), vocab_size_(vocab_size) {
    if (vocab_size < 4) throw contract_error("abstractor: vocabulary too small");
    int e = dims.emb, hid = dims.hidden;
    emb = ad::Parameter("abs.emb", ad::uniform_init({vocab_size, e}, rng));
    enc_fwd_w = ad::Parameter("abs.enc_fwd.w", ad::xavier_init({4 * hid, e + hid}, rng));
    enc_fwd_b = ad::Parameter("abs.enc_fwd.b", ad::lstm_bias_init(hid));
    enc_bwd_w = ad::Parameter("abs.enc_bwd.w", ad::xavier_init({4 * hid, e + hid}, rng));
    enc_bwd_b = ad::Parameter("abs.enc_bwd.b", ad::lstm_bias_init(hid));
    red_h_w = ad::Parameter("abs.red_h.w", ad::xavier_init({hid, 2 * hid}, rng));
    red_h_b = ad::Parameter("abs.red_h.b", Tensor({hid}));
    red_c_w = ad::Parameter("abs.red_c.w", ad::xavier_init({hid, 2 * hid}, rng));
    red_c_b = ad::Parameter("abs.red_c.b", Tensor({hid}));
    dec_w = ad::Parameter("abs.dec.w", ad::xavier_init({4 * hid, e + hid}, rng));
    dec_b = ad::Parameter("abs.dec.b", ad::lstm_bias_init(hid));
    w_a = ad::Parameter("abs.attn.w_a", ad::xavier_init({hid, 2 * hid}, rng));
    pgen_w = ad::Parameter("abs.pgen.w", ad::xavier_init({1, 2 * hid + hid + e}, rng));
    pgen_b = ad::Parameter("abs.pgen.b", Tensor({1}));
    out_w = ad::Parameter("abs.out.w", ad::xavier_init({vocab_size, 3 * hid}, rng));
    out_b = ad::Parameter("abs.out.b", Tensor({vocab_size}));
}

std::vector<ad::Parameter*> AbstractorModel::parameters() {
    return {&emb,     &enc_fwd_w, &enc_fwd_b, &enc_bwd_w, &enc_bwd_b, &red_h_w, &red_h_b,
            &red_c_w, &red_c_b,   &dec_w,     &dec_b,     &w_a,       &pgen_w,  &pgen_b,
            &out_w,   &out_b};
}

std::vector<const ad::Parameter*> AbstractorModel::parameters() const {
    auto mut = const_cast<AbstractorModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

Source build_source(const std::vector<std::vector<std::string>>& selected_sentences,
                    const Vocabulary& vocab) {
    Source src;
    std::map<std::string, int> oov_index;
    for (size_t s = 0; s < selected_sentences.size(); ++s) {
        if (s) {
            src.tokens.push_back(vocab.token(Vocabulary::eos_id));
            src.ids.push_back(Vocabulary::eos_id);
            src.ext_ids.push_back(Vocabulary::eos_id);
        }
        for (const std::string& tok : selected_sentences[s]) {
            src.tokens.push_back(tok);
            int id = vocab.id(tok);
            src.ids.push_back(id);
            if (vocab.contains(tok)) {
                src.ext_ids.push_back(id);
            } else {
                auto [it, fresh] =
                    oov_index.emplace(tok, static_cast<int>(src.oov_types.size()));
                if (fresh) src.oov_types.push_back(tok);
                src.ext_ids.push_back(vocab.size() + it->second);
            }
        }
    }
    if (src.tokens.empty()) throw contract_error("build_source: empty source");
    return src;
}

int extended_id(const Source& src, const Vocabulary& vocab, const std::string& token) {
    int id = vocab.id(token);
    if (id != Vocabulary::unk_id) return id;
    for (size_t k = 0; k < src.oov_types.size(); ++k)
        if (src.oov_types[k] == token) return vocab.size() + static_cast<int>(k);
    return Vocabulary::unk_id;
}

namespace {

std::vector<Var> run_lstm_seq(Tape& tape, Var w, Var b, Var emb_mat, int hidden, bool reverse) {
    int n = tape.val(emb_mat).rows();
    std::vector<Var> states(static_cast<size_t>(n));
    Var h = tape.zeros({hidden});
    Var c = tape.zeros({hidden});
    for (int k = 0; k < n; ++k) {
        int idx = reverse ? n - 1 - k : k;
        Var hc = tape.lstm_cell(w, b, tape.row(emb_mat, idx), h, c);
        h = tape.slice(hc, 0, hidden);
        c = tape.slice(hc, hidden, hidden);
        states[static_cast<size_t>(idx)] = h;
    }
    return states;
}

// embedding id for a (possibly extended) previous token
int embed_id(const AbstractorModel& model, int ext_id) {
    return ext_id < model.vocab_size() ? ext_id : Vocabulary::unk_id;
}

}  // namespace

EncodedSource encode_source(Tape& tape, const Source& src, AbstractorModel& model) {
    if (src.ids.empty()) throw contract_error("encode_source: empty source");
    int hid = model.dims().hidden;
    Var table = tape.param(model.emb);
    Var emb_mat = tape.embedding(table, src.ids);
    std::vector<Var> fwd =
        run_lstm_seq(tape, tape.param(model.enc_fwd_w), tape.param(model.enc_fwd_b), emb_mat, hid,
                     false);
    std::vector<Var> bwd =
        run_lstm_seq(tape, tape.param(model.enc_bwd_w), tape.param(model.enc_bwd_b), emb_mat, hid,
                     true);
    std::vector<Var> per_token;
    per_token.reserve(fwd.size());
    for (size_t i = 0; i < fwd.size(); ++i) per_token.push_back(tape.concat({fwd[i], bwd[i]}));

    EncodedSource enc;
    enc.len = static_cast<int>(src.ids.size());
    enc.states = tape.stack_rows(per_token);
    enc.attn_proj = tape.matmul_nt(enc.states, tape.param(model.w_a));
    Var final_pair = tape.concat({fwd.back(), bwd.front()});
    enc.init.h = tape.tanh_(tape.affine(tape.param(model.red_h_w), final_pair,
                                        tape.param(model.red_h_b)));
    enc.init.c = tape.tanh_(tape.affine(tape.param(model.red_c_w), final_pair,
                                        tape.param(model.red_c_b)));
    return enc;
}

CopyStep decoder_step_copy(Tape& tape, AbstractorModel& model, const EncodedSource& enc,
                           const Source& src, AbstractorState state, int prev_ext_id) {
    int hid = model.dims().hidden;
    int v = model.vocab_size();
    int ext_v = src.ext_vocab_size(v);

    Var prev_emb_mat = tape.embedding(tape.param(model.emb), {embed_id(model, prev_ext_id)});
    Var prev_emb = tape.row(prev_emb_mat, 0);
    Var hc = tape.lstm_cell(tape.param(model.dec_w), tape.param(model.dec_b), prev_emb, state.h,
                            state.c);
    Var h = tape.slice(hc, 0, hid);
    Var c = tape.slice(hc, hid, hid);

    Var scores = tape.matvec(enc.attn_proj, h);
    Var beta = tape.softmax(scores);
    Var context = tape.vecmat(beta, enc.states);

    Var gate_in = tape.concat({context, h, prev_emb});
    Var p_gen =
        tape.sigmoid_(tape.affine(tape.param(model.pgen_w), gate_in, tape.param(model.pgen_b)));

    Var logits = tape.affine(tape.param(model.out_w), tape.concat({h, context}),
                             tape.param(model.out_b));
    Var p_vocab = tape.softmax(logits);

    Var vocab_part = tape.smul(p_gen, tape.concat({p_vocab, tape.zeros({ext_v - v})}));
    Var one_minus = tape.sub(tape.input(Tensor({1}, {1.0})), p_gen);
    Var copy_part = tape.smul(one_minus, tape.group_sum(beta, src.ext_ids, ext_v));

    CopyStep out;
    out.probs_ext = tape.add(vocab_part, copy_part);
    out.attn = beta;
    out.p_gen = p_gen;
    out.next = {h, c};
    return out;
}

ad::Var abstractor_loss(Tape& tape, AbstractorModel& model, const Source& src,
                        const std::vector<std::string>& target, const Vocabulary& vocab) {
    if (target.empty()) throw contract_error("abstractor_loss: empty target");
    EncodedSource enc = encode_source(tape, src, model);
    std::vector<int> target_ids;
    for (const std::string& tok : target) target_ids.push_back(extended_id(src, vocab, tok));
    target_ids.push_back(Vocabulary::eos_id);

    AbstractorState state = enc.init;
    int prev = Vocabulary::sos_id;
    std::vector<Var> losses;
    for (int tid : target_ids) {
        CopyStep step = decoder_step_copy(tape, model, enc, src, state, prev);
        losses.push_back(tape.neg(tape.log_(tape.pick(step.probs_ext, tid))));
        state = step.next;
        prev = tid;
    }
    return tape.mean(tape.concat(losses));
}

std::vector<std::string> generate_subject(const std::vector<std::vector<std::string>>& selected,
                                          AbstractorModel& model, const Vocabulary& vocab,
                                          int max_len, int beam) {
    if (max_len < 1) throw contract_error("generate_subject: max_len must be >= 1");
    if (beam < 1) throw contract_error("generate_subject: beam must be >= 1");
    Source src = build_source(selected, vocab);
    Tape tape;
    EncodedSource enc = encode_source(tape, src, model);

    struct Beam {
        std::vector<int> ext_ids;
        double logp = 0.0;
        AbstractorState state;
        int prev = Vocabulary::sos_id;
        bool finished = false;

        double norm_score() const {
            size_t len = ext_ids.size() + 1;  // count the terminal decision
            return logp / static_cast<double>(len);
        }
    };

    std::vector<Beam> beams = {Beam{{}, 0.0, enc.init, Vocabulary::sos_id, false}};
    std::vector<Beam> finished;
    for (int step_i = 0; step_i < max_len; ++step_i) {
        std::vector<Beam> candidates;
        for (Beam& b : beams) {
            if (b.finished) continue;
            CopyStep step = decoder_step_copy(tape, model, enc, src, b.state, b.prev);
            const Tensor& p = tape.val(step.probs_ext);
            // rank extended ids by probability; PAD and SOS are never emitted
            std::vector<int> order(p.size());
            for (size_t i = 0; i < p.size(); ++i) order[i] = static_cast<int>(i);
            std::partial_sort(order.begin(),
                              order.begin() + std::min<size_t>(order.size(),
                                                               static_cast<size_t>(beam) + 2),
                              order.end(),
                              [&](int a, int c) { return p[static_cast<size_t>(a)] >
                                                         p[static_cast<size_t>(c)]; });
            int taken = 0;
            for (int id : order) {
                if (taken >= beam) break;
                if (id == Vocabulary::pad_id || id == Vocabulary::sos_id) continue;
                Beam nb = b;
                nb.logp += std::log(std::max(p[static_cast<size_t>(id)], 1e-300));
                nb.state = step.next;
                if (id == Vocabulary::eos_id) {
                    nb.finished = true;
                } else {
                    nb.ext_ids.push_back(id);
                    nb.prev = id;
                }
                candidates.push_back(std::move(nb));
                ++taken;
            }
        }
        if (candidates.empty()) break;
        std::sort(candidates.begin(), candidates.end(),
                  [](const Beam& a, const Beam& b) { return a.logp > b.logp; });
        beams.clear();
        for (Beam& c : candidates) {
            if (c.finished)
                finished.push_back(std::move(c));
            else if (static_cast<int>(beams.size()) < beam)
                beams.push_back(std::move(c));
        }
        if (beams.empty()) break;
    }
    for (Beam& b : beams) finished.push_back(std::move(b));

    const Beam* best = nullptr;
    for (const Beam& b : finished)
        if (!best || b.norm_score() > best->norm_score()) best = &b;

    std::vector<std::string> out;
    if (best)
        for (int id : best->ext_ids)
            out.push_back(id < vocab.size() ? vocab.token(id)
                                            : src.oov_types[static_cast<size_t>(id - vocab.size())]);
    return out;
}

}  // namespace subjgen
