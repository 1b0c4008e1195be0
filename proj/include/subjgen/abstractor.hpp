#pragma once

#include <string>
#include <vector>

#include "subjgen/rng.hpp"
#include "subjgen/tape.hpp"
#include "subjgen/vocab.hpp"

namespace subjgen {

struct AbstractorDims {
    int emb = 128;
    int hidden = 256;  // LSTM units per direction
};

// Seq2seq rewriter over the concatenated extracted sentences: BiLSTM
// encoder, LSTM decoder with bilinear multiplicative attention, and a
// generation/copy gate mixing vocabulary and source-attention mass.
class AbstractorModel {
public:
    AbstractorModel(int vocab_size, AbstractorDims dims, Rng& rng);

    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;
    const AbstractorDims& dims() const { return dims_; }
    int vocab_size() const { return vocab_size_; }

    ad::Parameter emb;
    ad::Parameter enc_fwd_w, enc_fwd_b, enc_bwd_w, enc_bwd_b;
    ad::Parameter red_h_w, red_h_b, red_c_w, red_c_b;  // encoder-to-decoder state bridge
    ad::Parameter dec_w, dec_b;
    ad::Parameter w_a;              // bilinear attention [hidden, 2*hidden]
    ad::Parameter pgen_w, pgen_b;   // gate over [context; state; input emb]
    ad::Parameter out_w, out_b;     // projection to vocabulary logits

private:
    AbstractorDims dims_;
    int vocab_size_;
};

// Source side of one rewrite: selected sentences concatenated in document
// order with a boundary token between them. Out-of-vocabulary source types
// get temporary extended ids V, V+1, ... so they can be copied verbatim.
struct Source {
    std::vector<std::string> tokens;   // surface forms
    std::vector<int> ids;              // vocabulary ids (unk for OOV)
    std::vector<int> ext_ids;          // extended ids
    std::vector<std::string> oov_types;

    int ext_vocab_size(int vocab_size) const {
        return vocab_size + static_cast<int>(oov_types.size());
    }
};

Source build_source(const std::vector<std::vector<std::string>>& selected_sentences,
                    const Vocabulary& vocab);

// Resolves a token against vocabulary plus this source's OOV types;
// uncopyable OOVs map to unk.
int extended_id(const Source& src, const Vocabulary& vocab, const std::string& token);

struct AbstractorState {
    ad::Var h, c;
};

struct EncodedSource {
    ad::Var states;     // [S, 2*hidden]
    ad::Var attn_proj;  // [S, hidden], rows are W_a h_enc,i
    AbstractorState init;
    int len = 0;
};

EncodedSource encode_source(ad::Tape& tape, const Source& src, AbstractorModel& model);

struct CopyStep {
    ad::Var probs_ext;  // over vocabulary + source OOV types
    ad::Var attn;       // [S]
    ad::Var p_gen;      // [1]
    AbstractorState next;
};

// One decode step conditioned on the previous token (extended id).
CopyStep decoder_step_copy(ad::Tape& tape, AbstractorModel& model, const EncodedSource& enc,
                           const Source& src, AbstractorState state, int prev_ext_id);

// Teacher-forced mean negative log-likelihood of the target subject, EOS
// included. Copyable OOV targets resolve to their source ids.
ad::Var abstractor_loss(ad::Tape& tape, AbstractorModel& model, const Source& src,
                        const std::vector<std::string>& target, const Vocabulary& vocab);

// Greedy (beam=1) or length-normalized beam decoding from SOS until EOS or
// max_len emissions. Copied OOV tokens are rendered with their source
// surface forms; the returned list excludes EOS.
std::vector<std::string> generate_subject(const std::vector<std::vector<std::string>>& selected,
                                          AbstractorModel& model, const Vocabulary& vocab,
                                          int max_len, int beam);

}  // namespace subjgen
