#pragma once

#include <vector>

#include "subjgen/corpus.hpp"
#include "subjgen/rng.hpp"
#include "subjgen/tape.hpp"
#include "subjgen/vocab.hpp"

namespace subjgen {

struct ExtractorDims {
    int emb = 128;
    int filters = 100;  // per window size
    std::vector<int> windows = {3, 4, 5};
    int hidden = 256;   // LSTM units per direction; also the attention width

    int conv_out() const { return filters * static_cast<int>(windows.size()); }
    int dvec() const { return 2 * hidden; }  // contextual sentence representation
    int max_window() const;
};

// Sentence CNN + document BiLSTM encoder with an LSTM pointer decoder:
// two-hop attention over sentence representations plus a learned stop
// vector competing in the output distribution.
class ExtractorModel {
public:
    ExtractorModel(int vocab_size, ExtractorDims dims, Rng& rng);

    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;
    const ExtractorDims& dims() const { return dims_; }
    int vocab_size() const { return vocab_size_; }

    ad::Parameter emb;
    std::vector<ad::Parameter> conv_w, conv_b;  // one per window size
    ad::Parameter fwd_w, fwd_b;                 // document BiLSTM, forward
    ad::Parameter bwd_w, bwd_b;                 // document BiLSTM, backward
    ad::Parameter dec_w, dec_b;                 // pointer decoder LSTM
    ad::Parameter w_e, u_e, v_e;                // hop-1 attention
    ad::Parameter w_o, u_o, v_o;                // hop-2 scoring
    ad::Parameter stop;                         // stop pseudo-sentence [dvec]

private:
    ExtractorDims dims_;
    int vocab_size_;
};

struct EncodedDocument {
    std::vector<ad::Var> c;  // per-sentence CNN representations
    std::vector<ad::Var> d;  // per-sentence BiLSTM representations
    ad::Var d_mat;           // [|D|, dvec]
    ad::Var hop1_proj;       // W_e d_j rows, [|D|, hidden]
    ad::Var hop2_proj;       // W_o d_j rows, [|D|, hidden]
    ad::Var stop_proj;       // W_o stop, [hidden]
    int n_sentences = 0;
};

struct DecoderState {
    ad::Var h, c;
};

struct ExtractorStep {
    ad::Var probs;  // over |D|+1 options; slot |D| is stop
    DecoderState next;
};

// Token ids per sentence, right-padded with PAD up to the largest conv
// window so every window size yields at least one position.
std::vector<std::vector<int>> sentence_token_ids(const Email& email, const Vocabulary& vocab,
                                                 const ExtractorDims& dims);

EncodedDocument encode_document(ad::Tape& tape, const std::vector<std::vector<int>>& sentences,
                                ExtractorModel& model);

DecoderState extractor_initial_state(ad::Tape& tape, const ExtractorModel& model);

// One pointer-decoder step. prev is the previously selected sentence
// (-1 on the first step); selected sentences are masked to probability 0.
// stop_allowed=false removes the stop slot from the distribution support.
ExtractorStep extractor_step(ad::Tape& tape, const EncodedDocument& enc, ExtractorModel& model,
                             DecoderState state, const std::vector<int>& selected, int prev,
                             bool stop_allowed = true);

// Argmax decoding until stop wins or max_ext reached; never returns an
// empty selection.
std::vector<int> extract_greedy(const std::vector<std::vector<int>>& sentences,
                                ExtractorModel& model, int max_ext);

struct ExtractionEpisode {
    std::vector<std::vector<double>> step_distributions;  // one per decision
    std::vector<int> actions;          // per decision; |D| encodes stop
    std::vector<int> selected;         // sentence indices in sampling order
    bool stopped = false;              // stop sampled (vs hitting the cap)
    std::vector<ad::Var> action_logprobs;  // on-tape, one per decision
    double reward = 0.0;
    std::vector<double> baselines;
};

// Samples actions from the step distributions until stop or cap
// selections. forbid_stop_first guarantees a non-empty selection.
ExtractionEpisode sample_episode(ad::Tape& tape, const EncodedDocument& enc,
                                 ExtractorModel& model, Rng& rng, int cap,
                                 bool forbid_stop_first = false);

// Teacher-forced mean cross-entropy against the canonical target sequence:
// positive indices in ascending order, then stop.
ad::Var extractor_loss(ad::Tape& tape, const EncodedDocument& enc, ExtractorModel& model,
                       const std::vector<int>& positive_indices);

}  // namespace subjgen
