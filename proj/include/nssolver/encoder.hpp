#pragma once

#include "nssolver/autodiff.hpp"

#include <string>
#include <vector>

namespace nss {

struct GruCellParams {
  ad::Parameter* w_zr = nullptr;  // 2H x (I+H), update and reset gates fused
  ad::Parameter* b_zr = nullptr;
  ad::Parameter* w_h = nullptr;  // H x (I+H)
  ad::Parameter* b_h = nullptr;
  int input_dim = 0;
  int hidden_dim = 0;
};

GruCellParams make_gru_cell(ad::ParameterStore& store,
                            const std::string& prefix, int input_dim,
                            int hidden_dim, int group);

// one recurrence step over a column batch: x is I x B, h is H x B
ad::Var gru_step(ad::Tape& tape, const GruCellParams& cell, ad::Var x,
                 ad::Var h);

struct EncoderParams {
  ad::Parameter* embeddings = nullptr;  // E x V
  GruCellParams l1_fwd, l1_bwd, l2_fwd, l2_bwd;
  int embed_dim = 0;
  int hidden_dim = 0;
};

EncoderParams make_encoder(ad::ParameterStore& store, int embed_dim,
                           int hidden_dim, int vocab_size, int group);

// Per-problem views into the batched encoding: e_i sums the two directions
// of the top layer, the problem vector is last-forward plus first-backward,
// and pooled is the mean of the e_i (the auxiliary heads' input).
struct EncoderOutput {
  ad::Var token_vectors;   // H x n
  ad::Var problem_vector;  // H x 1
  ad::Var pooled;          // H x 1
  int length = 0;
};

// Runs the whole mini-batch in lockstep (padded, masked) so the recurrence
// works on H x B blocks instead of column vectors. Sequences must be
// non-empty; pad_id fills the tail of shorter ones.
std::vector<EncoderOutput> encode_batch(
    ad::Tape& tape, const EncoderParams& params,
    const std::vector<std::vector<int>>& token_ids, int pad_id,
    double dropout_p, bool train);

EncoderOutput encode(ad::Tape& tape, const EncoderParams& params,
                     const std::vector<int>& token_ids, double dropout_p,
                     bool train);

}  // namespace nss
