#include "nssolver/encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace nss {

using ad::Var;

GruCellParams make_gru_cell(ad::ParameterStore& store,
                            const std::string& prefix, int input_dim,
                            int hidden_dim, int group) {
  GruCellParams cell;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  cell.w_zr = &store.add(prefix + ".w_zr", 2 * hidden_dim,
                         input_dim + hidden_dim, group);
  cell.b_zr = &store.add(prefix + ".b_zr", 2 * hidden_dim, 1, group);
  cell.w_h =
      &store.add(prefix + ".w_h", hidden_dim, input_dim + hidden_dim, group);
  cell.b_h = &store.add(prefix + ".b_h", hidden_dim, 1, group);
  return cell;
}

Var gru_step(ad::Tape& tape, const GruCellParams& cell, Var x, Var h) {
  int H = cell.hidden_dim;
  int B = x.cols();
  Var xh = ad::vconcat(x, h);
  Var zr = ad::sigmoid(
      ad::add_colvec(ad::matmul(tape.param(*cell.w_zr), xh), tape.param(*cell.b_zr)));
  Var z = ad::block(zr, 0, 0, H, B);
  Var r = ad::block(zr, H, 0, H, B);
  Var xrh = ad::vconcat(x, ad::mul(r, h));
  Var h_tilde = ad::tanh(ad::add_colvec(ad::matmul(tape.param(*cell.w_h), xrh),
                                        tape.param(*cell.b_h)));
  Var keep = ad::sub(tape.constant(Mat::Ones(H, B)), z);
  return ad::add(ad::mul(keep, h), ad::mul(z, h_tilde));
}

EncoderParams make_encoder(ad::ParameterStore& store, int embed_dim,
                           int hidden_dim, int vocab_size, int group) {
  EncoderParams p;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.embeddings = &store.add("encoder.embeddings", embed_dim, vocab_size, group);
  p.l1_fwd = make_gru_cell(store, "encoder.l1_fwd", embed_dim, hidden_dim, group);
  p.l1_bwd = make_gru_cell(store, "encoder.l1_bwd", embed_dim, hidden_dim, group);
  p.l2_fwd = make_gru_cell(store, "encoder.l2_fwd", hidden_dim, hidden_dim, group);
  p.l2_bwd = make_gru_cell(store, "encoder.l2_bwd", hidden_dim, hidden_dim, group);
  return p;
}

namespace {

// masked recurrence update: columns past a sequence's end keep their state
Var masked_update(ad::Tape& tape, Var fresh, Var prev,
                  const std::vector<int>& lengths, int t, int H) {
  int B = static_cast<int>(lengths.size());
  bool all_valid = true;
  for (int len : lengths) all_valid = all_valid && t < len;
  if (all_valid) return fresh;
  Mat keep = Mat::Zero(H, B), pass = Mat::Zero(H, B);
  for (int j = 0; j < B; ++j) {
    if (t < lengths[j]) keep.col(j).setOnes();
    else pass.col(j).setOnes();
  }
  return ad::add(ad::mul(fresh, tape.constant(std::move(keep))),
                 ad::mul(prev, tape.constant(std::move(pass))));
}

// runs one direction of one layer, returning the hidden state per position
std::vector<Var> run_direction(ad::Tape& tape, const GruCellParams& cell,
                               const std::vector<Var>& inputs,
                               const std::vector<int>& lengths, bool backward) {
  int T = static_cast<int>(inputs.size());
  int B = static_cast<int>(lengths.size());
  int H = cell.hidden_dim;
  std::vector<Var> states(T);
  Var h = tape.constant(Mat::Zero(H, B));
  for (int step = 0; step < T; ++step) {
    int t = backward ? T - 1 - step : step;
    Var fresh = gru_step(tape, cell, inputs[t], h);
    h = masked_update(tape, fresh, h, lengths, t, H);
    states[t] = h;
  }
  return states;
}

}  // namespace

std::vector<EncoderOutput> encode_batch(
    ad::Tape& tape, const EncoderParams& params,
    const std::vector<std::vector<int>>& token_ids, int pad_id,
    double dropout_p, bool train) {
  int B = static_cast<int>(token_ids.size());
  if (B == 0) return {};
  std::vector<int> lengths(B);
  int T = 0;
  for (int j = 0; j < B; ++j) {
    lengths[j] = static_cast<int>(token_ids[j].size());
    if (lengths[j] == 0)
      throw std::invalid_argument("encode_batch: empty token list");
    T = std::max(T, lengths[j]);
  }
  int H = params.hidden_dim;

  // layer 1 inputs: one embedding batch per position
  std::vector<Var> l1_in(T);
  Var emb = tape.param(*params.embeddings);
  for (int t = 0; t < T; ++t) {
    std::vector<int> ids(B);
    for (int j = 0; j < B; ++j)
      ids[j] = t < lengths[j] ? token_ids[j][t] : pad_id;
    l1_in[t] = ad::embedding_lookup(emb, ids);
  }

  auto l1f = run_direction(tape, params.l1_fwd, l1_in, lengths, false);
  auto l1b = run_direction(tape, params.l1_bwd, l1_in, lengths, true);

  // direction sum feeds layer 2, with inter-layer dropout in train mode
  std::vector<Var> l2_in(T);
  for (int t = 0; t < T; ++t)
    l2_in[t] = ad::dropout(ad::add(l1f[t], l1b[t]), dropout_p, train);

  auto l2f = run_direction(tape, params.l2_fwd, l2_in, lengths, false);
  auto l2b = run_direction(tape, params.l2_bwd, l2_in, lengths, true);

  std::vector<Var> e(T);
  for (int t = 0; t < T; ++t) e[t] = ad::add(l2f[t], l2b[t]);

  std::vector<EncoderOutput> out(B);
  for (int j = 0; j < B; ++j) {
    int n = lengths[j];
    std::vector<Var> cols(n);
    for (int t = 0; t < n; ++t) cols[t] = ad::block(e[t], 0, j, H, 1);
    EncoderOutput& o = out[j];
    o.length = n;
    o.token_vectors = n == 1 ? cols[0] : ad::concat_cols(cols);
    o.problem_vector = ad::add(ad::block(l2f[n - 1], 0, j, H, 1),
                               ad::block(l2b[0], 0, j, H, 1));
    o.pooled = ad::matmul(o.token_vectors,
                          tape.constant(Mat::Constant(n, 1, 1.0 / n)));
  }
  return out;
}

EncoderOutput encode(ad::Tape& tape, const EncoderParams& params,
                     const std::vector<int>& token_ids, double dropout_p,
                     bool train) {
  return encode_batch(tape, params, {token_ids}, 0, dropout_p, train)[0];
}

}  // namespace nss
