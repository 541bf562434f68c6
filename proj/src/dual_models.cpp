#include "nssolver/dual_models.hpp"

#include <algorithm>
#include <cmath>

namespace nss {

using ad::Var;

SeqVocab SeqVocab::build(const std::vector<std::vector<std::string>>& sequences) {
  SeqVocab v;
  v.tokens_ = {"<bos>", "<unk>"};
  v.ids_ = {{"<bos>", 0}, {"<unk>", 1}};
  std::map<std::string, int> counts;
  for (const auto& seq : sequences)
    for (const auto& tok : seq) counts[tok] += 1;
  // std::map iteration keeps the order deterministic
  for (const auto& [tok, count] : counts) {
    (void)count;
    if (!v.ids_.count(tok)) {
      v.ids_[tok] = static_cast<int>(v.tokens_.size());
      v.tokens_.push_back(tok);
    }
  }
  return v;
}

int SeqVocab::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> SeqVocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id_of(t));
  return out;
}

LstmLmParams make_lstm_lm(ad::ParameterStore& store, const std::string& name,
                          int embed_dim, int hidden_dim, int vocab, int group) {
  LstmLmParams p;
  p.embed_dim = embed_dim;
  p.hidden_dim = hidden_dim;
  p.vocab = vocab;
  p.emb = &store.add(name + ".emb", embed_dim, vocab, group);
  p.w = &store.add(name + ".w", 4 * hidden_dim, embed_dim + hidden_dim, group);
  p.b = &store.add(name + ".b", 4 * hidden_dim, 1, group);
  p.out_w = &store.add(name + ".out_w", vocab, hidden_dim, group);
  p.out_b = &store.add(name + ".out_b", vocab, 1, group);
  return p;
}

Var lm_nll(ad::Tape& tape, const LstmLmParams& p, const std::vector<int>& seq) {
  int H = p.hidden_dim;
  Var h = tape.constant(Mat::Zero(H, 1));
  Var c = tape.constant(Mat::Zero(H, 1));
  Var emb = tape.param(*p.emb);
  Var total = tape.scalar(0.0);
  int prev = SeqVocab::kBos;
  for (int target : seq) {
    Var x = ad::embedding_lookup(emb, {prev});
    Var gates = ad::add(ad::matmul(tape.param(*p.w), ad::vconcat(x, h)),
                        tape.param(*p.b));
    Var i = ad::sigmoid(ad::block(gates, 0, 0, H, 1));
    Var f = ad::sigmoid(ad::block(gates, H, 0, H, 1));
    Var g = ad::tanh(ad::block(gates, 2 * H, 0, H, 1));
    Var o = ad::sigmoid(ad::block(gates, 3 * H, 0, H, 1));
    c = ad::add(ad::mul(f, c), ad::mul(i, g));
    h = ad::mul(o, ad::tanh(c));
    Var logits = ad::add(ad::matmul(tape.param(*p.out_w), h),
                         tape.param(*p.out_b));
    total = ad::add(total,
                    ad::categorical_cross_entropy(ad::log_softmax(logits), target));
    prev = target;
  }
  return total;
}

double lm_nll_value(const LstmLmParams& p, const std::vector<int>& seq) {
  int H = p.hidden_dim;
  Vec h = Vec::Zero(H), c = Vec::Zero(H);
  double total = 0.0;
  int prev = SeqVocab::kBos;
  for (int target : seq) {
    Vec xh(p.embed_dim + H);
    xh.head(p.embed_dim) = p.emb->value.col(prev);
    xh.tail(H) = h;
    Vec gates = p.w->value * xh + p.b->value.col(0);
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (int k = 0; k < H; ++k) {
      double i = sig(gates(k));
      double f = sig(gates(H + k));
      double g = std::tanh(gates(2 * H + k));
      double o = sig(gates(3 * H + k));
      c(k) = f * c(k) + i * g;
      h(k) = o * std::tanh(c(k));
    }
    Vec logits = p.out_w->value * h + p.out_b->value.col(0);
    double m = logits.maxCoeff();
    double lse = m + std::log((logits.array() - m).exp().sum());
    total += lse - logits(target);
    prev = target;
  }
  return total;
}

TreeEncoderParams make_tree_encoder(ad::ParameterStore& store, int hidden,
                                    int group) {
  TreeEncoderParams p;
  p.hidden = hidden;
  p.w = &store.add("tree_enc.w", hidden, 3 * hidden, group);
  p.b = &store.add("tree_enc.b", hidden, 1, group);
  return p;
}

namespace {

Var encode_tree_rec(ad::Tape& tape, const TreeEncoderParams& p,
                    const EquationTree::Node& node,
                    const std::function<Var(const Symbol&)>& leaf_rep,
                    std::vector<Var>& prefix_slots, int& cursor) {
  int slot = cursor++;
  if (node.is_leaf()) {
    Var v = leaf_rep(node.symbol);
    prefix_slots[slot] = v;
    return v;
  }
  Var op = leaf_rep(node.symbol);
  Var l = encode_tree_rec(tape, p, *node.left, leaf_rep, prefix_slots, cursor);
  Var r = encode_tree_rec(tape, p, *node.right, leaf_rep, prefix_slots, cursor);
  Var in = ad::vconcat(ad::vconcat(op, l), r);
  Var v = ad::tanh(ad::add(ad::matmul(tape.param(*p.w), in), tape.param(*p.b)));
  prefix_slots[slot] = v;
  return v;
}

}  // namespace

Var encode_tree(ad::Tape& tape, const TreeEncoderParams& p,
                const EquationTree& tree,
                const std::function<Var(const Symbol&)>& leaf_rep) {
  int size = compute_tree_size(tree);
  std::vector<Var> slots(size);
  int cursor = 0;
  encode_tree_rec(tape, p, tree.root(), leaf_rep, slots, cursor);
  return size == 1 ? slots[0] : ad::concat_cols(slots);
}

PosDecoderParams make_pos_decoder(ad::ParameterStore& store, int tag_embed_dim,
                                  int hidden, int n_tags, int group) {
  PosDecoderParams p;
  p.tag_embed_dim = tag_embed_dim;
  p.hidden = hidden;
  p.n_tags = n_tags;
  p.tag_emb = &store.add("pos_dec.tag_emb", tag_embed_dim, n_tags + 1, group);
  p.cell = make_gru_cell(store, "pos_dec.cell", tag_embed_dim, hidden, group);
  p.att_we = &store.add("pos_dec.att_we", hidden, hidden, group);
  p.att_wq = &store.add("pos_dec.att_wq", hidden, hidden, group);
  p.att_b = &store.add("pos_dec.att_b", hidden, 1, group);
  p.att_v = &store.add("pos_dec.att_v", 1, hidden, group);
  p.pred_w = &store.add("pos_dec.pred_w", hidden, 2 * hidden, group);
  p.pred_b = &store.add("pos_dec.pred_b", hidden, 1, group);
  p.out_w = &store.add("pos_dec.out_w", n_tags, hidden, group);
  p.out_b = &store.add("pos_dec.out_b", n_tags, 1, group);
  return p;
}

PosBranchResult pos_branch(ad::Tape& tape, const PosDecoderParams& p,
                           Var tree_nodes, const std::vector<int>& gold_tags,
                           double dropout_p, bool train) {
  PosBranchResult res;
  res.gold_ids = gold_tags;
  // attention keys over the tree's node encodings, shared across steps
  Var keys = ad::matmul(tape.param(*p.att_we), tree_nodes);
  Var state = ad::block(tree_nodes, 0, 0, p.hidden, 1);  // root encoding
  int bos = p.n_tags;  // last tag-embedding column
  int prev = bos;
  Var total = tape.scalar(0.0);
  for (int gold : gold_tags) {
    Var x = ad::embedding_lookup(tape.param(*p.tag_emb), {prev});
    state = gru_step(tape, p.cell, x, state);
    Var att_q = ad::add(ad::matmul(tape.param(*p.att_wq), state),
                        tape.param(*p.att_b));
    Var m = ad::tanh(ad::add_colvec(keys, att_q));
    Var scores = ad::matmul(tape.param(*p.att_v), m);
    Var weights = ad::softmax(ad::transpose(scores));
    Var context = ad::matmul(tree_nodes, weights);
    Var f = ad::tanh(ad::add(
        ad::matmul(tape.param(*p.pred_w), ad::vconcat(state, context)),
        tape.param(*p.pred_b)));
    f = ad::dropout(f, dropout_p, train);
    Var logits = ad::add(ad::matmul(tape.param(*p.out_w), f),
                         tape.param(*p.out_b));
    res.step_probs.push_back(ad::softmax(logits));
    total = ad::add(total,
                    ad::categorical_cross_entropy(ad::log_softmax(logits), gold));
    prev = gold;
  }
  res.nll = total;
  return res;
}

}  // namespace nss
