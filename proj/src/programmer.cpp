#include "nssolver/programmer.hpp"

#include <algorithm>
#include <cassert>
#include <functional>

namespace nss {

using ad::Var;

SymbolBank SymbolBank::build(const std::vector<Symbol>& constant_vocab) {
  SymbolBank bank;
  for (const auto& name : operator_names()) bank.symbols.push_back(Symbol::op(name));
  bank.symbols.push_back(Symbol::unknown("x"));
  bank.symbols.push_back(Symbol::unknown("y"));
  for (const auto& c : constant_vocab)
    if (bank.index_of(c) < 0) bank.symbols.push_back(c);
  return bank;
}

int SymbolBank::index_of(const Symbol& s) const {
  for (std::size_t i = 0; i < symbols.size(); ++i)
    if (symbols[i] == s) return static_cast<int>(i);
  return -1;
}

DecoderParams make_decoder(ad::ParameterStore& store, int hidden,
                           int bank_size, int group) {
  DecoderParams p;
  p.hidden = hidden;
  p.sym_emb = &store.add("decoder.sym_emb", hidden, bank_size, group);
  p.att_we = &store.add("decoder.att_we", hidden, hidden, group);
  p.att_wq = &store.add("decoder.att_wq", hidden, hidden, group);
  p.att_b = &store.add("decoder.att_b", hidden, 1, group);
  p.att_v = &store.add("decoder.att_v", 1, hidden, group);
  p.pred_w = &store.add("decoder.pred_w", hidden, 2 * hidden, group);
  p.pred_b = &store.add("decoder.pred_b", hidden, 1, group);
  p.left_w = &store.add("decoder.left_w", hidden, 3 * hidden, group);
  p.left_b = &store.add("decoder.left_b", hidden, 1, group);
  p.right_w = &store.add("decoder.right_w", hidden, 3 * hidden, group);
  p.right_b = &store.add("decoder.right_b", hidden, 1, group);
  p.merge_w = &store.add("decoder.merge_w", hidden, 3 * hidden, group);
  p.merge_b = &store.add("decoder.merge_b", hidden, 1, group);
  return p;
}

TableRouting route_table(const SymbolTable& table, const SymbolBank& bank,
                         const std::vector<int>& number_positions) {
  TableRouting r;
  r.table = &table;
  int n = table.size();
  r.bank_index.assign(n, -1);
  r.token_position.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    const Symbol& s = table.at(i);
    int k = s.template_index();
    if (k >= 1) {
      if (k > static_cast<int>(number_positions.size()))
        throw CoverageError(s);
      r.token_position[i] = number_positions[k - 1];
    } else {
      int b = bank.index_of(s);
      if (b < 0) throw CoverageError(s);
      r.bank_index[i] = b;
    }
  }
  return r;
}

TreeDecoder::TreeDecoder(ad::Tape& tape, const DecoderParams& params,
                         const TableRouting& routing, const EncoderOutput& enc,
                         double dropout_p, bool train)
    : tape_(tape),
      params_(params),
      routing_(routing),
      enc_(enc),
      dropout_p_(dropout_p),
      train_(train) {
  ue_ = ad::matmul(tape_.param(*params_.att_we), enc_.token_vectors);
  int n = routing_.table->size();
  reps_.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (routing_.token_position[i] >= 0)
      reps_.push_back(ad::block(enc_.token_vectors, 0,
                                routing_.token_position[i], params_.hidden, 1));
    else
      reps_.push_back(ad::embedding_lookup(tape_.param(*params_.sym_emb),
                                           {routing_.bank_index[i]}));
  }
  table_matrix_t_ = ad::transpose(ad::concat_cols(reps_));
}

Var TreeDecoder::attention(Var goal) const {
  Var att_q = ad::add(ad::matmul(tape_.param(*params_.att_wq), goal),
                      tape_.param(*params_.att_b));
  Var m = ad::tanh(ad::add_colvec(ue_, att_q));
  Var scores = ad::matmul(tape_.param(*params_.att_v), m);  // 1 x n
  Var weights = ad::softmax(ad::transpose(scores));         // n x 1
  return ad::matmul(enc_.token_vectors, weights);
}

Var TreeDecoder::rep(int table_index) const { return reps_[table_index]; }

std::vector<std::uint8_t> TreeDecoder::legality_mask(const Frame& f) const {
  std::vector<std::uint8_t> mask(routing_.table->size(), 1);
  // operators come first; '=' sits at 5 and ';' at 6
  mask[5] = f.at_segment_root ? 1 : 0;
  mask[6] = f.allow_semi ? 1 : 0;
  return mask;
}

Var TreeDecoder::materialize_goal(const Frame& f) const {
  if (!f.deferred) return f.goal;
  Var in = ad::vconcat(ad::vconcat(f.parent_goal, f.op_emb), f.left_emb);
  return ad::tanh(ad::add(ad::matmul(tape_.param(*params_.right_w), in),
                          tape_.param(*params_.right_b)));
}

template <class EmitFn>
DecodeResult TreeDecoder::run(EmitFn emit, int max_len, bool masked) {
  DecoderState st;
  Frame root;
  root.goal = enc_.problem_vector;
  root.parent = -1;
  root.at_segment_root = true;
  root.allow_semi = routing_.table->unknowns().size() >= 2;
  st.goal_stack.push_back(root);

  DecodeResult result;
  while (!st.goal_stack.empty()) {
    if (static_cast<int>(st.partial_prefix.size()) >= max_len) {
      result.overflow = true;
      result.steps = std::move(st.step_distributions);
      return result;
    }
    Frame fr = st.goal_stack.back();
    st.goal_stack.pop_back();

    Var q = materialize_goal(fr);
    Var context = attention(q);
    Var f = ad::tanh(
        ad::add(ad::matmul(tape_.param(*params_.pred_w), ad::vconcat(q, context)),
                tape_.param(*params_.pred_b)));
    f = ad::dropout(f, dropout_p_, train_);
    Var logits = ad::matmul(table_matrix_t_, f);  // |table| x 1

    DecodeStep step;
    int emitted = emit(static_cast<int>(st.partial_prefix.size()), logits,
                       masked ? legality_mask(fr) : std::vector<std::uint8_t>(),
                       step);
    step.emitted = emitted;
    st.step_distributions.push_back(step);

    const Symbol& sym = routing_.table->at(emitted);
    st.partial_prefix.push_back(sym);
    int node = static_cast<int>(st.nodes.size());
    BuildNode bn;
    bn.sym = sym;
    bn.parent = fr.parent;
    st.nodes.push_back(bn);
    if (fr.parent >= 0) {
      if (fr.is_right) st.nodes[fr.parent].right = node;
      else st.nodes[fr.parent].left = node;
    }

    if (sym.is_operator()) {
      Var op_emb = rep(emitted);
      st.nodes[node].op_emb = op_emb;
      bool child_seg_root = sym.name == ";";
      Frame right;
      right.deferred = true;
      right.parent_goal = q;
      right.op_emb = op_emb;
      right.parent = node;
      right.is_right = true;
      right.at_segment_root = child_seg_root;
      right.allow_semi = false;  // at most two segments
      Frame left;
      Var lin = ad::vconcat(ad::vconcat(q, context), op_emb);
      left.goal = ad::tanh(ad::add(ad::matmul(tape_.param(*params_.left_w), lin),
                                   tape_.param(*params_.left_b)));
      left.parent = node;
      left.is_right = false;
      left.at_segment_root = child_seg_root;
      left.allow_semi = false;
      st.goal_stack.push_back(right);
      st.goal_stack.push_back(left);
    } else {
      // leaf: bubble completed subtrees upward
      int cur = node;
      Var emb = rep(emitted);
      for (;;) {
        st.nodes[cur].emb = emb;
        int par = st.nodes[cur].parent;
        if (par < 0) break;
        if (st.nodes[par].left == cur) {
          assert(!st.goal_stack.empty() && st.goal_stack.back().deferred &&
                 st.goal_stack.back().parent == par);
          st.goal_stack.back().left_emb = emb;
          break;
        }
        Var min = ad::vconcat(
            ad::vconcat(st.nodes[par].op_emb, st.nodes[st.nodes[par].left].emb),
            emb);
        emb = ad::tanh(ad::add(ad::matmul(tape_.param(*params_.merge_w), min),
                               tape_.param(*params_.merge_b)));
        cur = par;
      }
    }
  }

  // assemble the tree from the build nodes
  std::function<EquationTree(int)> assemble = [&](int idx) -> EquationTree {
    const BuildNode& bn = st.nodes[idx];
    if (bn.left < 0) return EquationTree::leaf(bn.sym);
    return EquationTree::internal(bn.sym, assemble(bn.left), assemble(bn.right));
  };
  result.tree = assemble(0);
  result.steps = std::move(st.step_distributions);
  return result;
}

DecodeResult TreeDecoder::decode_teacher_forced(
    const std::vector<Symbol>& gold_prefix) {
  for (const Symbol& s : gold_prefix)
    if (routing_.table->index_of(s) < 0) throw CoverageError(s);
  auto emit = [&](int pos, Var logits, const std::vector<std::uint8_t>&,
                  DecodeStep& step) {
    step.probs = ad::softmax(logits);
    step.log_probs = ad::log_softmax(logits);
    return routing_.table->index_of(gold_prefix[pos]);
  };
  return run(emit, static_cast<int>(gold_prefix.size()), false);
}

DecodeResult TreeDecoder::decode_greedy(int max_len) {
  auto emit = [&](int, Var logits, const std::vector<std::uint8_t>& mask,
                  DecodeStep& step) {
    step.probs = ad::masked_softmax(logits, mask);
    const Mat& p = step.probs.value();
    int best = -1;
    double bv = -1.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (mask[i] && p(i) > bv) {
        bv = p(i);
        best = static_cast<int>(i);
      }
    return best;
  };
  return run(emit, max_len, true);
}

Var sequence_nll(ad::Tape& tape, const std::vector<DecodeStep>& steps) {
  Var total = tape.scalar(0.0);
  for (const auto& s : steps)
    total = ad::add(total, ad::categorical_cross_entropy(s.log_probs, s.emitted));
  return total;
}

}  // namespace nss
