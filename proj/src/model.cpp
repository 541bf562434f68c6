#include "nssolver/model.hpp"

#include <algorithm>
#include <cmath>

namespace nss {

using ad::Var;

NsModel::NsModel(ModelDims d, Vocabulary voc, std::vector<Symbol> const_vocab,
                 SeqVocab pvocab, SeqVocab evocab, int q, int l,
                 std::uint64_t init_seed)
    : dims(d),
      vocab(std::move(voc)),
      constant_vocab(std::move(const_vocab)),
      bank(SymbolBank::build(constant_vocab)),
      pos_vocab(std::move(pvocab)),
      eq_vocab(std::move(evocab)),
      max_count(q),
      max_length(l) {
  encoder = make_encoder(store, dims.embed_dim, dims.hidden_dim, vocab.size(),
                         kGroupBackbone);
  decoder = make_decoder(store, dims.hidden_dim, bank.size(), kGroupBackbone);
  heads = make_aux_heads(store, dims.hidden_dim, max_count, max_length,
                         static_cast<int>(constant_vocab.size()), kGroupSnp,
                         kGroupCcp);
  tree_enc = make_tree_encoder(store, dims.hidden_dim, kGroupDual);
  pos_dec = make_pos_decoder(store, dims.tag_embed_dim, dims.hidden_dim,
                             pos_vocab.size(), kGroupDual);
  pos_lm = make_lstm_lm(store, "pos_lm", dims.lm_embed_dim, dims.lm_hidden_dim,
                        pos_vocab.size(), kGroupLm);
  eq_lm = make_lstm_lm(store, "eq_lm", dims.lm_embed_dim, dims.lm_hidden_dim,
                       eq_vocab.size(), kGroupLm);

  // column vectors are biases and start at zero; matrices are Xavier-uniform
  Rng rng(init_seed);
  for (int i = 0; i < store.size(); ++i) {
    ad::Parameter& p = store.at(i);
    if (p.value.cols() == 1) ad::init_zero(p);
    else ad::init_xavier_uniform(p, rng);
  }
}

NsModel NsModel::from_training_split(const std::vector<ProblemInstance>& train,
                                     ModelDims dims, int unk_min_count,
                                     std::uint64_t init_seed) {
  int q = 0, l = 0;
  for (const auto& p : train) {
    q = std::max(q, static_cast<int>(p.number_values.size()));
    l = std::max(l, static_cast<int>(p.tokens.size()));
  }
  Vocabulary vocab = Vocabulary::build(train, unk_min_count, q);
  std::vector<Symbol> const_vocab = extract_constant_vocab(train);

  std::vector<std::vector<std::string>> pos_seqs, eq_seqs;
  for (const auto& p : train) {
    if (p.pos_tags) pos_seqs.push_back(*p.pos_tags);
    std::vector<std::string> names;
    for (const auto& s : to_prefix(p.gold_tree)) names.push_back(s.name);
    eq_seqs.push_back(std::move(names));
  }
  SeqVocab pos_vocab = SeqVocab::build(pos_seqs);
  SeqVocab eq_vocab = SeqVocab::build(eq_seqs);
  return NsModel(dims, std::move(vocab), std::move(const_vocab),
                 std::move(pos_vocab), std::move(eq_vocab), q, l, init_seed);
}

ProblemContext NsModel::make_context(const ProblemInstance& p) const {
  ProblemContext ctx;
  ctx.problem = &p;
  ctx.token_ids = vocab.encode(p.templated_tokens);
  ctx.gold_prefix = to_prefix(p.gold_tree);
  for (const auto& c : p.gold_constants()) {
    auto it = std::find(constant_vocab.begin(), constant_vocab.end(), c);
    if (it != constant_vocab.end())
      ctx.gold_constant_ids.push_back(
          static_cast<int>(it - constant_vocab.begin()));
  }
  if (p.pos_tags) ctx.gold_pos_ids = pos_vocab.encode(*p.pos_tags);
  std::vector<std::string> names;
  for (const auto& s : ctx.gold_prefix) names.push_back(s.name);
  ctx.eq_seq_ids = eq_vocab.encode(names);
  ctx.pos_seq_ids = ctx.gold_pos_ids;
  return ctx;
}

std::vector<Symbol> NsModel::table_constants(const Vec& ccp_probs) const {
  std::vector<Symbol> out;
  for (int idx : select_constants(ccp_probs))
    if (idx < static_cast<int>(constant_vocab.size()))
      out.push_back(constant_vocab[idx]);
  return out;
}

Var NsModel::leaf_rep(ad::Tape& tape, const EncoderOutput& enc,
                      const ProblemContext& ctx, const Symbol& s) const {
  int k = s.template_index();
  if (k >= 1) {
    int pos = ctx.problem->number_positions[k - 1];
    return ad::block(enc.token_vectors, 0, pos, dims.hidden_dim, 1);
  }
  int b = bank.index_of(s);
  if (b < 0) throw CoverageError(s);
  return ad::embedding_lookup(tape.param(*decoder.sym_emb), {b});
}

ProblemLosses NsModel::forward_losses(ad::Tape& tape, const ProblemContext& ctx,
                                      const EncoderOutput& enc,
                                      const AuxToggles& toggles,
                                      double dropout_p) {
  const ProblemInstance& p = *ctx.problem;
  ProblemLosses out;

  if (toggles.snp) {
    out.nqp = nqp_loss(tape, heads, enc.pooled,
                       static_cast<int>(p.number_values.size()));
    out.nlp = nlp_loss(tape, heads, enc.pooled, p.number_positions);
  }

  std::vector<Symbol> constants;
  if (toggles.ccp) {
    Var probs = ccp_probs(tape, heads, enc.pooled);
    out.ccp = ad::binary_cross_entropy(
        probs, multi_hot(std::max(1, heads.n_constants), ctx.gold_constant_ids));
    // the predicted constants constrain the table; gold ones are injected so
    // teacher forcing can always score the gold program
    constants = table_constants(Vec(probs.value().col(0)));
    for (int idx : ctx.gold_constant_ids) {
      const Symbol& c = constant_vocab[idx];
      if (std::find(constants.begin(), constants.end(), c) == constants.end())
        constants.push_back(c);
    }
  } else {
    constants = constant_vocab;
  }

  SymbolTable table = build_symbol_table(p, constants);
  TableRouting routing = route_table(table, bank, p.number_positions);
  TreeDecoder dec(tape, decoder, routing, enc, dropout_p, true);
  DecodeResult tf = dec.decode_teacher_forced(ctx.gold_prefix);
  out.ent1 = sequence_nll(tape, tf.steps);

  if (toggles.pcc) {
    std::vector<Var> dists;
    std::vector<int> gold_ids;
    for (const auto& s : tf.steps) {
      dists.push_back(s.probs);
      gold_ids.push_back(s.emitted);
    }
    out.pcc = semantic_loss(tape, dists, gold_ids);
  }

  if (toggles.de && !ctx.gold_pos_ids.empty()) {
    Var nodes = encode_tree(tape, tree_enc, p.gold_tree,
                            [&](const Symbol& s) {
                              return leaf_rep(tape, enc, ctx, s);
                            });
    PosBranchResult pos = pos_branch(tape, pos_dec, nodes, ctx.gold_pos_ids,
                                     dropout_p, true);
    out.ent2 = pos.nll;
    out.pcc2 = semantic_loss(tape, pos.step_probs, pos.gold_ids);
    out.dual = dual_loss(tape, ctx.lm_pos_logp, out.ent1, ctx.lm_eq_logp,
                         out.ent2);
  }
  return out;
}

EvalOutcome NsModel::evaluate_problem(ad::Tape& tape,
                                      const ProblemContext& ctx,
                                      const EncoderOutput& enc,
                                      const AuxToggles& toggles,
                                      const SolveConfig& solve_cfg) {
  const ProblemInstance& p = *ctx.problem;
  EvalOutcome out;
  out.gold_tree_size = compute_tree_size(p.gold_tree);
  out.type_name = problem_type_name(p.type);

  // auxiliary binary accuracies
  {
    const Mat& lp = nqp_log_probs(tape, heads, enc.pooled).value();
    int best = 0;
    for (Eigen::Index i = 1; i < lp.size(); ++i)
      if (lp(i) > lp(best)) best = static_cast<int>(i);
    out.nqp_correct = best == static_cast<int>(p.number_values.size());

    const Mat& npv = nlp_probs(tape, heads, enc.pooled).value();
    Mat target = multi_hot(heads.max_length, [&] {
      std::vector<int> pos;
      for (int q : p.number_positions)
        if (q < heads.max_length) pos.push_back(q);
      return pos;
    }());
    out.nlp_total = heads.max_length;
    for (int i = 0; i < heads.max_length; ++i)
      if ((npv(i) >= 0.5) == (target(i) >= 0.5)) ++out.nlp_correct;
  }

  std::vector<Symbol> constants;
  Vec cp;
  if (heads.n_constants > 0) {
    cp = Vec(ccp_probs(tape, heads, enc.pooled).value().col(0));
    Mat target = multi_hot(heads.n_constants, ctx.gold_constant_ids);
    out.ccp_total = heads.n_constants;
    for (int i = 0; i < heads.n_constants; ++i)
      if ((cp(i) >= 0.5) == (target(i) >= 0.5)) ++out.ccp_correct;
  }
  constants = (toggles.ccp && heads.n_constants > 0) ? table_constants(cp)
                                                     : constant_vocab;

  SymbolTable table = build_symbol_table(p, constants);
  TableRouting routing = route_table(table, bank, p.number_positions);
  TreeDecoder dec(tape, decoder, routing, enc, 0.0, false);
  DecodeResult res = dec.decode_greedy(dims.max_decode_len);
  out.overflow = res.overflow;
  if (!res.overflow) {
    out.predicted = res.tree;
    out.correct = grade(res.tree, p.number_values, p.gold_answers, solve_cfg);
  }
  return out;
}

}  // namespace nss
