#pragma once

#include "nssolver/aux_tasks.hpp"
#include "nssolver/data.hpp"
#include "nssolver/dual_models.hpp"
#include "nssolver/encoder.hpp"
#include "nssolver/programmer.hpp"

#include <optional>

namespace nss {

enum ParamGroup : int {
  kGroupBackbone = 0,  // encoder + programmer
  kGroupSnp = 1,
  kGroupCcp = 2,
  kGroupDual = 3,  // tree encoder + POS decoder
  kGroupLm = 4,    // marginal language models, frozen after pretraining
};

struct AuxToggles {
  bool de = true;
  bool pcc = true;
  bool snp = true;
  bool ccp = true;
};

struct ModelDims {
  int embed_dim = 128;
  int hidden_dim = 512;
  int lm_embed_dim = 64;
  int lm_hidden_dim = 128;
  int tag_embed_dim = 64;
  int max_decode_len = 64;
};

// per-problem precomputation shared between training and evaluation
struct ProblemContext {
  const ProblemInstance* problem = nullptr;
  std::vector<int> token_ids;
  std::vector<Symbol> gold_prefix;
  std::vector<int> gold_constant_ids;  // indices into the constant vocabulary
  std::vector<int> gold_pos_ids;
  std::vector<int> eq_seq_ids;
  std::vector<int> pos_seq_ids;
  double lm_pos_logp = 0.0;  // cached log p̂(P'), filled once LMs freeze
  double lm_eq_logp = 0.0;   // cached log p̂(T)
};

// per-problem training losses on the active tape
struct ProblemLosses {
  ad::Var ent1;
  ad::Var nqp, nlp, ccp;    // valid when snp/ccp enabled
  ad::Var pcc;              // valid when pcc enabled
  ad::Var dual, ent2, pcc2; // valid when de enabled
};

struct EvalOutcome {
  bool correct = false;
  bool overflow = false;
  int gold_tree_size = 0;
  std::string type_name;
  bool nqp_correct = false;
  int nlp_correct = 0, nlp_total = 0;
  int ccp_correct = 0, ccp_total = 0;
  EquationTree predicted;
};

// The full solver: problem reader, program generator, auxiliary heads, and
// the duality branch, all over one ParameterStore.
class NsModel {
 public:
  NsModel(ModelDims dims, Vocabulary vocab,
          std::vector<Symbol> constant_vocab, SeqVocab pos_vocab,
          SeqVocab eq_vocab, int max_count, int max_length,
          std::uint64_t init_seed);

  // derives vocabularies and head sizes from the training split
  static NsModel from_training_split(const std::vector<ProblemInstance>& train,
                                     ModelDims dims, int unk_min_count,
                                     std::uint64_t init_seed);

  ProblemContext make_context(const ProblemInstance& p) const;

  // training-time pass for one problem over an already-encoded batch entry
  ProblemLosses forward_losses(ad::Tape& tape, const ProblemContext& ctx,
                               const EncoderOutput& enc,
                               const AuxToggles& toggles, double dropout_p);

  // greedy evaluation of one problem
  EvalOutcome evaluate_problem(ad::Tape& tape, const ProblemContext& ctx,
                               const EncoderOutput& enc,
                               const AuxToggles& toggles,
                               const SolveConfig& solve_cfg);

  // constants for the decoding table under the CCP toggle
  std::vector<Symbol> table_constants(const Vec& ccp_probs) const;

  ModelDims dims;
  ad::ParameterStore store;
  Vocabulary vocab;
  std::vector<Symbol> constant_vocab;
  SymbolBank bank;
  SeqVocab pos_vocab;
  SeqVocab eq_vocab;
  int max_count = 0;   // Q
  int max_length = 0;  // L

  EncoderParams encoder;
  DecoderParams decoder;
  AuxHeadParams heads;
  TreeEncoderParams tree_enc;
  PosDecoderParams pos_dec;
  LstmLmParams pos_lm;
  LstmLmParams eq_lm;

 private:
  ad::Var leaf_rep(ad::Tape& tape, const EncoderOutput& enc,
                   const ProblemContext& ctx, const Symbol& s) const;
};

}  // namespace nss
