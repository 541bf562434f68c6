#pragma once

#include "nssolver/encoder.hpp"
#include "nssolver/equation_tree.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace nss {

// token ids for language-model sequences; 0 is BOS, 1 is UNK
class SeqVocab {
 public:
  static constexpr int kBos = 0;
  static constexpr int kUnk = 1;

  static SeqVocab build(const std::vector<std::vector<std::string>>& sequences);

  int id_of(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_[id]; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

// single-layer LSTM language model scoring p(s_1..s_T) token by token
struct LstmLmParams {
  ad::Parameter* emb = nullptr;    // E x V
  ad::Parameter* w = nullptr;      // 4H x (E+H), gate order i, f, g, o
  ad::Parameter* b = nullptr;
  ad::Parameter* out_w = nullptr;  // V x H
  ad::Parameter* out_b = nullptr;
  int embed_dim = 0;
  int hidden_dim = 0;
  int vocab = 0;
};

LstmLmParams make_lstm_lm(ad::ParameterStore& store, const std::string& name,
                          int embed_dim, int hidden_dim, int vocab, int group);

// negative log-likelihood of the sequence, BOS-prefixed
ad::Var lm_nll(ad::Tape& tape, const LstmLmParams& p,
               const std::vector<int>& seq);
// tape-free evaluation for the frozen marginals
double lm_nll_value(const LstmLmParams& p, const std::vector<int>& seq);

// bottom-up encoder over a prefix equation tree
struct TreeEncoderParams {
  ad::Parameter* w = nullptr;  // H x 3H
  ad::Parameter* b = nullptr;
  int hidden = 0;
};

TreeEncoderParams make_tree_encoder(ad::ParameterStore& store, int hidden,
                                    int group);

// leaf_rep supplies the representation of every symbol (leaves and operator
// labels); node encodings return in prefix order, root first: H x size
ad::Var encode_tree(ad::Tape& tape, const TreeEncoderParams& p,
                    const EquationTree& tree,
                    const std::function<ad::Var(const Symbol&)>& leaf_rep);

// attention-equipped recurrent decoder emitting one POS tag per position
struct PosDecoderParams {
  ad::Parameter* tag_emb = nullptr;  // E_t x (|tags| + BOS slot)
  GruCellParams cell;                // input: [tag embedding; context]
  ad::Parameter* att_we = nullptr;
  ad::Parameter* att_wq = nullptr;
  ad::Parameter* att_b = nullptr;
  ad::Parameter* att_v = nullptr;  // 1 x H
  ad::Parameter* pred_w = nullptr;
  ad::Parameter* pred_b = nullptr;
  ad::Parameter* out_w = nullptr;  // |tags| x H
  ad::Parameter* out_b = nullptr;
  int tag_embed_dim = 0;
  int hidden = 0;
  int n_tags = 0;
};

PosDecoderParams make_pos_decoder(ad::ParameterStore& store, int tag_embed_dim,
                                  int hidden, int n_tags, int group);

struct PosBranchResult {
  ad::Var nll;                      // teacher-forced cross-entropy
  std::vector<ad::Var> step_probs;  // one distribution per gold tag
  std::vector<int> gold_ids;
};

// Teacher-forced decode of the problem's POS tags from the encoded gold
// tree; output length equals the tag sequence length.
PosBranchResult pos_branch(ad::Tape& tape, const PosDecoderParams& p,
                           ad::Var tree_nodes, const std::vector<int>& gold_tags,
                           double dropout_p, bool train);

}  // namespace nss
