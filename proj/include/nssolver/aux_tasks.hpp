#pragma once

#include "nssolver/autodiff.hpp"
#include "nssolver/symbol.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace nss {

// Single-layer feed-forward heads over the pooled encoder output: number
// quantity (softmax over 0..Q), number locations (per-position sigmoid over
// L slots), and commonsense constants (per-constant sigmoid over the
// dataset vocabulary).
struct AuxHeadParams {
  ad::Parameter* nqp_w = nullptr;
  ad::Parameter* nqp_b = nullptr;
  ad::Parameter* nlp_w = nullptr;
  ad::Parameter* nlp_b = nullptr;
  ad::Parameter* ccp_w = nullptr;
  ad::Parameter* ccp_b = nullptr;
  int max_count = 0;    // Q
  int max_length = 0;   // L
  int n_constants = 0;  // C
};

AuxHeadParams make_aux_heads(ad::ParameterStore& store, int hidden,
                             int max_count, int max_length, int n_constants,
                             int group_snp, int group_ccp);

struct AuxConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ad::Var nqp_log_probs(ad::Tape& tape, const AuxHeadParams& p, ad::Var pooled);
ad::Var nlp_probs(ad::Tape& tape, const AuxHeadParams& p, ad::Var pooled);
ad::Var ccp_probs(ad::Tape& tape, const AuxHeadParams& p, ad::Var pooled);

// categorical cross-entropy over {0..Q}
ad::Var nqp_loss(ad::Tape& tape, const AuxHeadParams& p, ad::Var pooled,
                 int true_count);
// binary cross-entropy against the multi-hot position target
ad::Var nlp_loss(ad::Tape& tape, const AuxHeadParams& p, ad::Var pooled,
                 const std::vector<int>& true_positions);
// binary cross-entropy against the multi-hot constant target
ad::Var ccp_loss(ad::Tape& tape, const AuxHeadParams& p, ad::Var pooled,
                 const std::vector<int>& true_constant_indices);

Mat multi_hot(int size, const std::vector<int>& indices);

// Constants selected for the symbolic table: every index with p >= 0.5 plus
// the three most probable below the threshold, descending probability
// (ties break toward the lower index).
std::vector<int> select_constants(const Vec& probs);

// Semantic loss between step distributions and the gold symbols: with p_i
// the probability of the step's argmax symbol, the loss is
// -log prod_i [ p_i if argmax == gold else (1 - p_i) ], clamped.
ad::Var semantic_loss(ad::Tape& tape, const std::vector<ad::Var>& dists,
                      const std::vector<int>& gold_indices);
double semantic_loss_value(const std::vector<Vec>& dists,
                           const std::vector<int>& gold_indices);

// squared difference of the two duality pathway sums
double dual_loss_value(double logp_pos_prior, double logp_T_given_P,
                       double logp_T_prior, double logp_pos_given_T);
// tape route: the conditional terms arrive as sequence NLLs (= -log p)
ad::Var dual_loss(ad::Tape& tape, double logp_pos_prior, ad::Var nll_T_given_P,
                  double logp_T_prior, ad::Var nll_pos_given_T);

// Deterministic lexicon tagger for the synthetic corpus: lexicon lookup,
// number templates tag as NUM, anything else as X.
class PosLexicon {
 public:
  static PosLexicon builtin();
  static PosLexicon load(const std::string& path);  // token<TAB>TAG per line

  void insert(const std::string& token, const std::string& tag);
  std::size_t size() const { return map_.size(); }
  std::vector<std::string> tag(const std::vector<std::string>& tokens) const;

 private:
  std::unordered_map<std::string, std::string> map_;
};

std::vector<std::string> rule_pos_tagger(const std::vector<std::string>& tokens);

}  // namespace nss
