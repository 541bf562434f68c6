#pragma once

#include "nssolver/encoder.hpp"
#include "nssolver/equation_tree.hpp"
#include "nssolver/symbol.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace nss {

// a gold symbol the current table cannot score
struct CoverageError : std::runtime_error {
  explicit CoverageError(const Symbol& s)
      : std::runtime_error("decoder: gold symbol missing from table: " + s.name),
        symbol(s) {}
  Symbol symbol;
};

// Dataset-level bank of symbols with learned vectors: the seven operators,
// the unknowns, and every constant of the constant vocabulary. Number
// templates are represented by encoder token vectors instead.
struct SymbolBank {
  std::vector<Symbol> symbols;

  static SymbolBank build(const std::vector<Symbol>& constant_vocab);
  int index_of(const Symbol& s) const;
  int size() const { return static_cast<int>(symbols.size()); }
};

struct DecoderParams {
  ad::Parameter* sym_emb = nullptr;  // H x |bank|
  ad::Parameter* att_we = nullptr;
  ad::Parameter* att_wq = nullptr;
  ad::Parameter* att_b = nullptr;
  ad::Parameter* att_v = nullptr;  // 1 x H
  ad::Parameter* pred_w = nullptr;
  ad::Parameter* pred_b = nullptr;
  ad::Parameter* left_w = nullptr;
  ad::Parameter* left_b = nullptr;
  ad::Parameter* right_w = nullptr;
  ad::Parameter* right_b = nullptr;
  ad::Parameter* merge_w = nullptr;
  ad::Parameter* merge_b = nullptr;
  int hidden = 0;
};

DecoderParams make_decoder(ad::ParameterStore& store, int hidden,
                           int bank_size, int group);

// per-table-entry routing: learned bank column or encoder token position
struct TableRouting {
  const SymbolTable* table = nullptr;
  std::vector<int> bank_index;      // >= 0 for non-template entries
  std::vector<int> token_position;  // >= 0 for template entries
};

TableRouting route_table(const SymbolTable& table, const SymbolBank& bank,
                         const std::vector<int>& number_positions);

struct DecodeStep {
  ad::Var probs;      // distribution over the table
  ad::Var log_probs;  // teacher-forced steps only
  int emitted = -1;   // table index
};

struct DecodeResult {
  EquationTree tree;  // empty when overflowed
  bool overflow = false;
  std::vector<DecodeStep> steps;
};

// Goal-driven decoding over one problem: an operator emission pushes two
// child obligations, the right one conditioned on the finished left subtree;
// decoding ends exactly when the goal stack empties.
class TreeDecoder {
 public:
  TreeDecoder(ad::Tape& tape, const DecoderParams& params,
              const TableRouting& routing, const EncoderOutput& enc,
              double dropout_p, bool train);

  // one full-table distribution per gold prefix position, gold history fed back
  DecodeResult decode_teacher_forced(const std::vector<Symbol>& gold_prefix);

  // argmax decoding over the legality-masked table (ties break low)
  DecodeResult decode_greedy(int max_len = 64);

  // additive attention over the problem's token vectors; weights sum to 1
  ad::Var attention(ad::Var goal) const;

 private:
  struct Frame {
    ad::Var goal;
    bool deferred = false;
    ad::Var parent_goal, op_emb, left_emb;
    int parent = -1;
    bool is_right = false;
    bool at_segment_root = false;
    bool allow_semi = false;
  };
  struct BuildNode {
    Symbol sym;
    int parent = -1;
    int left = -1, right = -1;
    ad::Var emb;
    ad::Var op_emb;
  };
  struct DecoderState {
    std::vector<Frame> goal_stack;
    std::vector<Symbol> partial_prefix;
    std::vector<DecodeStep> step_distributions;
    std::vector<BuildNode> nodes;
  };

  template <class EmitFn>
  DecodeResult run(EmitFn emit, int max_len, bool masked);

  ad::Var rep(int table_index) const;
  std::vector<std::uint8_t> legality_mask(const Frame& f) const;
  ad::Var materialize_goal(const Frame& f) const;

  ad::Tape& tape_;
  const DecoderParams& params_;
  const TableRouting& routing_;
  const EncoderOutput& enc_;
  double dropout_p_;
  bool train_;
  ad::Var ue_;             // att_we * token_vectors, shared across steps
  ad::Var table_matrix_t_; // |table| x H
  std::vector<ad::Var> reps_;
};

// sum of per-step negative log-likelihoods of the emitted symbols
ad::Var sequence_nll(ad::Tape& tape, const std::vector<DecodeStep>& steps);

}  // namespace nss
