#pragma once

#include "nssolver/model.hpp"
#include "nssolver/optimizer.hpp"

#include <iosfwd>
#include <string>

namespace nss {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingConfig {
  double lambda1 = 0.0005;  // duality
  double lambda2 = 0.01;    // program consistency
  double lambda3 = 1.0;     // number prediction
  double lambda4 = 1.0;     // constant prediction
  double lambda5 = 0.005;   // duality, POS branch
  double lambda6 = 0.1;     // POS-side consistency
  double lr = 1e-3;
  int halve_every = 40;
  int batch = 32;
  double dropout = 0.5;
  double weight_decay = 1e-5;
  int epochs = 80;
  std::uint64_t seed = 1;
  int unk_min_count = 5;
  AuxToggles aux;
  int embedding_dim = 128;
  int hidden_dim = 512;
  int threads = 0;  // 0 = hardware concurrency, capped at 8
  int eval_every = 1;
  int max_decode_len = 64;
  int lm_epochs = 20;
  std::string pos_lexicon;  // optional lexicon path for untagged corpora

  static TrainingConfig from_json_file(const std::string& path);
  static TrainingConfig from_json_text(const std::string& text);
  std::string to_json() const;

  ModelDims model_dims() const;
  std::vector<int> active_groups() const;
  int resolved_threads() const;
};

// per-problem loss components as plain values, for logs and closed forms
struct LossComponents {
  double ent1 = 0, dual = 0, pcc = 0, nqp = 0, nlp = 0, ccp = 0;
  double ent2 = 0, pcc2 = 0;

  LossComponents& operator+=(const LossComponents& o);
  LossComponents scaled(double f) const;
};

// main-branch objective; disabled toggles contribute exactly zero
double total_loss_value(const LossComponents& c, const TrainingConfig& cfg);
// POS-branch objective
double pos_branch_loss_value(const LossComponents& c, const TrainingConfig& cfg);

// tape-side composition of one problem's losses
ad::Var combine_losses(ad::Tape& tape, const ProblemLosses& losses,
                       const TrainingConfig& cfg, LossComponents* out_values);

struct EpochLog {
  int epoch = 0;
  double lr = 0;
  LossComponents mean;  // per-problem means
  double total = 0;     // mean combined loss
  double train_acc = -1, valid_acc = -1;  // -1 before first evaluation
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_valid_acc = -1;
  double final_train_acc = -1;
  double final_valid_acc = -1;
};

// Joint training with per-epoch component logs; the best-validation
// parameters are restored into the model on return. metrics_out, when given,
// receives one JSON line per epoch.
TrainResult train(NsModel& model, const std::vector<ProblemInstance>& train_set,
                  const std::vector<ProblemInstance>& valid_set,
                  const TrainingConfig& cfg, std::ostream* metrics_out);

// answer accuracy of greedy decoding over a record set
double answer_accuracy(NsModel& model,
                       const std::vector<ProblemContext>& contexts,
                       const AuxToggles& toggles, int threads,
                       std::uint64_t seed_tag);

std::vector<ProblemContext> make_contexts(
    const NsModel& model, const std::vector<ProblemInstance>& records);

// marginal language-model pretraining (group kGroupLm), then priors cached
void pretrain_language_models(NsModel& model,
                              std::vector<ProblemContext>& contexts,
                              const TrainingConfig& cfg);

}  // namespace nss
