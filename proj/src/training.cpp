#include "nssolver/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace nss {

using ad::Var;
using nlohmann::json;

TrainingConfig TrainingConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrainingError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

TrainingConfig TrainingConfig::from_json_text(const std::string& text) {
  json j = json::parse(text);
  TrainingConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("lambda1", c.lambda1);
  get("lambda2", c.lambda2);
  get("lambda3", c.lambda3);
  get("lambda4", c.lambda4);
  get("lambda5", c.lambda5);
  get("lambda6", c.lambda6);
  get("lr", c.lr);
  get("halve_every", c.halve_every);
  get("batch", c.batch);
  get("dropout", c.dropout);
  get("weight_decay", c.weight_decay);
  get("epochs", c.epochs);
  get("seed", c.seed);
  get("unk_min_count", c.unk_min_count);
  get("de", c.aux.de);
  get("pcc", c.aux.pcc);
  get("snp", c.aux.snp);
  get("ccp", c.aux.ccp);
  get("embedding_dim", c.embedding_dim);
  get("hidden_dim", c.hidden_dim);
  get("threads", c.threads);
  get("eval_every", c.eval_every);
  get("max_decode_len", c.max_decode_len);
  get("lm_epochs", c.lm_epochs);
  get("pos_lexicon", c.pos_lexicon);
  if (c.batch < 1) throw TrainingError("config: batch must be >= 1");
  for (double l : {c.lambda1, c.lambda2, c.lambda3, c.lambda4, c.lambda5, c.lambda6})
    if (l < 0) throw TrainingError("config: lambdas must be non-negative");
  return c;
}

std::string TrainingConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["lambda3"] = lambda3;
  j["lambda4"] = lambda4;
  j["lambda5"] = lambda5;
  j["lambda6"] = lambda6;
  j["lr"] = lr;
  j["halve_every"] = halve_every;
  j["batch"] = batch;
  j["dropout"] = dropout;
  j["weight_decay"] = weight_decay;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["unk_min_count"] = unk_min_count;
  j["de"] = aux.de;
  j["pcc"] = aux.pcc;
  j["snp"] = aux.snp;
  j["ccp"] = aux.ccp;
  j["embedding_dim"] = embedding_dim;
  j["hidden_dim"] = hidden_dim;
  j["threads"] = threads;
  j["eval_every"] = eval_every;
  j["max_decode_len"] = max_decode_len;
  j["lm_epochs"] = lm_epochs;
  j["pos_lexicon"] = pos_lexicon;
  return j.dump();
}

ModelDims TrainingConfig::model_dims() const {
  ModelDims d;
  d.embed_dim = embedding_dim;
  d.hidden_dim = hidden_dim;
  d.max_decode_len = max_decode_len;
  return d;
}

std::vector<int> TrainingConfig::active_groups() const {
  std::vector<int> g = {kGroupBackbone};
  if (aux.snp) g.push_back(kGroupSnp);
  if (aux.ccp) g.push_back(kGroupCcp);
  if (aux.de) g.push_back(kGroupDual);
  return g;
}

int TrainingConfig::resolved_threads() const {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(8u, std::max(1u, hw)));
}

LossComponents& LossComponents::operator+=(const LossComponents& o) {
  ent1 += o.ent1;
  dual += o.dual;
  pcc += o.pcc;
  nqp += o.nqp;
  nlp += o.nlp;
  ccp += o.ccp;
  ent2 += o.ent2;
  pcc2 += o.pcc2;
  return *this;
}

LossComponents LossComponents::scaled(double f) const {
  LossComponents c = *this;
  c.ent1 *= f;
  c.dual *= f;
  c.pcc *= f;
  c.nqp *= f;
  c.nlp *= f;
  c.ccp *= f;
  c.ent2 *= f;
  c.pcc2 *= f;
  return c;
}

double total_loss_value(const LossComponents& c, const TrainingConfig& cfg) {
  double l = c.ent1;
  if (cfg.aux.de) l += cfg.lambda1 * c.dual;
  if (cfg.aux.pcc) l += cfg.lambda2 * c.pcc;
  if (cfg.aux.snp) l += cfg.lambda3 * (c.nqp + c.nlp);
  if (cfg.aux.ccp) l += cfg.lambda4 * c.ccp;
  return l;
}

double pos_branch_loss_value(const LossComponents& c, const TrainingConfig& cfg) {
  if (!cfg.aux.de) return 0.0;
  return c.ent2 + cfg.lambda5 * c.dual + cfg.lambda6 * c.pcc2;
}

namespace {

double checked_value(const Var& v, const char* name, int epoch, int step,
                     const std::string& id) {
  double x = v.value()(0, 0);
  if (!std::isfinite(x))
    throw TrainingError(std::string("non-finite ") + name + " at epoch " +
                        std::to_string(epoch) + " step " + std::to_string(step) +
                        " problem " + id);
  return x;
}

}  // namespace

Var combine_losses(ad::Tape&, const ProblemLosses& pl,
                   const TrainingConfig& cfg, LossComponents* out_values) {
  Var total = pl.ent1;
  if (cfg.aux.snp) {
    total = ad::add(total, ad::scale(ad::add(pl.nqp, pl.nlp), cfg.lambda3));
  }
  if (cfg.aux.ccp) total = ad::add(total, ad::scale(pl.ccp, cfg.lambda4));
  if (cfg.aux.pcc) total = ad::add(total, ad::scale(pl.pcc, cfg.lambda2));
  if (cfg.aux.de && pl.dual.valid()) {
    total = ad::add(total, ad::scale(pl.dual, cfg.lambda1));
    // POS generation branch, optimized jointly
    Var pos = ad::add(pl.ent2, ad::add(ad::scale(pl.dual, cfg.lambda5),
                                       ad::scale(pl.pcc2, cfg.lambda6)));
    total = ad::add(total, pos);
  }
  if (out_values) {
    LossComponents c;
    c.ent1 = pl.ent1.value()(0, 0);
    if (cfg.aux.snp) {
      c.nqp = pl.nqp.value()(0, 0);
      c.nlp = pl.nlp.value()(0, 0);
    }
    if (cfg.aux.ccp) c.ccp = pl.ccp.value()(0, 0);
    if (cfg.aux.pcc) c.pcc = pl.pcc.value()(0, 0);
    if (cfg.aux.de && pl.dual.valid()) {
      c.dual = pl.dual.value()(0, 0);
      c.ent2 = pl.ent2.value()(0, 0);
      c.pcc2 = pl.pcc2.value()(0, 0);
    }
    *out_values = c;
  }
  return total;
}

std::vector<ProblemContext> make_contexts(
    const NsModel& model, const std::vector<ProblemInstance>& records) {
  std::vector<ProblemContext> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(model.make_context(r));
  return out;
}

void pretrain_language_models(NsModel& model,
                              std::vector<ProblemContext>& contexts,
                              const TrainingConfig& cfg) {
  ad::AdamState state(model.store);
  std::vector<int> order(contexts.size());
  std::iota(order.begin(), order.end(), 0);
  int threads = cfg.resolved_threads();
  std::vector<ad::GradBuffer> partial;
  for (int t = 0; t < threads; ++t) partial.emplace_back(model.store);
  ad::GradBuffer grads(model.store);
  for (int epoch = 0; epoch < cfg.lm_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x1a000000ull + epoch));
    shuffle_rng.shuffle(order);
    for (std::size_t at = 0; at < order.size(); at += cfg.batch) {
      std::size_t end = std::min(order.size(), at + cfg.batch);
      int bsize = static_cast<int>(end - at);
      int per = (bsize + threads - 1) / threads;
      int n_chunks = (bsize + per - 1) / per;
      auto worker = [&](int ci) {
        partial[ci].set_zero();
        int lo = ci * per, hi = std::min(bsize, (ci + 1) * per);
        for (int i = lo; i < hi; ++i) {
          const ProblemContext& ctx = contexts[order[at + i]];
          ad::Tape tape(
              mix_seed(cfg.seed, 0x1b000000ull + epoch * 131071 + at + i));
          Var loss = lm_nll(tape, model.eq_lm, ctx.eq_seq_ids);
          if (!ctx.pos_seq_ids.empty())
            loss = ad::add(loss, lm_nll(tape, model.pos_lm, ctx.pos_seq_ids));
          tape.backward(loss, partial[ci]);
        }
      };
      std::vector<std::thread> pool;
      for (int ci = 1; ci < n_chunks; ++ci) pool.emplace_back(worker, ci);
      worker(0);
      for (auto& t : pool) t.join();
      grads.set_zero();
      for (int ci = 0; ci < n_chunks; ++ci) grads.accumulate(partial[ci]);
      ad::adam_step(model.store, grads, state,
                    ad::lr_at_epoch(cfg.lr, epoch, cfg.halve_every),
                    cfg.weight_decay, {kGroupLm});
    }
  }
  // frozen from here on: cache the marginal log-probabilities
  for (auto& ctx : contexts) {
    ctx.lm_eq_logp = -lm_nll_value(model.eq_lm, ctx.eq_seq_ids);
    ctx.lm_pos_logp =
        ctx.pos_seq_ids.empty() ? 0.0 : -lm_nll_value(model.pos_lm, ctx.pos_seq_ids);
  }
}

namespace {

// contiguous slices of [0, n) for the worker threads
std::vector<std::pair<int, int>> chunk_ranges(int n, int threads) {
  std::vector<std::pair<int, int>> out;
  int per = (n + threads - 1) / threads;
  for (int at = 0; at < n; at += per)
    out.emplace_back(at, std::min(n, at + per));
  return out;
}

struct ChunkResult {
  LossComponents components;
  double combined = 0.0;
  std::string error;
};

}  // namespace

double answer_accuracy(NsModel& model,
                       const std::vector<ProblemContext>& contexts,
                       const AuxToggles& toggles, int threads,
                       std::uint64_t seed_tag) {
  if (contexts.empty()) return 0.0;
  int n = static_cast<int>(contexts.size());
  auto ranges = chunk_ranges(n, threads);
  std::vector<int> correct(ranges.size(), 0);
  SolveConfig solve_cfg;
  auto worker = [&](std::size_t ci) {
    auto [lo, hi] = ranges[ci];
    // evaluate in sub-batches so the encoder runs as matrix-matrix work
    for (int at = lo; at < hi; at += 16) {
      int end = std::min(hi, at + 16);
      ad::Tape tape(mix_seed(seed_tag, at), /*grad_enabled=*/false);
      std::vector<std::vector<int>> ids;
      for (int i = at; i < end; ++i) ids.push_back(contexts[i].token_ids);
      auto encs = encode_batch(tape, model.encoder, ids, Vocabulary::kPad, 0.0,
                               false);
      for (int i = at; i < end; ++i) {
        auto outcome = model.evaluate_problem(tape, contexts[i], encs[i - at],
                                              toggles, solve_cfg);
        if (outcome.correct) ++correct[ci];
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t ci = 1; ci < ranges.size(); ++ci)
    pool.emplace_back(worker, ci);
  worker(0);
  for (auto& t : pool) t.join();
  int total_correct = std::accumulate(correct.begin(), correct.end(), 0);
  return static_cast<double>(total_correct) / n;
}

TrainResult train(NsModel& model, const std::vector<ProblemInstance>& train_set,
                  const std::vector<ProblemInstance>& valid_set,
                  const TrainingConfig& cfg, std::ostream* metrics_out) {
  if (train_set.empty()) throw TrainingError("train: empty training set");
  const bool timing = std::getenv("NSSOLVER_TIMING") != nullptr;
  auto stamp = [] { return std::chrono::steady_clock::now(); };
  auto secs = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  auto t_lm = stamp();
  auto train_ctx = make_contexts(model, train_set);
  auto valid_ctx = make_contexts(model, valid_set);

  if (cfg.aux.de) pretrain_language_models(model, train_ctx, cfg);
  if (timing)
    std::fprintf(stderr, "# lm pretrain %.1f s\n", secs(t_lm));

  ad::AdamState state(model.store);
  std::vector<int> active = cfg.active_groups();
  int threads = cfg.resolved_threads();

  TrainResult result;
  std::vector<Mat> best_params;
  std::vector<int> order(train_ctx.size());
  std::iota(order.begin(), order.end(), 0);

  // gradient buffers are ~the parameter size, so allocate them once
  std::vector<ad::GradBuffer> chunk_grads;
  for (int t = 0; t < threads; ++t) chunk_grads.emplace_back(model.store);
  ad::GradBuffer grads(model.store);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t_epoch = stamp();
    double step_secs = 0.0, opt_secs = 0.0;
    double lr = ad::lr_at_epoch(cfg.lr, epoch, cfg.halve_every);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x2a000000ull + epoch));
    shuffle_rng.shuffle(order);

    LossComponents epoch_sum;
    double epoch_combined = 0.0;
    int steps = static_cast<int>((order.size() + cfg.batch - 1) / cfg.batch);

    for (int step = 0; step < steps; ++step) {
      std::size_t at = static_cast<std::size_t>(step) * cfg.batch;
      std::size_t end = std::min(order.size(), at + cfg.batch);
      int bsize = static_cast<int>(end - at);
      auto ranges = chunk_ranges(bsize, threads);

      std::vector<ChunkResult> chunks(ranges.size());

      auto worker = [&](std::size_t ci) {
        auto [lo, hi] = ranges[ci];
        try {
          chunk_grads[ci].set_zero();
          ad::Tape tape(
              mix_seed(cfg.seed, 0x3a000000ull + (static_cast<std::uint64_t>(epoch)
                                                  << 24) +
                                     (static_cast<std::uint64_t>(step) << 8) + ci));
          std::vector<std::vector<int>> ids;
          for (int i = lo; i < hi; ++i)
            ids.push_back(train_ctx[order[at + i]].token_ids);
          auto encs = encode_batch(tape, model.encoder, ids, Vocabulary::kPad,
                                   cfg.dropout, true);
          Var chunk_total = tape.scalar(0.0);
          for (int i = lo; i < hi; ++i) {
            const ProblemContext& ctx = train_ctx[order[at + i]];
            ProblemLosses pl = model.forward_losses(tape, ctx, encs[i - lo],
                                                    cfg.aux, cfg.dropout);
            LossComponents values;
            Var combined = combine_losses(tape, pl, cfg, &values);
            checked_value(combined, "loss", epoch, step, ctx.problem->id);
            chunks[ci].components += values;
            chunks[ci].combined += combined.value()(0, 0);
            chunk_total = ad::add(chunk_total, combined);
          }
          tape.backward(chunk_total, chunk_grads[ci]);
        } catch (const std::exception& e) {
          chunks[ci].error = e.what();
        }
      };
      auto t_step = stamp();
      std::vector<std::thread> pool;
      for (std::size_t ci = 1; ci < ranges.size(); ++ci)
        pool.emplace_back(worker, ci);
      worker(0);
      for (auto& t : pool) t.join();
      step_secs += secs(t_step);

      auto t_opt = stamp();
      grads.set_zero();
      for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
        if (!chunks[ci].error.empty()) throw TrainingError(chunks[ci].error);
        grads.accumulate(chunk_grads[ci]);
        epoch_sum += chunks[ci].components;
        epoch_combined += chunks[ci].combined;
      }
      ad::adam_step(model.store, grads, state, lr, cfg.weight_decay, active);
      opt_secs += secs(t_opt);
    }

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.mean = epoch_sum.scaled(1.0 / static_cast<double>(order.size()));
    log.total = epoch_combined / static_cast<double>(order.size());

    bool eval_now =
        cfg.eval_every <= 1 || epoch % cfg.eval_every == 0 || epoch == cfg.epochs - 1;
    if (eval_now) {
      log.train_acc = answer_accuracy(model, train_ctx, cfg.aux, threads,
                                      mix_seed(cfg.seed, 0x4a000000ull + epoch));
      log.valid_acc =
          valid_ctx.empty()
              ? 0.0
              : answer_accuracy(model, valid_ctx, cfg.aux, threads,
                                mix_seed(cfg.seed, 0x4b000000ull + epoch));
      if (log.valid_acc > result.best_valid_acc) {
        result.best_valid_acc = log.valid_acc;
        result.best_epoch = epoch;
        best_params.clear();
        for (int i = 0; i < model.store.size(); ++i)
          best_params.push_back(model.store.at(i).value);
      }
      result.final_train_acc = log.train_acc;
      result.final_valid_acc = log.valid_acc;
    } else if (!result.log.empty()) {
      log.train_acc = result.log.back().train_acc;
      log.valid_acc = result.log.back().valid_acc;
    }

    if (timing)
      std::fprintf(stderr, "# epoch %d total %.2f s (steps %.2f, optimizer %.2f)\n",
                   epoch, secs(t_epoch), step_secs, opt_secs);
    if (metrics_out) {
      nlohmann::ordered_json j;
      j["epoch"] = log.epoch;
      j["lr"] = log.lr;
      j["loss"] = log.total;
      j["ent1"] = log.mean.ent1;
      j["dual"] = log.mean.dual;
      j["pcc"] = log.mean.pcc;
      j["nqp"] = log.mean.nqp;
      j["nlp"] = log.mean.nlp;
      j["ccp"] = log.mean.ccp;
      j["ent2"] = log.mean.ent2;
      j["pcc2"] = log.mean.pcc2;
      j["train_acc"] = log.train_acc;
      j["valid_acc"] = log.valid_acc;
      (*metrics_out) << j.dump() << "\n";
    }
    result.log.push_back(log);
  }

  // keep the best-validation parameters
  if (!best_params.empty())
    for (int i = 0; i < model.store.size(); ++i)
      model.store.at(i).value = best_params[i];
  return result;
}

}  // namespace nss
