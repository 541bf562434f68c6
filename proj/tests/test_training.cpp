#include "nssolver/checkpoint.hpp"
#include "nssolver/data.hpp"
#include "nssolver/eval.hpp"
#include "nssolver/training.hpp"

#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace nss;

namespace {

TrainingConfig tiny_config() {
  TrainingConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 12;
  cfg.batch = 4;
  cfg.epochs = 2;
  cfg.lm_epochs = 2;
  cfg.unk_min_count = 1;
  cfg.threads = 2;
  cfg.seed = 99;
  cfg.dropout = 0.1;
  return cfg;
}

ModelDims tiny_dims(const TrainingConfig& cfg) {
  ModelDims d = cfg.model_dims();
  d.lm_embed_dim = 6;
  d.lm_hidden_dim = 8;
  d.tag_embed_dim = 6;
  return d;
}

std::vector<ProblemInstance> tiny_corpus(int n_per_type, std::uint64_t seed) {
  return load_corpus_lines(generate_synthetic_lines(n_per_type, seed),
                           CorpusFormat::Canonical);
}

}  // namespace

TEST_CASE("total loss applies the default task weights") {
  LossComponents c;
  c.ent1 = 2.0;
  c.dual = 4.0;
  c.pcc = 3.0;
  c.nqp = 1.0;
  c.nlp = 1.0;
  c.ccp = 5.0;
  TrainingConfig cfg;  // lambda4 defaults to 1.0
  CHECK(total_loss_value(c, cfg) ==
        doctest::Approx(2.0 + 0.002 + 0.03 + 2.0 + 5.0).epsilon(1e-12));
  cfg.lambda4 = 1e-6;
  CHECK(total_loss_value(c, cfg) ==
        doctest::Approx(2.0 + 0.002 + 0.03 + 2.0 + 5e-6).epsilon(1e-12));

  SUBCASE("all toggles off leaves exactly the supervised term") {
    cfg.aux = AuxToggles{false, false, false, false};
    CHECK(total_loss_value(c, cfg) == 2.0);
  }
  SUBCASE("perfect model costs zero") {
    CHECK(total_loss_value(LossComponents{}, cfg) == 0.0);
  }
}

TEST_CASE("pos branch loss applies its task weights") {
  LossComponents c;
  c.ent2 = 3.0;
  c.dual = 4.0;
  c.pcc2 = 2.0;
  TrainingConfig cfg;
  CHECK(pos_branch_loss_value(c, cfg) == doctest::Approx(3.22).epsilon(1e-12));
  cfg.aux.de = false;
  CHECK(pos_branch_loss_value(c, cfg) == 0.0);
}

TEST_CASE("config JSON round-trips and validates") {
  TrainingConfig cfg;
  cfg.lambda4 = 1e-6;
  cfg.epochs = 7;
  cfg.aux.pcc = false;
  TrainingConfig back = TrainingConfig::from_json_text(cfg.to_json());
  CHECK(back.lambda4 == 1e-6);
  CHECK(back.epochs == 7);
  CHECK(back.aux.pcc == false);
  CHECK(back.aux.de == true);
  CHECK_THROWS_AS(TrainingConfig::from_json_text(R"({"batch":0})"),
                  TrainingError);
  CHECK_THROWS_AS(TrainingConfig::from_json_text(R"({"lambda2":-1})"),
                  TrainingError);
}

TEST_CASE("a tiny training run logs finite components and evaluates") {
  auto corpus = tiny_corpus(4, 31);
  TrainingConfig cfg = tiny_config();
  NsModel model = NsModel::from_training_split(corpus, tiny_dims(cfg),
                                               cfg.unk_min_count, cfg.seed);
  std::ostringstream metrics;
  TrainResult res = train(model, corpus, corpus, cfg, &metrics);
  REQUIRE(res.log.size() == 2);
  for (const auto& log : res.log) {
    CHECK(std::isfinite(log.total));
    CHECK(log.mean.ent1 >= 0.0);
    CHECK(log.mean.nqp >= 0.0);
    CHECK(log.mean.pcc >= 0.0);
  }
  CHECK(res.best_epoch >= 0);
  CHECK(metrics.str().find("ent1") != std::string::npos);

  EvalReport report = evaluate(model, corpus, cfg.aux, 2, 5);
  CHECK(report.total == 16);
  int bucket_total = 0;
  for (const auto& [size, counts] : report.per_tree_size)
    bucket_total += counts.second;
  CHECK(bucket_total == report.total);
}

TEST_CASE("identical seeds give byte-identical metric logs") {
  auto corpus = tiny_corpus(3, 17);
  TrainingConfig cfg = tiny_config();
  std::ostringstream m1, m2;
  {
    NsModel model = NsModel::from_training_split(corpus, tiny_dims(cfg),
                                                 cfg.unk_min_count, cfg.seed);
    train(model, corpus, corpus, cfg, &m1);
  }
  {
    NsModel model = NsModel::from_training_split(corpus, tiny_dims(cfg),
                                                 cfg.unk_min_count, cfg.seed);
    train(model, corpus, corpus, cfg, &m2);
  }
  CHECK(m1.str() == m2.str());
}

TEST_CASE("disabled toggles contribute no loss and receive no gradient") {
  auto corpus = tiny_corpus(3, 23);
  TrainingConfig cfg = tiny_config();
  cfg.aux = AuxToggles{false, false, false, false};
  NsModel model = NsModel::from_training_split(corpus, tiny_dims(cfg),
                                               cfg.unk_min_count, cfg.seed);

  auto contexts = make_contexts(model, corpus);
  ad::GradBuffer grads(model.store);
  ad::Tape tape(1);
  auto encs = encode_batch(tape, model.encoder, {contexts[0].token_ids},
                           Vocabulary::kPad, cfg.dropout, true);
  ProblemLosses pl =
      model.forward_losses(tape, contexts[0], encs[0], cfg.aux, cfg.dropout);
  LossComponents values;
  ad::Var combined = combine_losses(tape, pl, cfg, &values);
  CHECK(combined.value()(0, 0) == values.ent1);  // exactly L_ent1
  CHECK(values.dual == 0.0);
  CHECK(values.nqp == 0.0);
  CHECK(values.ccp == 0.0);
  tape.backward(combined, grads);
  for (int i = 0; i < model.store.size(); ++i) {
    int g = model.store.at(i).group;
    if (g == kGroupSnp || g == kGroupCcp || g == kGroupDual || g == kGroupLm) {
      CHECK(grads.at(i).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("checkpoints round-trip parameters and models bit-exactly") {
  auto corpus = tiny_corpus(2, 41);
  TrainingConfig cfg = tiny_config();
  cfg.epochs = 1;
  NsModel model = NsModel::from_training_split(corpus, tiny_dims(cfg),
                                               cfg.unk_min_count, cfg.seed);
  train(model, corpus, corpus, cfg, nullptr);

  std::string path = "ckpt_test.bin";
  save_model(path, model, cfg);
  LoadedModel loaded = load_model(path);
  REQUIRE(loaded.model->store.size() == model.store.size());
  for (int i = 0; i < model.store.size(); ++i) {
    CHECK(loaded.model->store.at(i).name == model.store.at(i).name);
    CHECK((loaded.model->store.at(i).value - model.store.at(i).value).norm() ==
          0.0);
  }
  EvalReport a = evaluate(model, corpus, cfg.aux, 1, 3);
  EvalReport b = evaluate(*loaded.model, corpus, cfg.aux, 1, 3);
  CHECK(a.to_json() == b.to_json());
  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());
}

TEST_CASE("corrupt checkpoints are reported") {
  {
    std::ofstream out("bad_ckpt.bin", std::ios::binary);
    out << "not a checkpoint";
  }
  auto corpus = tiny_corpus(1, 43);
  TrainingConfig cfg = tiny_config();
  NsModel model = NsModel::from_training_split(corpus, tiny_dims(cfg),
                                               cfg.unk_min_count, cfg.seed);
  CHECK_THROWS_AS(load_parameters("bad_ckpt.bin", model.store),
                  CheckpointError);
  std::remove("bad_ckpt.bin");
}
