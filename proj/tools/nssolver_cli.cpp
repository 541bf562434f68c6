#include "nssolver/checkpoint.hpp"
#include "nssolver/data.hpp"
#include "nssolver/eval.hpp"
#include "nssolver/gradcheck.hpp"
#include "nssolver/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace nss;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

CorpusFormat parse_format(const std::string& name) {
  if (name == "canonical") return CorpusFormat::Canonical;
  if (name == "math23k") return CorpusFormat::Math23k;
  throw CLI::ValidationError("--format", "expected canonical or math23k");
}

AuxToggles apply_disable(AuxToggles t, const std::string& list) {
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "de") t.de = false;
    else if (item == "pcc") t.pcc = false;
    else if (item == "snp") t.snp = false;
    else if (item == "ccp") t.ccp = false;
    else throw std::runtime_error("unknown auxiliary task '" + item + "'");
  }
  return t;
}

std::vector<ProblemInstance> load_or_die(const std::string& path,
                                         const std::string& format) {
  LoadReport report;
  auto records = load_corpus(path, parse_format(format), &report);
  if (!report.rejected.empty()) {
    std::cerr << report.rejected.size() << " of " << report.total
              << " records rejected:\n";
    for (const auto& [id, reason] : report.rejected)
      std::cerr << "  " << id << ": " << reason << "\n";
  }
  return records;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

int cmd_stats(const std::string& corpus, const std::string& format,
              std::string json_path) {
  auto records = load_or_die(corpus, format);
  DatasetStats s = compute_stats(records);
  std::printf("records: %zu\n", records.size());
  std::printf("  %-10s %10.3f\n", "PL", s.avg_problem_length);
  std::printf("  %-10s %10.3f\n", "EL", s.avg_equation_length);
  std::printf("  %-10s %10.3f\n", "TS", s.avg_tree_size);
  std::printf("  %-10s %10.3f\n", "Num", s.avg_num_count);
  std::printf("  %-10s %10.3f\n", "SNI", s.avg_sni_count);
  std::printf("  %-10s %10.3f\n", "Ops", s.avg_ops_count);
  std::printf("  %-10s %10.3f\n", "Constants", s.avg_constants_count);
  if (json_path.empty()) json_path = corpus + ".stats.json";
  write_file(json_path, stats_to_json(s));
  return kOk;
}

int cmd_gen(int n, std::uint64_t seed, const std::string& out) {
  generate_synthetic(n, seed, out);
  std::printf("wrote %d problems (%d per type) to %s\n", 4 * n, n, out.c_str());
  return kOk;
}

int cmd_train(std::string config_path, std::string corpus,
              const std::string& format, const std::string& out,
              std::string log_path, int epochs_override, long long seed_override,
              const std::string& disable, int threads_override) {
  if (corpus.empty()) {  // single positional: it is the corpus
    corpus = config_path;
    config_path.clear();
  }
  if (corpus.empty()) throw std::runtime_error("train: corpus path required");
  if (config_path.empty()) {
    const char* env = std::getenv("NSSOLVER_CONFIG");
    if (env) config_path = env;
  }
  TrainingConfig cfg = config_path.empty()
                           ? TrainingConfig()
                           : TrainingConfig::from_json_file(config_path);
  if (epochs_override >= 0) cfg.epochs = epochs_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0) cfg.threads = threads_override;
  cfg.aux = apply_disable(cfg.aux, disable);

  auto records = load_or_die(corpus, format);
  if (records.empty()) {
    std::cerr << "no usable records in " << corpus << "\n";
    return kFailure;
  }
  if (!cfg.pos_lexicon.empty()) {
    PosLexicon lex = PosLexicon::load(cfg.pos_lexicon);
    for (auto& p : records)
      if (!p.pos_provided) p.pos_tags = lex.tag(p.templated_tokens);
  }
  auto parts = split_corpus(records, 0.8, 0.1, 0.1, cfg.seed);
  std::printf("split: %zu train / %zu valid / %zu test\n", parts[0].size(),
              parts[1].size(), parts[2].size());

  NsModel model = NsModel::from_training_split(parts[0], cfg.model_dims(),
                                               cfg.unk_min_count, cfg.seed);
  std::printf("model: %lld parameters, vocab %d, constants %zu\n",
              static_cast<long long>(model.store.scalar_count()),
              model.vocab.size(), model.constant_vocab.size());

  if (log_path.empty()) log_path = out + ".metrics.jsonl";
  std::ofstream metrics(log_path);
  if (!metrics) {
    std::cerr << "cannot write " << log_path << "\n";
    return kFailure;
  }
  TrainResult res = train(model, parts[0], parts[1], cfg, &metrics);
  for (const auto& log : res.log)
    std::printf(
        "epoch %3d lr %.2e loss %8.4f ent1 %7.4f train_acc %.3f valid_acc %.3f\n",
        log.epoch, log.lr, log.total, log.mean.ent1, log.train_acc,
        log.valid_acc);

  save_model(out, model, cfg);
  std::printf("best valid %.4f at epoch %d; checkpoint: %s\n",
              res.best_valid_acc, res.best_epoch, out.c_str());

  if (!parts[2].empty()) {
    EvalReport report =
        evaluate(model, parts[2], cfg.aux, cfg.resolved_threads(), cfg.seed);
    std::fputs(report.to_text().c_str(), stdout);
    write_file(out + ".eval.json", report.to_json());
  }
  return kOk;
}

int cmd_eval(const std::string& ckpt, const std::string& corpus,
             const std::string& format, const std::string& disable,
             std::string json_path, int threads, long long seed) {
  LoadedModel loaded = load_model(ckpt);
  auto records = load_or_die(corpus, format);
  if (records.empty()) {
    std::cerr << "no usable records in " << corpus << "\n";
    return kFailure;
  }
  AuxToggles toggles = apply_disable(loaded.config.aux, disable);
  int t = threads > 0 ? threads : loaded.config.resolved_threads();
  EvalReport report = evaluate(
      *loaded.model, records, toggles, t,
      seed >= 0 ? static_cast<std::uint64_t>(seed) : loaded.config.seed);
  std::fputs(report.to_text().c_str(), stdout);
  if (json_path.empty()) json_path = corpus + ".eval.json";
  write_file(json_path, report.to_json());
  return kOk;
}

int cmd_solve(const std::string& text, std::string json_path) {
  SymbolTable table({Symbol::unknown("x"), Symbol::unknown("y")}, {}, {});
  EquationTree tree = parse_infix(text, table);
  SolvedAnswer ans = solve(tree);
  nlohmann::ordered_json j;
  j["status"] = solve_status_name(ans.status);
  if (ans.status == SolveStatus::Solved) {
    if (ans.is_scalar) {
      std::printf("value = %s\n", fmt_g(ans.scalar_value).c_str());
      j["value"] = ans.scalar_value;
    } else {
      nlohmann::ordered_json b = nlohmann::ordered_json::object();
      for (const auto& [name, roots] : ans.bindings) {
        std::string line = name + " = ";
        for (std::size_t i = 0; i < roots.size(); ++i) {
          if (i) line += ", ";
          line += fmt_g(roots[i]);
        }
        std::printf("%s\n", line.c_str());
        b[name] = roots;
      }
      j["bindings"] = b;
    }
  } else {
    std::printf("no solution: %s\n", solve_status_name(ans.status).c_str());
  }
  std::printf("%s\n", j.dump().c_str());
  if (json_path.empty()) json_path = "solve_result.json";
  write_file(json_path, j.dump(2));
  return ans.status == SolveStatus::Solved ? kOk : kFailure;
}

int cmd_gradcheck(std::uint64_t seed, std::string json_path) {
  ad::GradCheckReport ops = ad::check_all_ops(seed);
  std::printf(
      "op-level finite differences: %d coordinates, max rel err %.3e (%s)\n",
      ops.checked, ops.max_rel_err, ops.worst.c_str());

  // composite loss over a 2-problem batch at reduced width
  auto corpus =
      load_corpus_lines(generate_synthetic_lines(1, seed), CorpusFormat::Canonical);
  std::vector<ProblemInstance> two(corpus.begin(), corpus.begin() + 2);
  TrainingConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 12;
  cfg.unk_min_count = 1;
  ModelDims dims = cfg.model_dims();
  dims.lm_embed_dim = 6;
  dims.lm_hidden_dim = 8;
  dims.tag_embed_dim = 6;
  NsModel model = NsModel::from_training_split(two, dims, 1, seed);
  auto contexts = make_contexts(model, two);
  auto loss_fn = [&](ad::GradBuffer* gb) {
    ad::Tape tape(seed);
    std::vector<std::vector<int>> ids;
    for (const auto& c : contexts) ids.push_back(c.token_ids);
    auto encs =
        encode_batch(tape, model.encoder, ids, Vocabulary::kPad, 0.3, true);
    ad::Var total = tape.scalar(0.0);
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      ProblemLosses pl =
          model.forward_losses(tape, contexts[i], encs[i], cfg.aux, 0.3);
      total = ad::add(total, combine_losses(tape, pl, cfg, nullptr));
    }
    double v = total.value()(0, 0);
    if (gb) tape.backward(total, *gb);
    return v;
  };
  Rng coords(mix_seed(seed, 5));
  auto comp = ad::finite_difference_check(model.store, loss_fn, coords, 64);
  std::printf(
      "composite loss finite differences: %d coordinates, max rel err %.3e (%s)\n",
      comp.checked, comp.max_rel_err, comp.worst.c_str());
  double worst = std::max(ops.max_rel_err, comp.max_rel_err);
  std::printf("max relative error: %.3e (%s)\n", worst,
              worst < 1e-4 ? "PASS" : "FAIL");
  nlohmann::ordered_json j;
  j["op_max_rel_err"] = ops.max_rel_err;
  j["composite_max_rel_err"] = comp.max_rel_err;
  j["max_rel_err"] = worst;
  j["pass"] = worst < 1e-4;
  if (json_path.empty()) json_path = "gradcheck.json";
  write_file(json_path, j.dump(2));
  return worst < 1e-4 ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural-symbolic math word problem solver"};
  app.require_subcommand(1);

  std::string corpus, format = "canonical", json_path, config_path;
  std::string out = "model.ckpt", log_path, disable, ckpt, solve_text;
  int gen_n = 0, epochs_override = -1, threads = 0;
  long long seed_override = -1;
  std::uint64_t gen_seed = 0, gc_seed = 20240901;
  std::string gen_out;

  auto* stats = app.add_subcommand("stats", "corpus statistics");
  stats->add_option("corpus", corpus)->required();
  stats->add_option("--format", format, "canonical or math23k");
  stats->add_option("--json", json_path, "JSON report path");

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("n_per_type", gen_n)->required()->check(CLI::PositiveNumber);
  gen->add_option("seed", gen_seed)->required();
  gen->add_option("out", gen_out)->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("config", config_path, "config JSON (or set NSSOLVER_CONFIG)");
  tr->add_option("corpus", corpus);
  tr->add_option("--format", format);
  tr->add_option("--out", out, "checkpoint path");
  tr->add_option("--log", log_path, "metrics JSONL path");
  tr->add_option("--epochs", epochs_override);
  tr->add_option("--seed", seed_override);
  tr->add_option("--threads", threads);
  tr->add_option("--disable", disable, "comma list of de,pcc,snp,ccp");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("checkpoint", ckpt)->required();
  ev->add_option("corpus", corpus)->required();
  ev->add_option("--format", format);
  ev->add_option("--disable", disable);
  ev->add_option("--json", json_path);
  ev->add_option("--threads", threads);
  ev->add_option("--seed", seed_override);

  auto* sv = app.add_subcommand("solve", "solve infix equations");
  sv->add_option("equations", solve_text)->required();
  sv->add_option("--json", json_path);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--json", json_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (stats->parsed()) return cmd_stats(corpus, format, json_path);
    if (gen->parsed()) return cmd_gen(gen_n, gen_seed, gen_out);
    if (tr->parsed())
      return cmd_train(config_path, corpus, format, out, log_path,
                       epochs_override, seed_override, disable, threads);
    if (ev->parsed())
      return cmd_eval(ckpt, corpus, format, disable, json_path, threads,
                      seed_override);
    if (sv->parsed()) return cmd_solve(solve_text, json_path);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, json_path);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kFailure;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
