#include "nssolver/eval.hpp"

#include "nssolver/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

namespace nss {

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["total"] = total;
  j["correct"] = correct;
  j["accuracy"] = accuracy;
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (const auto& [name, counts] : per_type) {
    nlohmann::ordered_json t;
    t["correct"] = counts.first;
    t["total"] = counts.second;
    t["accuracy"] =
        counts.second ? static_cast<double>(counts.first) / counts.second : 0.0;
    types[name] = t;
  }
  j["per_type"] = types;
  nlohmann::ordered_json sizes = nlohmann::ordered_json::object();
  for (const auto& [size, counts] : per_tree_size) {
    nlohmann::ordered_json t;
    t["correct"] = counts.first;
    t["total"] = counts.second;
    t["accuracy"] =
        counts.second ? static_cast<double>(counts.first) / counts.second : 0.0;
    sizes[std::to_string(size)] = t;
  }
  j["per_tree_size"] = sizes;
  j["nqp_accuracy"] = nqp_accuracy;
  j["nlp_accuracy"] = nlp_accuracy;
  j["ccp_accuracy"] = ccp_accuracy;
  nlohmann::ordered_json tg;
  tg["de"] = toggles.de;
  tg["pcc"] = toggles.pcc;
  tg["snp"] = toggles.snp;
  tg["ccp"] = toggles.ccp;
  j["toggles"] = tg;
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "answer accuracy: %d/%d = %.4f\n", correct,
                total, accuracy);
  out << line;
  out << "per type:\n";
  for (const auto& [name, counts] : per_type) {
    std::snprintf(line, sizeof(line), "  %-8s %4d/%-4d = %.4f\n", name.c_str(),
                  counts.first, counts.second,
                  counts.second ? double(counts.first) / counts.second : 0.0);
    out << line;
  }
  out << "per tree size:\n";
  for (const auto& [size, counts] : per_tree_size) {
    std::snprintf(line, sizeof(line), "  %-8d %4d/%-4d = %.4f\n", size,
                  counts.first, counts.second,
                  counts.second ? double(counts.first) / counts.second : 0.0);
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "aux binary accuracy: nqp %.4f nlp %.4f ccp %.4f\n",
                nqp_accuracy, nlp_accuracy, ccp_accuracy);
  out << line;
  std::snprintf(line, sizeof(line), "toggles: de=%d pcc=%d snp=%d ccp=%d\n",
                toggles.de, toggles.pcc, toggles.snp, toggles.ccp);
  out << line;
  return out.str();
}

EvalReport evaluate(NsModel& model, const std::vector<ProblemInstance>& records,
                    const AuxToggles& toggles, int threads, std::uint64_t seed,
                    const SolveConfig& solve_cfg) {
  EvalReport report;
  report.toggles = toggles;
  report.total = static_cast<int>(records.size());
  if (records.empty()) return report;

  auto contexts = make_contexts(model, records);
  int n = report.total;
  std::vector<EvalOutcome> outcomes(n);

  threads = std::max(1, threads);
  int per = (n + threads - 1) / threads;
  auto worker = [&](int lo, int hi) {
    for (int at = lo; at < hi; at += 16) {
      int end = std::min(hi, at + 16);
      ad::Tape tape(mix_seed(seed, at), /*grad_enabled=*/false);
      std::vector<std::vector<int>> ids;
      for (int i = at; i < end; ++i) ids.push_back(contexts[i].token_ids);
      auto encs = encode_batch(tape, model.encoder, ids, Vocabulary::kPad, 0.0,
                               false);
      for (int i = at; i < end; ++i)
        outcomes[i] = model.evaluate_problem(tape, contexts[i], encs[i - at],
                                             toggles, solve_cfg);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t * per < n; ++t)
    pool.emplace_back(worker, t * per, std::min(n, (t + 1) * per));
  worker(0, std::min(n, per));
  for (auto& t : pool) t.join();

  long nqp_hits = 0;
  long nlp_hits = 0, nlp_total = 0;
  long ccp_hits = 0, ccp_total = 0;
  for (const auto& o : outcomes) {
    auto& type_bucket = report.per_type[o.type_name];
    auto& size_bucket = report.per_tree_size[o.gold_tree_size];
    type_bucket.second += 1;
    size_bucket.second += 1;
    if (o.correct) {
      ++report.correct;
      type_bucket.first += 1;
      size_bucket.first += 1;
    }
    nqp_hits += o.nqp_correct ? 1 : 0;
    nlp_hits += o.nlp_correct;
    nlp_total += o.nlp_total;
    ccp_hits += o.ccp_correct;
    ccp_total += o.ccp_total;
  }
  report.accuracy = static_cast<double>(report.correct) / report.total;
  report.nqp_accuracy = static_cast<double>(nqp_hits) / report.total;
  report.nlp_accuracy =
      nlp_total ? static_cast<double>(nlp_hits) / nlp_total : 0.0;
  report.ccp_accuracy =
      ccp_total ? static_cast<double>(ccp_hits) / ccp_total : 0.0;
  return report;
}

}  // namespace nss
