#pragma once

#include "nssolver/model.hpp"

#include <map>
#include <string>

namespace nss {

// Answer accuracy overall, per problem type, and per gold tree size, plus
// the auxiliary heads' binary accuracies.
struct EvalReport {
  int total = 0;
  int correct = 0;
  double accuracy = 0.0;
  std::map<std::string, std::pair<int, int>> per_type;  // correct / total
  std::map<int, std::pair<int, int>> per_tree_size;
  double nqp_accuracy = 0.0;
  double nlp_accuracy = 0.0;
  double ccp_accuracy = 0.0;
  AuxToggles toggles;

  std::string to_json() const;
  std::string to_text() const;
};

EvalReport evaluate(NsModel& model, const std::vector<ProblemInstance>& records,
                    const AuxToggles& toggles, int threads = 1,
                    std::uint64_t seed = 0,
                    const SolveConfig& solve_cfg = SolveConfig());

}  // namespace nss
