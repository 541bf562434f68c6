#pragma once

#include "nssolver/executor.hpp"
#include "nssolver/problem.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nss {

// token ids for the problem encoder; 0 = PAD, 1 = UNK, then reserved
// template slots, then corpus words above the frequency threshold
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  static Vocabulary build(const std::vector<ProblemInstance>& train,
                          int unk_min_count, int max_templates);

  int id_of(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_[id]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary from_tokens(std::vector<std::string> tokens);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

enum class CorpusFormat { Canonical, Math23k };

struct LoadReport {
  int total = 0;
  int accepted = 0;
  std::vector<std::pair<std::string, std::string>> rejected;  // id, reason
};

// Parses, number-maps, builds gold trees, and keeps only records whose gold
// program actually grades true against the labeled answer. Rejections are
// collected, never silently dropped.
std::vector<ProblemInstance> load_corpus(const std::string& path,
                                         CorpusFormat format,
                                         LoadReport* report = nullptr,
                                         const SolveConfig& solve_cfg = {});
std::vector<ProblemInstance> load_corpus_lines(
    const std::vector<std::string>& lines, CorpusFormat format,
    LoadReport* report = nullptr, const SolveConfig& solve_cfg = {});

// seed-deterministic disjoint partitions
std::array<std::vector<ProblemInstance>, 3> split_corpus(
    const std::vector<ProblemInstance>& records, double train_ratio,
    double valid_ratio, double test_ratio, std::uint64_t seed);

std::vector<std::vector<ProblemInstance>> kfold(
    const std::vector<ProblemInstance>& records, int k, std::uint64_t seed);

struct DatasetStats {
  double avg_problem_length = 0.0;    // PL
  double avg_equation_length = 0.0;   // EL
  double avg_tree_size = 0.0;         // TS
  double avg_num_count = 0.0;         // Num
  double avg_sni_count = 0.0;         // SNI
  double avg_ops_count = 0.0;         // Ops
  double avg_constants_count = 0.0;   // Constants
};

DatasetStats compute_stats(const std::vector<ProblemInstance>& records);
std::string stats_to_json(const DatasetStats& stats);

// distinct gold-equation constants over the records, ordered by value
std::vector<Symbol> extract_constant_vocab(
    const std::vector<ProblemInstance>& records);

// Templated English problems over a small tagged lexicon, n_per_type of each
// of the four problem types. Answers come from each template's closed form,
// not from the executor. Byte-identical output for a fixed seed.
std::vector<std::string> generate_synthetic_lines(int n_per_type,
                                                  std::uint64_t seed);
void generate_synthetic(int n_per_type, std::uint64_t seed,
                        const std::string& out_path);

}  // namespace nss
