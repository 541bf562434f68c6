#include "nssolver/aux_tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nss {

using ad::Var;

AuxHeadParams make_aux_heads(ad::ParameterStore& store, int hidden,
                             int max_count, int max_length, int n_constants,
                             int group_snp, int group_ccp) {
  AuxHeadParams p;
  p.max_count = max_count;
  p.max_length = max_length;
  p.n_constants = n_constants;
  p.nqp_w = &store.add("aux.nqp_w", max_count + 1, hidden, group_snp);
  p.nqp_b = &store.add("aux.nqp_b", max_count + 1, 1, group_snp);
  p.nlp_w = &store.add("aux.nlp_w", max_length, hidden, group_snp);
  p.nlp_b = &store.add("aux.nlp_b", max_length, 1, group_snp);
  p.ccp_w = &store.add("aux.ccp_w", std::max(1, n_constants), hidden, group_ccp);
  p.ccp_b = &store.add("aux.ccp_b", std::max(1, n_constants), 1, group_ccp);
  return p;
}

Var nqp_log_probs(ad::Tape& tape, const AuxHeadParams& p, Var pooled) {
  return ad::log_softmax(
      ad::add(ad::matmul(tape.param(*p.nqp_w), pooled), tape.param(*p.nqp_b)));
}

Var nlp_probs(ad::Tape& tape, const AuxHeadParams& p, Var pooled) {
  return ad::sigmoid(
      ad::add(ad::matmul(tape.param(*p.nlp_w), pooled), tape.param(*p.nlp_b)));
}

Var ccp_probs(ad::Tape& tape, const AuxHeadParams& p, Var pooled) {
  return ad::sigmoid(
      ad::add(ad::matmul(tape.param(*p.ccp_w), pooled), tape.param(*p.ccp_b)));
}

Var nqp_loss(ad::Tape& tape, const AuxHeadParams& p, Var pooled,
             int true_count) {
  if (true_count > p.max_count)
    throw AuxConfigError("nqp_loss: count " + std::to_string(true_count) +
                         " exceeds Q=" + std::to_string(p.max_count) +
                         "; Q must be recomputed");
  return ad::categorical_cross_entropy(nqp_log_probs(tape, p, pooled),
                                       true_count);
}

Mat multi_hot(int size, const std::vector<int>& indices) {
  Mat t = Mat::Zero(size, 1);
  for (int i : indices) t(i, 0) = 1.0;
  return t;
}

Var nlp_loss(ad::Tape& tape, const AuxHeadParams& p, Var pooled,
             const std::vector<int>& true_positions) {
  for (int pos : true_positions)
    if (pos >= p.max_length)
      throw AuxConfigError("nlp_loss: position " + std::to_string(pos) +
                           " exceeds L=" + std::to_string(p.max_length) +
                           "; L must be recomputed");
  return ad::binary_cross_entropy(nlp_probs(tape, p, pooled),
                                  multi_hot(p.max_length, true_positions));
}

Var ccp_loss(ad::Tape& tape, const AuxHeadParams& p, Var pooled,
             const std::vector<int>& true_constant_indices) {
  int c = std::max(1, p.n_constants);
  return ad::binary_cross_entropy(ccp_probs(tape, p, pooled),
                                  multi_hot(c, true_constant_indices));
}

std::vector<int> select_constants(const Vec& probs) {
  int c = static_cast<int>(probs.size());
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs(a) > probs(b); });
  std::vector<int> out;
  int extras = 0;
  for (int i : order) {
    if (probs(i) >= 0.5) {
      out.push_back(i);
    } else if (extras < 3) {
      out.push_back(i);
      ++extras;
    } else {
      break;
    }
  }
  return out;
}

namespace {

int argmax_lowest(const Mat& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

}  // namespace

Var semantic_loss(ad::Tape& tape, const std::vector<Var>& dists,
                  const std::vector<int>& gold_indices) {
  if (dists.size() != gold_indices.size())
    throw AuxConfigError("semantic_loss: " + std::to_string(dists.size()) +
                         " distributions vs " +
                         std::to_string(gold_indices.size()) + " gold symbols");
  Var total = tape.scalar(0.0);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    int greedy = argmax_lowest(dists[i].value());
    Var p = ad::block(dists[i], greedy, 0, 1, 1);
    Var term = greedy == gold_indices[i]
                   ? ad::log_clamped(p)
                   : ad::log_clamped(ad::sub(tape.scalar(1.0), p));
    total = ad::sub(total, term);
  }
  return total;
}

double semantic_loss_value(const std::vector<Vec>& dists,
                           const std::vector<int>& gold_indices) {
  if (dists.size() != gold_indices.size())
    throw AuxConfigError("semantic_loss: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    int greedy = argmax_lowest(dists[i]);
    double p = dists[i](greedy);
    double q = greedy == gold_indices[i] ? p : 1.0 - p;
    q = std::min(1.0 - 1e-12, std::max(1e-12, q));
    total -= std::log(q);
  }
  return total;
}

double dual_loss_value(double logp_pos_prior, double logp_T_given_P,
                       double logp_T_prior, double logp_pos_given_T) {
  double d = logp_pos_prior + logp_T_given_P - logp_T_prior - logp_pos_given_T;
  return d * d;
}

Var dual_loss(ad::Tape& tape, double logp_pos_prior, Var nll_T_given_P,
              double logp_T_prior, Var nll_pos_given_T) {
  double c = logp_pos_prior - logp_T_prior;
  Var d = ad::add(tape.scalar(c), ad::sub(nll_pos_given_T, nll_T_given_P));
  return ad::square(d);
}

// ---- POS tagging ----

namespace {

struct LexEntry {
  const char* token;
  const char* tag;
};

// lexicon of the synthetic corpus generator
constexpr LexEntry kBuiltinLexicon[] = {
    {"tom", "NOUN"},     {"sara", "NOUN"},      {"jane", "NOUN"},
    {"leo", "NOUN"},     {"mia", "NOUN"},       {"has", "VERB"},
    {"had", "VERB"},     {"have", "VERB"},      {"buys", "VERB"},
    {"gave", "VERB"},    {"keeps", "VERB"},     {"remain", "VERB"},
    {"are", "VERB"},     {"is", "VERB"},        {"shared", "VERB"},
    {"get", "VERB"},     {"fill", "VERB"},      {"fills", "VERB"},
    {"covers", "VERB"},  {"equals", "VERB"},    {"find", "VERB"},
    {"does", "VERB"},    {"holds", "VERB"},     {"sold", "VERB"},
    {"apples", "NOUN"},  {"pears", "NOUN"},     {"pens", "NOUN"},
    {"candies", "NOUN"}, {"kids", "NOUN"},      {"box", "NOUN"},
    {"boxes", "NOUN"},   {"bags", "NOUN"},      {"marbles", "NOUN"},
    {"books", "NOUN"},   {"rug", "NOUN"},       {"meters", "NOUN"},
    {"side", "NOUN"},    {"tiles", "NOUN"},     {"tile", "NOUN"},
    {"number", "NOUN"},  {"farm", "NOUN"},      {"chickens", "NOUN"},
    {"rabbits", "NOUN"}, {"heads", "NOUN"},     {"legs", "NOUN"},
    {"lot", "NOUN"},     {"bikes", "NOUN"},     {"cars", "NOUN"},
    {"vehicles", "NOUN"},{"wheels", "NOUN"},    {"pond", "NOUN"},
    {"radius", "NOUN"},  {"circumference", "NOUN"}, {"total", "NOUN"},
    {"a", "DET"},        {"the", "DET"},        {"each", "DET"},
    {"all", "DET"},      {"many", "ADJ"},       {"more", "ADJ"},
    {"square", "ADJ"},   {"circular", "ADJ"},   {"long", "ADJ"},
    {"equal", "ADJ"},    {"squared", "ADJ"},    {"away", "ADV"},
    {"now", "ADV"},      {"also", "ADV"},       {"how", "ADV"},
    {"he", "PRON"},      {"she", "PRON"},       {"its", "PRON"},
    {"what", "PRON"},    {"one", "PRON"},       {"in", "ADP"},
    {"by", "ADP"},       {"with", "ADP"},       {"of", "ADP"},
    {"and", "CONJ"},     {"plus", "CONJ"},      {".", "PUNCT"},
    {"?", "PUNCT"},      {"there", "ADV"},      {"kid", "NOUN"},
    {"dozen", "NOUN"},   {"that", "PRON"},      {"on", "ADP"},
    {"than", "ADP"},     {"cube", "NOUN"},      {"shaped", "ADJ"},
    {"unit", "NOUN"},    {"blocks", "NOUN"},    {"shop", "NOUN"},
    {"parks", "VERB"},   {"tricycles", "NOUN"}, {"seats", "NOUN"},
    {"cover", "VERB"},   {"extra", "ADJ"},      {"make", "VERB"},
};

}  // namespace

PosLexicon PosLexicon::builtin() {
  PosLexicon lex;
  for (const auto& e : kBuiltinLexicon) lex.insert(e.token, e.tag);
  return lex;
}

PosLexicon PosLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("PosLexicon::load: cannot open " + path);
  PosLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("PosLexicon::load: missing tab in line: " + line);
    lex.insert(line.substr(0, tab), line.substr(tab + 1));
  }
  return lex;
}

void PosLexicon::insert(const std::string& token, const std::string& tag) {
  map_[token] = tag;
}

std::vector<std::string> PosLexicon::tag(
    const std::vector<std::string>& tokens) const {
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (const auto& tok : tokens) {
    if (tok.size() > 2 && tok.compare(0, 2, "n_") == 0) {
      tags.push_back("NUM");
      continue;
    }
    auto it = map_.find(tok);
    tags.push_back(it == map_.end() ? "X" : it->second);
  }
  return tags;
}

std::vector<std::string> rule_pos_tagger(const std::vector<std::string>& tokens) {
  static const PosLexicon lex = PosLexicon::builtin();
  return lex.tag(tokens);
}

}  // namespace nss
