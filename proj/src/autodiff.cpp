#include "nssolver/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace nss::ad {

namespace {

std::string shape_str(const Mat& m) {
  return "[" + std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + "]";
}

void require_same_shape(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
}

void require_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape)
    throw AutodiffError(std::string(op) + ": operands from different tapes");
}

bool vector_shaped(const Mat& m) { return m.rows() == 1 || m.cols() == 1; }

}  // namespace

const Mat& Var::value() const { return tape->value_of(id); }

Parameter& ParameterStore::add(const std::string& name, int rows, int cols,
                               int group) {
  if (by_name_.count(name))
    throw AutodiffError("ParameterStore: duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Zero(rows, cols);
  p->index = static_cast<int>(params_.size());
  p->group = group;
  by_name_[name] = p->index;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : params_[it->second].get();
}

std::int64_t ParameterStore::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void init_xavier_uniform(Parameter& p, Rng& rng) {
  double limit = std::sqrt(6.0 / (p.value.rows() + p.value.cols()));
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      p.value(i, j) = rng.uniform(-limit, limit);
}

void init_zero(Parameter& p) { p.value.setZero(); }

GradBuffer::GradBuffer(const ParameterStore& store) {
  grads_.reserve(store.size());
  for (int i = 0; i < store.size(); ++i)
    grads_.emplace_back(
        Mat::Zero(store.at(i).value.rows(), store.at(i).value.cols()));
}

void GradBuffer::set_zero() {
  for (auto& g : grads_) g.setZero();
}

void GradBuffer::accumulate(const GradBuffer& other) {
  if (other.size() != size())
    throw AutodiffError("GradBuffer::accumulate: size mismatch");
  for (int i = 0; i < size(); ++i) grads_[i] += other.grads_[i];
}

Mat& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

int Tape::push(Mat value, bool requires_grad,
               std::function<void(Tape&, const Mat&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_back(int id, std::function<void(Tape&, const Mat&)> back) {
  if (nodes_[id].requires_grad) nodes_[id].back = std::move(back);
}

Var Tape::param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  int id = push(p.value, true, nullptr);
  nodes_[id].param_index = p.index;
  param_nodes_[&p] = id;
  return Var{this, id};
}

Var Tape::constant(Mat v) {
  return Var{this, push(std::move(v), false, nullptr)};
}

Var Tape::scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

void Tape::backward(Var loss, GradBuffer& out) {
  if (loss.tape != this) throw AutodiffError("backward: loss from another tape");
  if (consumed_) throw AutodiffError("backward: tape already consumed");
  const Mat& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw AutodiffError("backward: loss must be scalar, got " + shape_str(lv));
  if (!grad_enabled_)
    throw AutodiffError("backward: tape was created with gradients disabled");
  grad_of(loss.id)(0, 0) = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    flush_outer(id);
    Node& n = nodes_[id];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.back) n.back(*this, n.grad);
    if (n.param_index >= 0) out.at(n.param_index) += n.grad;
  }
  consumed_ = true;
  clear();
}

void Tape::defer_outer(int target, const Mat& g, const Mat& x) {
  pending_outer_[target].push_back(PendingOuter{&g, &x});
}

void Tape::flush_outer(int id) {
  auto it = pending_outer_.find(id);
  if (it == pending_outer_.end()) return;
  const auto& list = it->second;
  Mat& gw = grad_of(id);
  Eigen::Index width = 0;
  for (const auto& p : list) width += p.g->cols();
  if (width == 1) {
    gw.noalias() += *list[0].g * list[0].x->transpose();
  } else {
    Mat g_all(gw.rows(), width), x_all(gw.cols(), width);
    Eigen::Index at = 0;
    for (const auto& p : list) {
      g_all.middleCols(at, p.g->cols()) = *p.g;
      x_all.middleCols(at, p.x->cols()) = *p.x;
      at += p.g->cols();
    }
    gw.noalias() += g_all * x_all.transpose();
  }
  pending_outer_.erase(it);
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
  pending_outer_.clear();
}

// ---- ops ----

namespace {

bool rg(Var a) { return a.tape->node_requires_grad(a.id); }

Var make(Var a, Mat value, std::function<void(Tape&, const Mat&)> back) {
  return Var{a.tape, a.tape->push(std::move(value), rg(a), std::move(back))};
}

Var make2(Var a, Var b, Mat value,
          std::function<void(Tape&, const Mat&)> back) {
  return Var{a.tape,
             a.tape->push(std::move(value), rg(a) || rg(b), std::move(back))};
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  if (a.value().cols() != b.value().rows())
    throw DimensionError("matmul: inner dimensions disagree " +
                         shape_str(a.value()) + " vs " + shape_str(b.value()));
  Mat out = a.value() * b.value();
  int aid = a.id, bid = b.id;
  return make2(a, b, std::move(out), [aid, bid](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.defer_outer(aid, g, t.value_of(bid));
    if (t.node_requires_grad(bid))
      t.grad_of(bid).noalias() += t.value_of(aid).transpose() * g;
  });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  require_same_shape("add", a.value(), b.value());
  int aid = a.id, bid = b.id;
  return make2(a, b, a.value() + b.value(), [aid, bid](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid) += g;
    if (t.node_requires_grad(bid)) t.grad_of(bid) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  require_same_shape("sub", a.value(), b.value());
  int aid = a.id, bid = b.id;
  return make2(a, b, a.value() - b.value(), [aid, bid](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid) += g;
    if (t.node_requires_grad(bid)) t.grad_of(bid) -= g;
  });
}

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  require_same_shape("mul", a.value(), b.value());
  int aid = a.id, bid = b.id;
  return make2(a, b, a.value().cwiseProduct(b.value()),
               [aid, bid](Tape& t, const Mat& g) {
                 if (t.node_requires_grad(aid))
                   t.grad_of(aid) += g.cwiseProduct(t.value_of(bid));
                 if (t.node_requires_grad(bid))
                   t.grad_of(bid) += g.cwiseProduct(t.value_of(aid));
               });
}

Var scale(Var a, double s) {
  int aid = a.id;
  return make(a, a.value() * s, [aid, s](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid) += g * s;
  });
}

Var square(Var a) {
  int aid = a.id;
  return make(a, a.value().cwiseProduct(a.value()),
              [aid](Tape& t, const Mat& g) {
                if (t.node_requires_grad(aid))
                  t.grad_of(aid) += 2.0 * g.cwiseProduct(t.value_of(aid));
              });
}

Var transpose(Var a) {
  int aid = a.id;
  return make(a, a.value().transpose(), [aid](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid) += g.transpose();
  });
}

Var add_colvec(Var m, Var v) {
  require_same_tape("add_colvec", m, v);
  if (v.value().cols() != 1 || v.value().rows() != m.value().rows())
    throw DimensionError("add_colvec: vector " + shape_str(v.value()) +
                         " does not broadcast over " + shape_str(m.value()));
  Mat out = m.value().colwise() + Eigen::VectorXd(v.value().col(0));
  int mid = m.id, vid = v.id;
  return make2(m, v, std::move(out), [mid, vid](Tape& t, const Mat& g) {
    if (t.node_requires_grad(mid)) t.grad_of(mid) += g;
    if (t.node_requires_grad(vid)) t.grad_of(vid) += g.rowwise().sum();
  });
}

Var vconcat(Var a, Var b) {
  require_same_tape("vconcat", a, b);
  if (a.value().cols() != b.value().cols())
    throw DimensionError("vconcat: column mismatch " + shape_str(a.value()) +
                         " vs " + shape_str(b.value()));
  Mat out(a.value().rows() + b.value().rows(), a.value().cols());
  int ar = static_cast<int>(a.value().rows());
  int br = static_cast<int>(b.value().rows());
  out.topRows(ar) = a.value();
  out.bottomRows(br) = b.value();
  int aid = a.id, bid = b.id;
  return make2(a, b, std::move(out), [aid, bid, ar, br](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid) += g.topRows(ar);
    if (t.node_requires_grad(bid)) t.grad_of(bid) += g.bottomRows(br);
  });
}

Var concat_cols(const std::vector<Var>& cols) {
  if (cols.empty()) throw AutodiffError("concat_cols: empty input");
  Tape* tape = cols[0].tape;
  int rows = cols[0].rows();
  int total = 0;
  bool needs = false;
  for (Var c : cols) {
    if (c.tape != tape) throw AutodiffError("concat_cols: mixed tapes");
    if (c.rows() != rows)
      throw DimensionError("concat_cols: row mismatch " +
                           shape_str(cols[0].value()) + " vs " +
                           shape_str(c.value()));
    total += c.cols();
    needs = needs || rg(c);
  }
  Mat out(rows, total);
  std::vector<int> ids(cols.size()), offsets(cols.size()), widths(cols.size());
  int at = 0;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    ids[i] = cols[i].id;
    offsets[i] = at;
    widths[i] = cols[i].cols();
    out.middleCols(at, widths[i]) = cols[i].value();
    at += widths[i];
  }
  int id = tape->push(std::move(out), needs,
                      [ids, offsets, widths](Tape& t, const Mat& g) {
                        for (std::size_t i = 0; i < ids.size(); ++i)
                          if (t.node_requires_grad(ids[i]))
                            t.grad_of(ids[i]) +=
                                g.middleCols(offsets[i], widths[i]);
                      });
  return Var{tape, id};
}

Var block(Var a, int r0, int c0, int rows, int cols) {
  if (r0 < 0 || c0 < 0 || r0 + rows > a.rows() || c0 + cols > a.cols())
    throw DimensionError("block: slice [" + std::to_string(rows) + " x " +
                         std::to_string(cols) + "] at (" + std::to_string(r0) +
                         ", " + std::to_string(c0) + ") outside " +
                         shape_str(a.value()));
  int aid = a.id;
  return make(a, a.value().block(r0, c0, rows, cols),
              [aid, r0, c0, rows, cols](Tape& t, const Mat& g) {
                if (t.node_requires_grad(aid))
                  t.grad_of(aid).block(r0, c0, rows, cols) += g;
              });
}

Var sigmoid(Var a) {
  Mat y = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  int aid = a.id;
  Var out = make(a, std::move(y), nullptr);
  int oid = out.id;
  out.tape->set_back(oid, [aid, oid](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    const Mat& y = t.value_of(oid);
    t.grad_of(aid).array() += g.array() * y.array() * (1.0 - y.array());
  });
  return out;
}

Var tanh(Var a) {
  Mat y = a.value().array().tanh().matrix();
  int aid = a.id;
  Var out = make(a, std::move(y), nullptr);
  int oid = out.id;
  out.tape->set_back(oid, [aid, oid](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    const Mat& y = t.value_of(oid);
    t.grad_of(aid).array() += g.array() * (1.0 - y.array().square());
  });
  return out;
}

Var relu(Var a) {
  int aid = a.id;
  return make(a, a.value().cwiseMax(0.0), [aid](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    t.grad_of(aid) +=
        (t.value_of(aid).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
  });
}

Var softmax(Var a) {
  if (!vector_shaped(a.value()))
    throw DimensionError("softmax: expects a vector, got " +
                         shape_str(a.value()));
  Eigen::ArrayXXd x = a.value().array();
  Eigen::ArrayXXd e = (x - x.maxCoeff()).exp();
  Mat y = (e / e.sum()).matrix();
  int aid = a.id;
  Var out = make(a, std::move(y), nullptr);
  int oid = out.id;
  out.tape->set_back(oid, [aid, oid](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    const Mat& y = t.value_of(oid);
    double s = y.cwiseProduct(g).sum();
    t.grad_of(aid).array() += y.array() * (g.array() - s);
  });
  return out;
}

Var masked_softmax(Var a, const std::vector<std::uint8_t>& mask) {
  if (!vector_shaped(a.value()))
    throw DimensionError("masked_softmax: expects a vector, got " +
                         shape_str(a.value()));
  if (static_cast<Eigen::Index>(mask.size()) != a.value().size())
    throw DimensionError("masked_softmax: mask size " +
                         std::to_string(mask.size()) + " vs input " +
                         shape_str(a.value()));
  const Mat& x = a.value();
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (mask[i]) {
      mx = std::max(mx, x(i));
      any = true;
    }
  if (!any) throw AutodiffError("masked_softmax: empty legal set");
  Mat y = Mat::Zero(x.rows(), x.cols());
  double z = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (mask[i]) {
      y(i) = std::exp(x(i) - mx);
      z += y(i);
    }
  y /= z;
  int aid = a.id;
  Var out = make(a, std::move(y), nullptr);
  int oid = out.id;
  out.tape->set_back(oid, [aid, oid](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    const Mat& y = t.value_of(oid);
    double s = y.cwiseProduct(g).sum();
    t.grad_of(aid).array() += y.array() * (g.array() - s);
  });
  return out;
}

Var log_softmax(Var a) {
  if (!vector_shaped(a.value()))
    throw DimensionError("log_softmax: expects a vector, got " +
                         shape_str(a.value()));
  Eigen::ArrayXXd x = a.value().array();
  double m = x.maxCoeff();
  double lse = m + std::log((x - m).exp().sum());
  Mat y = (x - lse).matrix();
  int aid = a.id;
  Var out = make(a, std::move(y), nullptr);
  int oid = out.id;
  out.tape->set_back(oid, [aid, oid](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    const Mat& lp = t.value_of(oid);
    double s = g.sum();
    t.grad_of(aid).array() += g.array() - lp.array().exp() * s;
  });
  return out;
}

Var embedding_lookup(Var table, const std::vector<int>& ids) {
  const Mat& tv = table.value();
  Mat out(tv.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.cols())
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[i]) +
                           " outside table " + shape_str(tv));
    out.col(static_cast<Eigen::Index>(i)) = tv.col(ids[i]);
  }
  int tid = table.id;
  return make(table, std::move(out), [tid, ids](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(tid)) return;
    Mat& tg = t.grad_of(tid);
    for (std::size_t i = 0; i < ids.size(); ++i)
      tg.col(ids[i]) += g.col(static_cast<Eigen::Index>(i));
  });
}

Var mean_all(Var a) {
  double k = static_cast<double>(a.value().size());
  Mat out(1, 1);
  out(0, 0) = a.value().sum() / k;
  int aid = a.id;
  return make(a, std::move(out), [aid, k](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid).array() += g(0, 0) / k;
  });
}

Var sum_all(Var a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  int aid = a.id;
  return make(a, std::move(out), [aid](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid)) t.grad_of(aid).array() += g(0, 0);
  });
}

Var dropout(Var a, double p, bool train) {
  if (p < 0.0 || p >= 1.0)
    throw AutodiffError("dropout: rate must lie in [0, 1)");
  if (!train || p == 0.0) return a;  // identity in eval mode
  double keep = 1.0 - p;
  Mat mask(a.value().rows(), a.value().cols());
  Rng& rng = a.tape->rng();
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      mask(i, j) = rng.uniform() < p ? 0.0 : 1.0 / keep;
  auto shared = std::make_shared<Mat>(std::move(mask));
  Mat out = a.value().cwiseProduct(*shared);
  int aid = a.id;
  return make(a, std::move(out), [aid, shared](Tape& t, const Mat& g) {
    if (t.node_requires_grad(aid))
      t.grad_of(aid) += g.cwiseProduct(*shared);
  });
}

Var log_clamped(Var a, double lo, double hi) {
  Mat out = a.value().array().max(lo).min(hi).log().matrix();
  int aid = a.id;
  return make(a, std::move(out), [aid, lo, hi](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(aid)) return;
    const Mat& x = t.value_of(aid);
    Mat& gx = t.grad_of(aid);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x(i) > lo && x(i) < hi) gx(i) += g(i) / x(i);
  });
}

Var binary_cross_entropy(Var probs, const Mat& targets) {
  require_same_shape("binary_cross_entropy", probs.value(), targets);
  constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
  const Mat& p = probs.value();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double pc = std::min(hi, std::max(lo, p(i)));
    loss -= targets(i) * std::log(pc) + (1.0 - targets(i)) * std::log(1.0 - pc);
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  int pid = probs.id;
  auto tgt = std::make_shared<Mat>(targets);
  return make(probs, std::move(out), [pid, tgt](Tape& t, const Mat& g) {
    if (!t.node_requires_grad(pid)) return;
    constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
    const Mat& p = t.value_of(pid);
    Mat& gp = t.grad_of(pid);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      double pc = p(i);
      if (pc <= lo || pc >= hi) continue;  // clamped region has zero slope
      gp(i) += g(0, 0) * (pc - (*tgt)(i)) / (pc * (1.0 - pc));
    }
  });
}

Var categorical_cross_entropy(Var log_probs, int target) {
  const Mat& lp = log_probs.value();
  if (!vector_shaped(lp))
    throw DimensionError("categorical_cross_entropy: expects a vector, got " +
                         shape_str(lp));
  if (target < 0 || target >= lp.size())
    throw DimensionError("categorical_cross_entropy: target " +
                         std::to_string(target) + " outside " + shape_str(lp));
  Mat out(1, 1);
  out(0, 0) = -lp(target);
  int id = log_probs.id;
  return make(log_probs, std::move(out), [id, target](Tape& t, const Mat& g) {
    if (t.node_requires_grad(id)) t.grad_of(id)(target) -= g(0, 0);
  });
}

}  // namespace nss::ad
