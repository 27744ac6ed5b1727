#include "tce/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tce/errors.hpp"

namespace tce {

const char* to_string(NceMode mode) {
  return mode == NceMode::ExactSoftmax ? "exact-softmax" : "nce";
}

NceMode nce_mode_from_string(const std::string& s) {
  if (s == "exact-softmax") return NceMode::ExactSoftmax;
  if (s == "nce") return NceMode::Nce;
  throw std::invalid_argument("unknown nce mode: " + s + " (expected exact-softmax|nce)");
}

void LossConfig::validate() const {
  if (temperature <= 0.0) throw std::invalid_argument("LossConfig: temperature must be > 0");
  if (n1 < 1) throw std::invalid_argument("LossConfig: n1 must be >= 1");
  if (n2 < 0) throw std::invalid_argument("LossConfig: n2 must be >= 0");
  if (first_order_weight < 0 || second_order_weight < 0 || aux_weight < 0) {
    throw std::invalid_argument("LossConfig: loss weights must be >= 0");
  }
  if (z_estimate < 0.0) throw std::invalid_argument("LossConfig: z estimate must be >= 0");
}

namespace {

struct PairSim {
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  double s = 0.0;  // unclamped cosine
};

PairSim pair_sim(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
  PairSim p;
  double sa = 0.0, sb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    p.dot += a[i] * b[i];
    sa += a[i] * a[i];
    sb += b[i] * b[i];
  }
  p.na = std::sqrt(sa);
  p.nb = std::sqrt(sb);
  if (p.na <= kNormEpsilon || p.nb <= kNormEpsilon) {
    throw DegenerateVectorError(std::string(who) + ": zero-norm input");
  }
  p.s = p.dot / (p.na * p.nb);
  return p;
}

// out += coeff * d s(a,b) / d a
void add_sim_grad_a(const PairSim& p, std::span<const double> a, std::span<const double> b,
                    double coeff, Vec& out) {
  const double c1 = coeff / (p.na * p.nb);
  const double c2 = p.dot / (p.na * p.na);
  for (size_t i = 0; i < a.size(); ++i) out[i] += c1 * (b[i] - c2 * a[i]);
}

// out += coeff * d s(a,b) / d b
void add_sim_grad_b(const PairSim& p, std::span<const double> a, std::span<const double> b,
                    double coeff, Vec& out) {
  const double c1 = coeff / (p.na * p.nb);
  const double c2 = p.dot / (p.nb * p.nb);
  for (size_t i = 0; i < b.size(); ++i) out[i] += c1 * (a[i] - c2 * b[i]);
}

// ln(e^x + e^y) without overflow
double log_add_exp(double x, double y) {
  const double m = std::max(x, y);
  return m + std::log(std::exp(x - m) + std::exp(y - m));
}

// Softmax cross-entropy over one positive logit and m negative logits, with
// max-subtraction. Returns the loss and fills dpos/dneg with d loss / d logit.
double stable_softmax_ce(double pos_logit, const std::vector<double>& neg_logits, double& dpos,
                         std::vector<double>& dneg) {
  double m = pos_logit;
  for (double z : neg_logits) m = std::max(m, z);
  const double ep = std::exp(pos_logit - m);
  double denom = ep;
  dneg.resize(neg_logits.size());
  for (size_t j = 0; j < neg_logits.size(); ++j) {
    dneg[j] = std::exp(neg_logits[j] - m);
    denom += dneg[j];
  }
  dpos = ep / denom - 1.0;
  for (double& g : dneg) g /= denom;
  return -(pos_logit - m) + std::log(denom);
}

}  // namespace

LossResult first_order_loss(std::span<const double> anchor, std::span<const double> positive,
                            std::span<const Vec> negatives, double temperature,
                            bool with_negative_grads) {
  if (temperature <= 0.0) throw std::invalid_argument("first_order_loss: temperature must be > 0");
  if (negatives.empty()) throw std::invalid_argument("first_order_loss: need >= 1 negative");
  const size_t dim = anchor.size();

  const PairSim pos = pair_sim(anchor, positive, "first_order_loss");
  std::vector<PairSim> neg(negatives.size());
  std::vector<double> neg_logits(negatives.size());
  for (size_t j = 0; j < negatives.size(); ++j) {
    if (negatives[j].size() != dim) {
      throw std::invalid_argument("first_order_loss: negative dimension mismatch");
    }
    neg[j] = pair_sim(anchor, negatives[j], "first_order_loss");
    neg_logits[j] = neg[j].s / temperature;
  }

  double dpos = 0.0;
  std::vector<double> dneg;
  LossResult r;
  r.value = stable_softmax_ce(pos.s / temperature, neg_logits, dpos, dneg);

  r.grads.assign(2 + negatives.size(), Vec());
  r.grads[0].assign(dim, 0.0);
  r.grads[1].assign(dim, 0.0);
  add_sim_grad_a(pos, anchor, positive, dpos / temperature, r.grads[0]);
  add_sim_grad_b(pos, anchor, positive, dpos / temperature, r.grads[1]);
  for (size_t j = 0; j < negatives.size(); ++j) {
    add_sim_grad_a(neg[j], anchor, negatives[j], dneg[j] / temperature, r.grads[0]);
    if (with_negative_grads) {
      r.grads[2 + j].assign(dim, 0.0);
      add_sim_grad_b(neg[j], anchor, negatives[j], dneg[j] / temperature, r.grads[2 + j]);
    }
  }
  return r;
}

LossResult nce_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const Vec> negatives, double temperature, size_t dataset_size,
                    double partition_z, bool with_negative_grads) {
  if (temperature <= 0.0) throw std::invalid_argument("nce_loss: temperature must be > 0");
  if (negatives.empty()) throw std::invalid_argument("nce_loss: need >= 1 negative");
  if (dataset_size < 1) throw std::invalid_argument("nce_loss: dataset size must be >= 1");
  if (!(partition_z > 0.0)) throw std::invalid_argument("nce_loss: partition Z must be > 0");
  const size_t dim = anchor.size();
  const size_t m = negatives.size();

  // Work in the log domain: ln q(x) = s/tau - ln Z, noise mass c = m / K.
  const double log_z = std::log(partition_z);
  const double log_c = std::log(double(m)) - std::log(double(dataset_size));

  const PairSim pos = pair_sim(anchor, positive, "nce_loss");
  const double log_qp = pos.s / temperature - log_z;
  const double lse_p = log_add_exp(log_qp, log_c);

  LossResult r;
  r.value = -(log_qp - lse_p);  // -ln P(data | positive)
  r.grads.assign(2 + m, Vec());
  r.grads[0].assign(dim, 0.0);
  r.grads[1].assign(dim, 0.0);

  // d value / d s_pos = -(c / (q_p + c)) / tau
  const double dpos = -std::exp(log_c - lse_p) / temperature;
  add_sim_grad_a(pos, anchor, positive, dpos, r.grads[0]);
  add_sim_grad_b(pos, anchor, positive, dpos, r.grads[1]);

  for (size_t j = 0; j < m; ++j) {
    if (negatives[j].size() != dim) throw std::invalid_argument("nce_loss: negative dim mismatch");
    const PairSim ns = pair_sim(anchor, negatives[j], "nce_loss");
    const double log_qn = ns.s / temperature - log_z;
    const double lse_n = log_add_exp(log_qn, log_c);
    r.value += -(log_c - lse_n);  // -ln P(noise | negative j)
    // d value / d s_j = (q_j / (q_j + c)) / tau
    const double dneg = std::exp(log_qn - lse_n) / temperature;
    add_sim_grad_a(ns, anchor, negatives[j], dneg, r.grads[0]);
    if (with_negative_grads) {
      r.grads[2 + j].assign(dim, 0.0);
      add_sim_grad_b(ns, anchor, negatives[j], dneg, r.grads[2 + j]);
    }
  }
  return r;
}

LossResult second_order_loss(std::span<const double> f_t, std::span<const double> f_t1,
                             std::span<const double> f_t2, std::span<const Vec> negatives,
                             double temperature, bool with_negative_grads) {
  if (temperature <= 0.0) throw std::invalid_argument("second_order_loss: temperature must be > 0");
  if (negatives.empty()) throw std::invalid_argument("second_order_loss: need >= 1 negative");
  const size_t dim = f_t.size();
  if (f_t1.size() != dim || f_t2.size() != dim) {
    throw std::invalid_argument("second_order_loss: dimension mismatch");
  }

  const auto diff = [&](std::span<const double> a, std::span<const double> b, const char* what) {
    Vec d(dim);
    double norm2 = 0.0;
    for (size_t i = 0; i < dim; ++i) {
      d[i] = b[i] - a[i];
      norm2 += d[i] * d[i];
    }
    if (std::sqrt(norm2) <= kNormEpsilon) {
      throw DegenerateSegmentError(std::string("second_order_loss: degenerate difference (") +
                                   what + ")");
    }
    return d;
  };

  const Vec u = diff(f_t, f_t1, "f_t1 - f_t");
  const Vec v_pos = diff(f_t1, f_t2, "f_t2 - f_t1");
  std::vector<Vec> v_neg(negatives.size());
  for (size_t j = 0; j < negatives.size(); ++j) {
    if (negatives[j].size() != dim) {
      throw std::invalid_argument("second_order_loss: negative dimension mismatch");
    }
    v_neg[j] = diff(f_t1, negatives[j], "negative - f_t1");
  }

  const PairSim pos = pair_sim(u, v_pos, "second_order_loss");
  std::vector<PairSim> neg(negatives.size());
  std::vector<double> neg_logits(negatives.size());
  for (size_t j = 0; j < negatives.size(); ++j) {
    neg[j] = pair_sim(u, v_neg[j], "second_order_loss");
    neg_logits[j] = neg[j].s / temperature;
  }

  double dpos = 0.0;
  std::vector<double> dneg;
  LossResult r;
  r.value = stable_softmax_ce(pos.s / temperature, neg_logits, dpos, dneg);

  // gradients w.r.t. the difference vectors, then mapped back:
  //   u = f_t1 - f_t, v_pos = f_t2 - f_t1, v_j = n_j - f_t1
  Vec du(dim, 0.0), dv_pos(dim, 0.0);
  add_sim_grad_a(pos, u, v_pos, dpos / temperature, du);
  add_sim_grad_b(pos, u, v_pos, dpos / temperature, dv_pos);
  std::vector<Vec> dv(negatives.size(), Vec(dim, 0.0));
  for (size_t j = 0; j < negatives.size(); ++j) {
    add_sim_grad_a(neg[j], u, v_neg[j], dneg[j] / temperature, du);
    add_sim_grad_b(neg[j], u, v_neg[j], dneg[j] / temperature, dv[j]);
  }

  r.grads.assign(3 + negatives.size(), Vec());
  r.grads[0].assign(dim, 0.0);
  r.grads[1].assign(dim, 0.0);
  r.grads[2].assign(dim, 0.0);
  for (size_t i = 0; i < dim; ++i) {
    double dv_sum = dv_pos[i];
    for (const auto& g : dv) dv_sum += g[i];
    r.grads[0][i] = -du[i];
    r.grads[1][i] = du[i] - dv_sum;
    r.grads[2][i] = dv_pos[i];
  }
  if (with_negative_grads) {
    for (size_t j = 0; j < negatives.size(); ++j) r.grads[3 + j] = std::move(dv[j]);
  }
  return r;
}

LossResult rotation_aux_loss(std::span<const double> logits, int target) {
  if (logits.size() != 4) throw std::invalid_argument("rotation_aux_loss: need 4 logits");
  if (target < 0 || target > 3) throw std::invalid_argument("rotation_aux_loss: target in 0..3");
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("rotation_aux_loss: non-finite logit");
  }
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double denom = 0.0;
  Vec soft(4);
  for (int k = 0; k < 4; ++k) {
    soft[k] = std::exp(logits[k] - m);
    denom += soft[k];
  }
  LossResult r;
  r.value = -(logits[target] - m) + std::log(denom);
  r.grads.assign(1, Vec(4));
  for (int k = 0; k < 4; ++k) r.grads[0][k] = soft[k] / denom - (k == target ? 1.0 : 0.0);
  return r;
}

CombinedLoss combined_loss(const LossResult& first, const LossResult* second,
                           const LossResult* aux, const LossConfig& config) {
  config.validate();
  if (first.grads.size() < 2) throw std::invalid_argument("combined_loss: malformed first part");
  const size_t dim = first.grads[0].size();
  const double w1 = config.first_order_weight;
  const double w2 = config.second_order_weight;
  const double wr = config.aux_weight;

  CombinedLoss out;
  out.value = w1 * first.value;
  out.d_anchor.assign(dim, 0.0);
  out.d_positive.assign(dim, 0.0);
  for (size_t i = 0; i < dim; ++i) {
    out.d_anchor[i] = w1 * first.grads[0][i];
    out.d_positive[i] = w1 * first.grads[1][i];
  }
  out.d_negatives_first.resize(first.grads.size() - 2);
  for (size_t j = 0; j + 2 < first.grads.size(); ++j) {
    const Vec& g = first.grads[2 + j];
    if (g.empty()) continue;  // negative grads were not requested
    out.d_negatives_first[j].assign(dim, 0.0);
    for (size_t i = 0; i < dim; ++i) out.d_negatives_first[j][i] = w1 * g[i];
  }

  if (second != nullptr) {
    if (second->grads.size() < 3 || second->grads[0].size() != dim) {
      throw std::invalid_argument("combined_loss: malformed second-order part");
    }
    out.value += w2 * second->value;
    out.d_third.assign(dim, 0.0);
    for (size_t i = 0; i < dim; ++i) {
      out.d_anchor[i] += w2 * second->grads[0][i];
      out.d_positive[i] += w2 * second->grads[1][i];
      out.d_third[i] = w2 * second->grads[2][i];
    }
    out.d_negatives_second.resize(second->grads.size() - 3);
    for (size_t j = 0; j + 3 < second->grads.size(); ++j) {
      const Vec& g = second->grads[3 + j];
      if (g.empty()) continue;
      out.d_negatives_second[j].assign(dim, 0.0);
      for (size_t i = 0; i < dim; ++i) out.d_negatives_second[j][i] = w2 * g[i];
    }
  }

  if (aux != nullptr) {
    if (aux->grads.size() != 1 || aux->grads[0].size() != 4) {
      throw std::invalid_argument("combined_loss: malformed aux part");
    }
    out.value += wr * aux->value;
    out.d_logits.assign(4, 0.0);
    for (int k = 0; k < 4; ++k) out.d_logits[k] = wr * aux->grads[0][k];
  }
  return out;
}

}  // namespace tce
