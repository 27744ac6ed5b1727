#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tce/core.hpp"

namespace tce {

enum class NceMode { ExactSoftmax, Nce };

const char* to_string(NceMode mode);
NceMode nce_mode_from_string(const std::string& s);

struct LossConfig {
  double temperature = 1.0;
  int n1 = 8192;                    // cross-video negatives
  int n2 = 100;                     // within-video negatives (second order)
  double first_order_weight = 5.0;
  double second_order_weight = 1.0; // 0 disables the second-order term
  double aux_weight = 1.0;          // rotation head weight
  NceMode nce_mode = NceMode::ExactSoftmax;
  double z_estimate = 0.0;          // partition constant; 0 = estimate from the first batch

  void validate() const;
};

// Loss value plus one gradient vector per input, in the input order of the
// producing operation (documented per function below).
struct LossResult {
  double value = 0.0;
  std::vector<Vec> grads;
};

// Softmax cross-entropy that scores the temporally adjacent frame against
// cross-video negatives through temperature-scaled cosine similarity.
// Inputs need not be unit-norm. grads order: [anchor, positive, negatives...].
// When with_negative_grads is false the negative slots are left empty (the
// anchor gradient still includes every negative's contribution).
LossResult first_order_loss(std::span<const double> anchor, std::span<const double> positive,
                            std::span<const Vec> negatives, double temperature,
                            bool with_negative_grads = true);

// Noise-contrastive estimate of the same objective: binary classification of
// the positive against m noise samples drawn uniformly from a dataset of size
// dataset_size, with unnormalized model q(x) = exp(s(anchor,x)/temperature)/Z.
// grads order: [anchor, positive, negatives...].
LossResult nce_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const Vec> negatives, double temperature, size_t dataset_size,
                    double partition_z, bool with_negative_grads = true);

// Second-order coherency: cosine similarity between consecutive difference
// vectors, scored against within-video negatives. The positive term compares
// (f_t1 - f_t) with (f_t2 - f_t1); each negative term compares (f_t1 - f_t)
// with (neg - f_t1). Throws DegenerateSegmentError when any difference vector
// has norm <= 1e-12. grads order: [f_t, f_t1, f_t2, negatives...].
LossResult second_order_loss(std::span<const double> f_t, std::span<const double> f_t1,
                             std::span<const double> f_t2, std::span<const Vec> negatives,
                             double temperature, bool with_negative_grads = true);

// 4-way softmax cross-entropy for the rotation prediction task.
// target indexes {0deg, 90deg, 180deg, 270deg}. grads order: [logits].
LossResult rotation_aux_loss(std::span<const double> logits, int target);

// Weighted combination w1*L1 + w2*L2 + wrot*Lrot with gradients for the
// embeddings shared between the first- and second-order parts accumulated.
struct CombinedLoss {
  double value = 0.0;
  Vec d_anchor;                       // f_t
  Vec d_positive;                     // f_t1
  Vec d_third;                        // f_t2; empty without a second-order part
  std::vector<Vec> d_negatives_first;
  std::vector<Vec> d_negatives_second;
  Vec d_logits;                       // empty without an aux part
};

CombinedLoss combined_loss(const LossResult& first, const LossResult* second,
                           const LossResult* aux, const LossConfig& config);

}  // namespace tce
