#pragma once

#include <span>
#include <vector>

#include "tce/memory_bank.hpp"

namespace tce {

// Annealing schedule for the hypersphere boundary used in semi-hard negative
// selection: r(t) = r0 + (rE - r0) * (1 - exp(-5t/E)) with t in [0, E] epochs.
// The boundary is a similarity cap that rises over training, so early epochs
// admit almost nothing (random fallback everywhere) and late epochs admit the
// hardest negatives.
struct MiningSchedule {
  double r0 = -1.0;
  double r_end = 1.0;
  double epochs = 9.0;
  bool enabled = true;

  void validate() const;
};

// Exact evaluation of the closed-form radius. Throws std::invalid_argument
// when t is outside [0, epochs].
double radius(const MiningSchedule& schedule, double t);

// Semi-hard selection: among bank entries outside the anchor's video with
// similarity <= r, return the n most similar (ties broken by ascending key).
// A shortfall is filled by uniform sampling without replacement from the
// remaining non-eligible keys outside the anchor's video.
// Throws InsufficientNegativesError when fewer than n candidates exist.
std::vector<BankKey> select_negatives(const MemoryBank& bank, std::span<const double> anchor,
                                      uint32_t anchor_video, size_t n, double r, Rng& rng);

}  // namespace tce
