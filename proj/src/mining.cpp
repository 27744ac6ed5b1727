#include "tce/mining.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tce/errors.hpp"
#include "tce/kernels.hpp"

namespace tce {

void MiningSchedule::validate() const {
  if (r0 > r_end) throw std::invalid_argument("MiningSchedule: r0 must be <= r_end");
  if (r0 < -1.0 || r0 > 1.0 || r_end < -1.0 || r_end > 1.0) {
    throw std::invalid_argument("MiningSchedule: radii must lie in [-1, 1]");
  }
  if (epochs <= 0.0) throw std::invalid_argument("MiningSchedule: epochs must be > 0");
}

double radius(const MiningSchedule& schedule, double t) {
  schedule.validate();
  if (t < 0.0 || t > schedule.epochs) {
    throw std::invalid_argument("radius: t = " + std::to_string(t) + " outside [0, " +
                                std::to_string(schedule.epochs) + "]");
  }
  return schedule.r0 + (schedule.r_end - schedule.r0) * (1.0 - std::exp(-5.0 * t / schedule.epochs));
}

std::vector<BankKey> select_negatives(const MemoryBank& bank, std::span<const double> anchor,
                                      uint32_t anchor_video, size_t n, double r, Rng& rng) {
  if (static_cast<int>(anchor.size()) != bank.dim()) {
    throw std::invalid_argument("select_negatives: anchor dimension mismatch");
  }
  const auto& keys = bank.keys();
  std::vector<double> sims(keys.size());
  kernels::bank_similarity(bank.rows().data(), keys.size(), bank.dim(), anchor.data(),
                           sims.data());

  // keys_ is ascending, so index order is key order; partition by the cap
  std::vector<size_t> eligible, outside;
  eligible.reserve(keys.size());
  for (size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].video == anchor_video) continue;
    (sims[i] <= r ? eligible : outside).push_back(i);
  }
  if (eligible.size() + outside.size() < n) {
    throw InsufficientNegativesError("select_negatives: requested " + std::to_string(n) +
                                     " negatives but only " +
                                     std::to_string(eligible.size() + outside.size()) +
                                     " candidates outside video " + std::to_string(anchor_video));
  }

  // highest similarity first; equal similarities resolve by ascending key
  std::stable_sort(eligible.begin(), eligible.end(),
                   [&](size_t a, size_t b) { return sims[a] > sims[b]; });
  std::vector<BankKey> out;
  out.reserve(n);
  for (size_t j = 0; j < eligible.size() && out.size() < n; ++j) out.push_back(keys[eligible[j]]);
  if (out.size() < n) {
    const auto picks = rng.sample_without_replacement(outside.size(), n - out.size());
    for (size_t p : picks) out.push_back(keys[outside[p]]);
  }
  return out;
}

}  // namespace tce
