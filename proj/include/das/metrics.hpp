#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "das/tensor.hpp"

namespace das {

// Mean per-class recall over classes present in `truth`.
inline double balanced_accuracy(std::span<const int> preds, std::span<const int> truth, std::size_t num_classes) {
  if (preds.size() != truth.size()) throw ShapeError("balanced_accuracy: prediction and truth sizes differ");
  if (truth.empty()) throw UsageError("balanced_accuracy needs at least one sample");
  std::vector<double> hit(num_classes, 0.0);
  std::vector<double> count(num_classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || static_cast<std::size_t>(truth[i]) >= num_classes) {
      throw UsageError("label " + std::to_string(truth[i]) + " outside [0, " + std::to_string(num_classes) + ")");
    }
    count[truth[i]] += 1.0;
    if (preds[i] == truth[i]) hit[truth[i]] += 1.0;
  }
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] == 0.0) continue;
    total += hit[c] / count[c];
    ++present;
  }
  if (present == 0) throw UsageError("balanced_accuracy: no class present in truth");
  return total / static_cast<double>(present);
}

// Rank-based (Mann-Whitney) AUC of `scores` for samples whose label equals `positive`; ties get mid-ranks.
inline double binary_auc(std::span<const double> scores, std::span<const int> labels, int positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t r = i; r <= j; ++r) {
      if (labels[order[r]] == positive) {
        rank_sum += mid_rank;
        n_pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

// One-vs-rest AUC averaged over classes that have both positives and negatives. scores: [N, K].
inline double macro_auc(const Tensor& scores, std::span<const int> truth) {
  if (scores.rank() != 2 || scores.dim(0) != truth.size()) {
    throw ShapeError("macro_auc: scores " + shape_str(scores.shape()) + " for " + std::to_string(truth.size()) +
                     " labels");
  }
  const std::size_t N = scores.dim(0);
  const std::size_t K = scores.dim(1);
  double total = 0.0;
  std::size_t used = 0;
  std::vector<double> column(N);
  for (std::size_t c = 0; c < K; ++c) {
    const auto n_pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), static_cast<int>(c)));
    if (n_pos == 0 || n_pos == N) continue;
    for (std::size_t i = 0; i < N; ++i) column[i] = scores.at(i, c);
    total += binary_auc(column, truth, static_cast<int>(c));
    ++used;
  }
  if (used == 0) throw UsageError("macro_auc: no class has both positive and negative samples");
  return total / static_cast<double>(used);
}

}  // namespace das
