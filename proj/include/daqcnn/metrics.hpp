#pragma once

// Binary classification metrics. AUC is the Mann-Whitney statistic computed
// from integer pair counts, so ties are exact.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "daqcnn/error.hpp"

namespace daqcnn {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

namespace detail {

inline void check_scores(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw error(errc::count_mismatch, "scores and labels differ in length");
  for (auto y : labels)
    if (y > 1) throw error(errc::bad_label, "labels must be 0 or 1");
}

// Indices ordered by descending score; ties stay contiguous.
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

struct ClassCounts {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

inline ClassCounts count_classes(std::span<const std::uint8_t> labels) {
  ClassCounts c;
  for (auto y : labels) (y ? c.pos : c.neg)++;
  return c;
}

}  // namespace detail

/// (concordant + 0.5 * tied) / (P * N) over positive-negative pairs.
inline double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  detail::check_scores(scores, labels);
  const auto totals = detail::count_classes(labels);
  if (totals.pos == 0 || totals.neg == 0) throw error(errc::single_class, "AUC needs both classes");

  // Twice the Mann-Whitney U, kept integral.
  std::uint64_t twice_u = 0;
  std::uint64_t neg_below = totals.neg;
  const auto order = detail::descending_order(scores);
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    detail::ClassCounts group;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) (labels[order[j++]] ? group.pos : group.neg)++;
    neg_below -= group.neg;
    twice_u += 2 * group.pos * neg_below + group.pos * group.neg;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(totals.pos) * static_cast<double>(totals.neg));
}

inline double auc(const LabeledScores& ls) { return auc(ls.scores, ls.labels); }

/// Fraction of samples whose prediction (score >= threshold) equals the label.
/// Scores exactly at the threshold predict the positive class.
inline double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold = 0.5) {
  detail::check_scores(scores, labels);
  if (scores.empty()) throw error(errc::empty_input, "accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= threshold) == (labels[i] == 1);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

inline double accuracy(const LabeledScores& ls, double threshold = 0.5) {
  return accuracy(ls.scores, ls.labels, threshold);
}

/// ROC staircase from (0,0) to (1,1). Tied scores move diagonally; collinear
/// intermediate points are dropped.
inline std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  detail::check_scores(scores, labels);
  const auto totals = detail::count_classes(labels);
  if (totals.pos == 0 || totals.neg == 0) throw error(errc::single_class, "ROC needs both classes");

  std::vector<std::pair<std::uint64_t, std::uint64_t>> corners{{0, 0}};  // (fp, tp)
  const auto collinear = [](auto a, auto b, auto c) {
    const auto dx1 = static_cast<std::int64_t>(b.first - a.first), dy1 = static_cast<std::int64_t>(b.second - a.second);
    const auto dx2 = static_cast<std::int64_t>(c.first - b.first), dy2 = static_cast<std::int64_t>(c.second - b.second);
    return dx1 * dy2 == dy1 * dx2;
  };

  const auto order = detail::descending_order(scores);
  std::uint64_t fp = 0, tp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) (labels[order[j++]] ? tp : fp)++;
    const std::pair next{fp, tp};
    if (corners.size() >= 2 && collinear(corners[corners.size() - 2], corners.back(), next))
      corners.back() = next;
    else
      corners.push_back(next);
    i = j;
  }

  std::vector<RocPoint> points;
  points.reserve(corners.size());
  for (const auto& [f, t] : corners)
    points.push_back({static_cast<double>(f) / static_cast<double>(totals.neg),
                      static_cast<double>(t) / static_cast<double>(totals.pos)});
  return points;
}

inline std::vector<RocPoint> roc_points(const LabeledScores& ls) { return roc_points(ls.scores, ls.labels); }

/// Trapezoidal area under a point list.
inline double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2;
  return area;
}

}  // namespace daqcnn
