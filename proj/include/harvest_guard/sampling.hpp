#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "harvest_guard/errors.hpp"
#include "harvest_guard/rng.hpp"

namespace harvest_guard::sampling {

/// Duplicates minority-class items (uniform, with replacement) until every
/// present class has the majority count. Originals come first, in input
/// order; duplicates follow, grouped by ascending class code.
template <class T, class LabelOf>
std::vector<T> oversample(std::span<const T> items, LabelOf label_of, std::uint64_t seed) {
  if (items.empty()) throw ValidationError("oversample: empty input");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i)
    by_class[static_cast<int>(label_of(items[i]))].push_back(i);
  std::size_t majority = 0;
  for (const auto& [cls, idx] : by_class) majority = std::max(majority, idx.size());

  std::vector<T> out(items.begin(), items.end());
  out.reserve(majority * by_class.size());
  Rng rng(seed);
  for (const auto& [cls, idx] : by_class) {
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    for (std::size_t n = idx.size(); n < majority; ++n) out.push_back(items[idx[pick(rng)]]);
  }
  return out;
}

struct SplitCounts {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Per class: train = round(count * ratio), half away from zero.
inline SplitCounts stratified_split_counts(std::span<const std::size_t> counts, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must be in (0, 1)");
  SplitCounts out;
  for (std::size_t c : counts) {
    if (c == 0) throw ValidationError("stratified split needs at least one item per class");
    // The small epsilon keeps products like 0.7 * 5 = 3.4999999999999996 on the
    // intended side of the rounding boundary.
    const auto train = static_cast<std::size_t>(std::round(static_cast<double>(c) * ratio + 1e-9));
    out.train.push_back(train);
    out.validation.push_back(c - train);
  }
  return out;
}

/// Shuffles each class with `seed`, then cuts it per stratified_split_counts.
/// Output keeps class order ascending, shuffled order within a class.
template <class T, class LabelOf>
std::pair<std::vector<T>, std::vector<T>> stratified_split(std::span<const T> items, LabelOf label_of,
                                                           double ratio, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < items.size(); ++i)
    by_class[static_cast<int>(label_of(items[i]))].push_back(i);
  std::vector<std::size_t> counts;
  for (const auto& [cls, idx] : by_class) counts.push_back(idx.size());
  const auto split = stratified_split_counts(counts, ratio);

  Rng rng(seed);
  std::pair<std::vector<T>, std::vector<T>> out;
  std::size_t k = 0;
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < split.train[k] ? out.first : out.second).push_back(items[idx[i]]);
    ++k;
  }
  return out;
}

}  // namespace harvest_guard::sampling
