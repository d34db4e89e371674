#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "advnav/core/types.hpp"
#include "advnav/rng.hpp"

namespace advnav {

/// Episode-level split: deterministic shuffle by seed, train gets
/// floor(fraction * N) records, test gets the rest.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& d,
                                                 double fraction,
                                                 std::uint64_t seed) {
  if (d.records.empty()) throw std::invalid_argument("split_dataset: empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split_dataset: fraction must be in (0, 1)");

  std::vector<std::size_t> order(d.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5117));
  rng.shuffle(order);

  const auto n_train = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(d.records.size())));

  Dataset train = d, test = d;
  train.records.clear();
  test.records.clear();
  train.split_tag = "train";
  test.split_tag = "test";
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? train : test).records.push_back(d.records[order[i]]);
  return {std::move(train), std::move(test)};
}

}  // namespace advnav
