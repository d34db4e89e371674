#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "advnav/rng.hpp"
#include "advnav/util.hpp"

namespace advnav::diff {

using Mat = Eigen::MatrixXd;

/// Named parameter arrays with matching gradient accumulators. Entries are
/// kept in name order so hashing and serialization are order-independent of
/// construction.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t step = 0;

  Mat& add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    return add(name, Mat::Zero(rows, cols));
  }

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); the stream is derived from
  /// (store seed, name) so initialization does not depend on creation order.
  Mat& add_xavier(const std::string& name, Eigen::Index fan_in,
                  Eigen::Index fan_out) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(mix_seed(seed_, fnv1a(name.data(), name.size())));
    Mat m(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r)
      for (Eigen::Index c = 0; c < fan_out; ++c)
        m(r, c) = rng.uniform(-bound, bound);
    return add(name, std::move(m));
  }

  Mat& add(const std::string& name, Mat value) {
    if (entries_.count(name))
      throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    auto& e = entries_[name];
    e.value = std::move(value);
    e.grad = Mat::Zero(e.value.rows(), e.value.cols());
    return e.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Mat& value(const std::string& name) { return at(name).value; }
  const Mat& value(const std::string& name) const { return at(name).value; }
  Mat& grad(const std::string& name) { return at(name).grad; }
  const Mat& grad(const std::string& name) const { return at(name).grad; }

  void zero_grads() {
    for (auto& [name, e] : entries_) e.grad.setZero();
  }

  template <typename Fn>
  void for_each(Fn&& fn) {  // fn(name, value, grad) in name order
    for (auto& [name, e] : entries_) fn(name, e.value, e.grad);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [name, e] : entries_) fn(name, e.value, e.grad);
  }

  std::size_t num_params() const { return entries_.size(); }
  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  /// FNV-1a over the raw value bytes in name order; the player-isolation
  /// audits compare these across update steps.
  std::uint64_t value_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, e] : entries_) {
      h = fnv1a(name.data(), name.size(), h);
      h = fnv1a(e.value.data(),
                static_cast<std::size_t>(e.value.size()) * sizeof(double), h);
    }
    return h;
  }

  double grad_norm() const {
    double sq = 0.0;
    for (const auto& [name, e] : entries_) sq += e.grad.squaredNorm();
    return std::sqrt(sq);
  }

 private:
  struct Entry {
    Mat value;
    Mat grad;
  };

  Entry& at(const std::string& name) {
    const auto it = entries_.find(name);
    if (it == entries_.end())
      throw std::out_of_range("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  std::uint64_t seed_ = 0;
  std::map<std::string, Entry> entries_;
};

}  // namespace advnav::diff
