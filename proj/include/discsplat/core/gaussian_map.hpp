#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "discsplat/core/errors.hpp"
#include "discsplat/core/gaussian.hpp"

namespace discsplat {

/// Slot index plus the generation it was issued under. Index maps store these
/// so that a recycled slot cannot be mistaken for the Gaussian it replaced.
struct GaussianId {
  int32_t index = -1;
  uint32_t generation = 0;

  static GaussianId none() { return {}; }
  bool is_none() const { return index < 0; }
  bool operator==(const GaussianId&) const = default;
};

/// Flat, index-addressed Gaussian storage with slot recycling.
///
/// Not internally synchronized: callers allow many readers or a single writer.
/// Every mutation, including mutable element access, bumps revision() so that
/// render buffers can detect that they were produced from an older map.
class GaussianMap {
 public:
  explicit GaussianMap(int sh_degree = 2) : sh_degree_(sh_degree) {
    if (sh_degree < 0 || sh_degree > sh::kMaxDegree)
      throw InvalidParameter("sh degree must be in [0, 3]");
  }

  int sh_degree() const { return sh_degree_; }
  int sh_coeffs() const { return sh::coeff_count(sh_degree_); }

  /// Number of slots, live or free. Valid indices are [0, slot_count()).
  size_t slot_count() const { return gaussians_.size(); }
  size_t live_count() const { return gaussians_.size() - free_list_.size(); }
  bool empty() const { return live_count() == 0; }

  bool is_live(size_t index) const { return index < alive_.size() && alive_[index] != 0; }
  bool is_live(GaussianId id) const {
    return id.index >= 0 && is_live(static_cast<size_t>(id.index)) &&
           generations_[static_cast<size_t>(id.index)] == id.generation;
  }

  GaussianId id_of(size_t index) const {
    return {static_cast<int32_t>(index), generations_[index]};
  }

  const Gaussian& operator[](size_t index) const { return gaussians_[index]; }
  const Gaussian& at(GaussianId id) const {
    if (!is_live(id)) throw InvalidInput("stale or missing Gaussian id");
    return gaussians_[static_cast<size_t>(id.index)];
  }

  Gaussian& mutable_at(size_t index) {
    ++revision_;
    return gaussians_[index];
  }

  GaussianId add(const Gaussian& g) {
    ++revision_;
    ++total_added_;
    size_t index;
    if (!free_list_.empty()) {
      index = free_list_.back();
      free_list_.pop_back();
      gaussians_[index] = g;
      alive_[index] = 1;
    } else {
      index = gaussians_.size();
      gaussians_.push_back(g);
      alive_.push_back(1);
      generations_.push_back(0);
    }
    return id_of(index);
  }

  /// Frees the slot; its generation advances so old ids stop resolving.
  void remove(size_t index) {
    if (!is_live(index)) throw InvalidInput("removing a dead Gaussian slot");
    ++revision_;
    ++total_removed_;
    alive_[index] = 0;
    ++generations_[index];
    free_list_.push_back(static_cast<uint32_t>(index));
  }

  uint64_t revision() const { return revision_; }
  uint64_t total_added() const { return total_added_; }
  uint64_t total_removed() const { return total_removed_; }

  size_t count_state(GaussianState s) const {
    size_t n = 0;
    for (size_t i = 0; i < gaussians_.size(); ++i)
      if (alive_[i] && gaussians_[i].state == s) ++n;
    return n;
  }
  size_t stable_count() const { return count_state(GaussianState::Stable); }
  size_t unstable_count() const { return count_state(GaussianState::Unstable); }

  std::vector<size_t> live_indices() const {
    std::vector<size_t> out;
    out.reserve(live_count());
    for (size_t i = 0; i < gaussians_.size(); ++i)
      if (alive_[i]) out.push_back(i);
    return out;
  }

  template <typename Fn>
  void for_each_live(Fn&& fn) const {
    for (size_t i = 0; i < gaussians_.size(); ++i)
      if (alive_[i]) fn(i, gaussians_[i]);
  }

 private:
  int sh_degree_;
  std::vector<Gaussian> gaussians_;
  std::vector<uint8_t> alive_;
  std::vector<uint32_t> generations_;
  std::vector<uint32_t> free_list_;
  uint64_t revision_ = 0;
  uint64_t total_added_ = 0;
  uint64_t total_removed_ = 0;
};

}  // namespace discsplat
