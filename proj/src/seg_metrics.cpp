#include "rrtk/seg_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "rrtk/errors.hpp"

namespace rrtk {

double dice(const LabelVolume& a, const LabelVolume& b, std::uint16_t region) {
  if (a.shape != b.shape)
    throw ValidationError("dice: shape mismatch");
  std::size_t na = 0, nb = 0, ninter = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool in_a = a.labels[i] == region;
    const bool in_b = b.labels[i] == region;
    na += in_a;
    nb += in_b;
    ninter += in_a && in_b;
  }
  if (na + nb == 0)
    return 1.0;
  return 2.0 * static_cast<double>(ninter) / static_cast<double>(na + nb);
}

double min_pairwise_dice(const std::vector<LabelVolume>& vols,
                         std::uint16_t region) {
  if (vols.size() < 2)
    throw ValidationError("min_pairwise_dice: need at least 2 samples");
  double best = 1.0;
  for (std::size_t i = 0; i < vols.size(); ++i)
    for (std::size_t j = i + 1; j < vols.size(); ++j)
      best = std::min(best, dice(vols[i], vols[j], region));
  return best;
}

std::vector<double> entropy_map(const std::vector<LabelVolume>& vols,
                                const std::vector<std::uint16_t>& regions) {
  if (vols.size() < 2)
    throw ValidationError("entropy_map: need at least 2 samples");
  for (std::size_t i = 1; i < vols.size(); ++i)
    if (vols[i].shape != vols[0].shape)
      throw ValidationError("entropy_map: shape mismatch");

  std::unordered_map<std::uint16_t, std::size_t> region_index;
  for (std::size_t r = 0; r < regions.size(); ++r)
    region_index.emplace(regions[r], r);

  const std::size_t nvox = vols[0].labels.size();
  const double n = static_cast<double>(vols.size());
  std::vector<double> out(nvox, 0.0);
  std::vector<std::size_t> counts(regions.size());

  for (std::size_t v = 0; v < nvox; ++v) {
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& vol : vols) {
      const auto it = region_index.find(vol.labels[v]);
      if (it == region_index.end())
        throw ValidationError("entropy_map: unknown label " +
                              std::to_string(vol.labels[v]) + " at voxel " +
                              std::to_string(v));
      ++counts[it->second];
    }
    double e = 0.0;
    for (const std::size_t c : counts)
      if (c > 0) {
        const double p = static_cast<double>(c) / n;
        e -= p * std::log(p);
      }
    out[v] = e;
  }
  return out;
}

LabelVolume mask_to_superclass(
    const LabelVolume& v,
    const std::map<std::uint16_t, std::uint16_t>& mapping) {
  LabelVolume out;
  out.shape = v.shape;
  out.labels.resize(v.labels.size());
  for (std::size_t i = 0; i < v.labels.size(); ++i) {
    const auto it = mapping.find(v.labels[i]);
    if (it == mapping.end())
      throw ValidationError("mask_to_superclass: no mapping for label " +
                            std::to_string(v.labels[i]));
    out.labels[i] = it->second;
  }
  for (const auto& [old_id, name] : v.region_table) {
    const auto it = mapping.find(old_id);
    if (it != mapping.end()) {
      auto [slot, inserted] = out.region_table.emplace(it->second, name);
      if (!inserted && slot->second != name)
        slot->second = slot->second + "+" + name;
    }
  }
  return out;
}

} // namespace rrtk
