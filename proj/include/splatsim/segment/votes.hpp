#pragma once

// Lifting 2D instance ids onto Gaussians: each Gaussian whose center lies
// near the rendered surface of a view takes that view's id as one vote;
// the plurality over all views becomes its object id.

#include "splatsim/io/camera.hpp"
#include "splatsim/io/gaussian_scene.hpp"
#include "splatsim/io/raster.hpp"
#include "splatsim/log.hpp"
#include "splatsim/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace splatsim {

/// Per-Gaussian (id, count) pairs, sorted by id.
class VoteTable {
 public:
  using Entry = std::pair<ObjectId, std::uint32_t>;

  VoteTable() = default;
  explicit VoteTable(std::size_t n_gaussians) : votes_(n_gaussians) {}

  [[nodiscard]] std::size_t size() const { return votes_.size(); }
  [[nodiscard]] const std::vector<Entry>& of(std::size_t g) const { return votes_[g]; }

  void add(std::size_t g, ObjectId id, std::uint32_t count = 1) {
    auto& v = votes_[g];
    auto it = std::lower_bound(v.begin(), v.end(), id, [](const Entry& e, ObjectId k) { return e.first < k; });
    if (it != v.end() && it->first == id)
      it->second += count;
    else
      v.insert(it, {id, count});
  }

  [[nodiscard]] std::uint32_t total(std::size_t g) const {
    std::uint32_t t = 0;
    for (const auto& e : votes_[g]) t += e.second;
    return t;
  }

  friend bool operator==(const VoteTable&, const VoteTable&) = default;

 private:
  std::vector<std::vector<Entry>> votes_;
};

/// Adds one vote per Gaussian for this view when |z_c − d| ≤ d·tau_d at the
/// nearest pixel of its projected center. Background (id 0), off-image,
/// behind-camera and no-surface pixels cast nothing.
inline void assign_view_votes(const GaussianScene& scene, const Camera& cam, const DepthMap& depth,
                              const IdMask& ids, double tau_d, VoteTable& votes) {
  if (depth.width() != cam.width || depth.height() != cam.height || ids.width != cam.width ||
      ids.height != cam.height)
    throw DataError("view '" + cam.name + "': depth/mask dimensions do not match the camera");
  if (!(tau_d > 0)) throw ConfigError("tau_d must be positive");
  if (votes.size() != scene.size()) throw DataError("vote table size does not match scene");

  parallel_for(std::int64_t(scene.size()), [&](std::int64_t i) {
    const Vec3 pc = cam.to_camera(scene.gaussians[std::size_t(i)].mean());
    if (!(pc.z() > 0)) return;
    const Vec2 uv = cam.project(pc);
    const double px = std::round(uv.x()), py = std::round(uv.y());
    if (!(px >= 0 && py >= 0 && px < cam.width && py < cam.height)) return;
    const int x = int(px), y = int(py);
    if (!depth.has_surface(x, y)) return;
    const double d = depth(x, y);
    if (std::abs(pc.z() - d) > d * tau_d) return;
    const ObjectId id = ids(x, y);
    if (id == kBackgroundId) return;
    votes.add(std::size_t(i), id);
  });
}

/// Plurality id per Gaussian; no votes → background, ties → smallest id.
inline std::vector<ObjectId> vote_final_ids(const VoteTable& votes) {
  std::vector<ObjectId> out(votes.size(), kBackgroundId);
  for (std::size_t g = 0; g < votes.size(); ++g) {
    std::uint32_t best = 0;
    for (const auto& [id, count] : votes.of(g))  // ascending id, so strict > keeps the smallest on ties
      if (count > best) {
        best = count;
        out[g] = id;
      }
  }
  return out;
}

inline void apply_ids(GaussianScene& scene, const std::vector<ObjectId>& ids) {
  if (ids.size() != scene.size()) throw DataError("id list size does not match scene");
  for (std::size_t i = 0; i < ids.size(); ++i) scene.gaussians[i].object_id = ids[i];
}

/// Indices (in scene order) of Gaussians carrying `id`; missing ids count as background.
inline std::vector<std::uint32_t> object_indices(const GaussianScene& scene, ObjectId id) {
  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (scene.gaussians[i].id_or_background() == id) idx.push_back(std::uint32_t(i));
  return idx;
}

inline GaussianScene extract_object(const GaussianScene& scene, ObjectId id) {
  GaussianScene out;
  for (const auto& g : scene.gaussians)
    if (g.id_or_background() == id) out.gaussians.push_back(g);
  if (out.empty()) log::warn("segment", "extract_object: no Gaussians carry the requested id", "id=" + std::to_string(id));
  return out;
}

/// Everything except `id`.
inline GaussianScene extract_complement(const GaussianScene& scene, ObjectId id) {
  GaussianScene out;
  for (const auto& g : scene.gaussians)
    if (g.id_or_background() != id) out.gaussians.push_back(g);
  return out;
}

/// Sorted distinct ids present in the scene (including background if present).
inline std::vector<ObjectId> scene_ids(const GaussianScene& scene) {
  std::vector<ObjectId> ids;
  for (const auto& g : scene.gaussians) ids.push_back(g.id_or_background());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace splatsim
