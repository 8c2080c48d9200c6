#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lovme/dataset.hpp"

namespace lovme {

// Internal CSV form: header "label,f0,...,f{d-1}", one row per sample.
// Values are written in shortest round-trip decimal so save/load is exact.
Dataset load_csv(const std::string& path, std::size_t class_count = 0);
void save_csv(const std::string& path, const Dataset& data);

// IDX (big-endian) image/label pair. Pixels are scaled to [0,1].
// `limit` = 0 keeps every sample.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit = 0);

struct BlobsResult {
  Dataset data;
  std::vector<std::size_t> noised_ids;  // samples whose label was flipped
};

// 2-D Gaussian blobs, one fixed center per class on a circle of radius 3.
// A label_noise_rate fraction of labels is flipped to a uniformly random
// other class; the affected sample indices are returned.
BlobsResult synth_blobs(std::size_t n, std::size_t classes, double noise_sigma,
                        double label_noise_rate, std::uint64_t seed);

struct PerturbResult {
  Dataset data;
  std::vector<std::size_t> perturbed_ids;
};

// Rotates a random fraction of the (square) images by a uniform angle in
// [-rotation_max_deg, +rotation_max_deg] (bilinear, edge clamp), then adds
// Gaussian pixel noise and clamps to [0,1]. Unselected samples are copied
// bit-identically; a 0-degree rotation takes an exact copy path.
PerturbResult perturb(const Dataset& data, double fraction,
                      double rotation_max_deg, double noise_sigma,
                      std::uint64_t seed);

}  // namespace lovme
