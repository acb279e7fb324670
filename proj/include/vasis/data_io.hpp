#pragma once

#include <array>
#include <string>
#include <vector>

#include "vasis/layout.hpp"
#include "vasis/rng.hpp"

namespace vasis {

// Maps label index to class name and display color (channels in [-1,1]).
struct Palette {
  std::vector<std::string> names;
  std::vector<std::array<double, 3>> colors;
};

enum class SceneFamily { stripes, blobs, sky_road, motif_grid };

// Synthetic scene generator standing in for real datasets: label maps paired
// with renders of per-class base color plus uniform texture noise in
// [-amplitude, amplitude] (std amplitude/sqrt(3)), clipped to [-1,1].
struct SyntheticSpec {
  int64_t num_classes = 2;
  int64_t resolution = 64;
  SceneFamily family = SceneFamily::sky_road;
  std::vector<std::array<double, 3>> colors;  // per class, all distinct
  std::vector<double> amplitudes;             // per class
  int64_t count = 16;
  uint64_t seed = 1;

  void validate() const;  // rejects color collisions and bad field counts
  Palette palette() const;
};

struct Sample {
  LabelMap labels;  // (1,H,W)
  Tensor image;     // (1,3,H,W) in [-1,1]
};

// Deterministic in spec.seed; sample i draws from a stream derived from
// (seed, i). Every requested class appears in at least one sample.
std::vector<Sample> generate_dataset(const SyntheticSpec& spec);

// Renders a label map with the spec's colors and amplitudes.
Tensor render_labels(const LabelMap& labels, const SyntheticSpec& spec, RngStream& rng);

// ---- files ----
// Label maps are stored as binary 8-bit PGM (one label per pixel, so labels
// must be < 256), with a text palette sidecar at <path>.palette.txt.
void save_label_map(const LabelMap& labels, const std::string& path, const Palette& palette);
LabelMap load_label_map(const std::string& path, Palette* palette_out = nullptr);

// Images are stored as binary PPM with [-1,1] mapped affinely to [0,255].
void save_image_ppm(const Tensor& image, const std::string& path);
Tensor load_image_ppm(const std::string& path);

// Tiles images row-major into a single PPM.
void save_image_grid(const std::vector<Tensor>& images, const std::string& path,
                     int64_t columns);

// ---- dataset directories ----
// Layout: <dir>/labels/NNNNN.pgm (+sidecars), <dir>/images/NNNNN.ppm,
// <dir>/manifest.json recording the spec and seed.
void write_dataset(const SyntheticSpec& spec, const std::string& dir, bool force);

struct Dataset {
  SyntheticSpec spec;
  std::vector<Sample> samples;
};
Dataset load_dataset(const std::string& dir);

}  // namespace vasis
