#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sotglp/mat.hpp"

namespace sotglp {

struct SynthImage {
  Mat patches;                // P x d_in descriptor grid
  int label = -1;             // -1 for OOD images
  std::vector<bool> planted;  // true where a prototype copy was placed
};

struct EpisodeConfig {
  int classes = 8;
  int shots = 16;       // train images per class
  int test_shots = 8;   // test images per class
  int patches = 49;     // P, 7x7 grid at the defaults
  int input_dim = 16;
  int n_parts = 3;      // prototypes per class
  double noise_sigma = 0.1;
  // Amplitude of the per-class context vector mixed into background
  // patches. This is the whole-image cue the global branch can learn; the
  // part-defined variant sets it to 0 so background statistics are shared
  // across classes and only planted parts carry label information.
  double global_tint = 0.3;

  void validate() const;
};

struct Episode {
  EpisodeConfig cfg;
  std::uint64_t seed = 0;
  std::vector<Mat> prototypes;  // one n_parts x d_in matrix per class, unit rows
  Mat contexts;                 // classes x d_in, unit rows
  std::vector<SynthImage> train;
  std::vector<SynthImage> test;

  std::vector<int> train_labels() const;
  std::vector<int> test_labels() const;
};

enum class OodKind { background, foreign };

struct OodPool {
  OodKind kind = OodKind::background;
  std::vector<SynthImage> images;
  Mat foreign_prototypes;  // empty for background pools

  static const char* kind_name(OodKind k);
};

// Deterministic per seed. Every class-c image carries noisy copies of one to
// n_parts of class c's prototypes at distinct random positions; the rest is
// isotropic background, tinted by the class context when global_tint > 0.
Episode gen_episode(const EpisodeConfig& cfg, std::uint64_t seed);

// background: pure noise images. foreign: images planted with freshly drawn
// prototypes whose cosine to every episode prototype stays below 0.5
// (rejection sampled; throws GenerationError when input_dim is too small).
OodPool gen_ood_pool(const Episode& episode, int size, OodKind kind, std::uint64_t seed);

}  // namespace sotglp
