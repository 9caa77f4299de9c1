#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sotglp/encoders.hpp"
#include "sotglp/mat.hpp"

namespace sotglp {

// Learnable prompt parameters: n_global token sequences shared across
// classes and n_local sequences per class (or one shared pool of n_local
// when shared_local is set). These are the master values the optimizer
// mutates between steps; forward passes work on a BankView.
struct PromptBank {
  int num_classes = 0;
  int n_global = 0;
  int n_local = 0;
  int length = 0;  // M tokens per prompt
  int dim = 0;
  bool shared_local = false;
  std::vector<Mat> global;              // n_global mats, each M x d
  std::vector<std::vector<Mat>> local;  // num_classes (or 1) pools of n_local mats

  const Mat& local_prompt(int class_id, int j) const {
    return local[shared_local ? 0 : class_id][j];
  }
  Mat& local_prompt(int class_id, int j) { return local[shared_local ? 0 : class_id][j]; }
  int local_pools() const { return shared_local ? 1 : num_classes; }
  std::uint64_t state_checksum() const;
};

// Each prompt starts at the frozen template token embeddings plus its own
// Gaussian perturbation, so copies break symmetry but stay near the
// template.
PromptBank init_prompt_bank(const TextEncoder& enc, int num_classes, int n_global, int n_local,
                            int length, double init_noise, bool shared_local, std::uint64_t seed);

// Same layout as the bank but holding tracked (or plain) Mats for one
// forward pass. track() registers leaves in a fixed order: globals, then
// local pools class-major.
struct BankView {
  std::vector<Mat> global;
  std::vector<std::vector<Mat>> local;
  bool shared_local = false;

  const Mat& local_prompt(int class_id, int j) const {
    return local[shared_local ? 0 : class_id][j];
  }

  static BankView track(const PromptBank& bank, Tape& tape);
  static BankView values(const PromptBank& bank);
};

struct PromptEmbeddings {
  Mat global_emb;  // n_global x d, unit rows
  Mat local_emb;   // n_local x d, unit rows
};

PromptEmbeddings embed_class_prompts(const BankView& bank, const TextEncoder& enc, int class_id);

// Independent drops at the given rate; if everything is dropped one prompt
// is retained uniformly at random. Returns ascending indices.
std::vector<int> sample_prompt_dropout(int n_global, double rate, std::mt19937_64& rng);

}  // namespace sotglp
