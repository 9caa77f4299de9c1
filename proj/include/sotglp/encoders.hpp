#pragma once

#include <cstdint>
#include <vector>

#include "sotglp/mat.hpp"

namespace sotglp {

// Frozen stand-in for a text tower: token embeddings, mean pooling, a fixed
// output projection and L2 normalization. Only prompt tokens fed into
// encode_text ever carry gradients.
struct TextEncoder {
  int embed_dim = 0;
  int num_classes = 0;
  Mat vocab;     // (num_classes + kTemplateTokens) x d; class rows first
  Mat out_proj;  // d x d
  Mat sos, eot;  // 1 x d

  static constexpr int kTemplateTokens = 4;  // "a photo of a"

  static TextEncoder make_random(int num_classes, int embed_dim, std::uint64_t seed);

  Mat class_token(int class_id) const;     // 1 x d
  Mat template_token(int position) const;  // 1 x d, cycles over the 4 rows
  std::uint64_t weights_checksum() const;
};

// Mean-pool [sos; prompt rows; class token; eot], project, normalize.
Mat encode_text(const TextEncoder& enc, const Mat& prompt_tokens, int class_id);

// Frozen two-stream vision tower. Both streams share every weight and the
// same input sequence; they differ only in how the attention matrix is
// formed (Q-K vs V-V).
struct VisionEncoder {
  int input_dim = 0;
  int embed_dim = 0;
  int num_layers = 0;
  Mat patch_embed;  // input_dim x d
  Mat cls_token;    // 1 x d
  struct Block {
    Mat w_q, w_k, w_v, w_o;  // all d x d
  };
  std::vector<Block> layers;

  static VisionEncoder make_random(int input_dim, int embed_dim, int num_layers, std::uint64_t seed);
  std::uint64_t weights_checksum() const;
};

// One V-V block: V = Z W_v, A = softmax(V V^T / sqrt(d)), Z + (A V) W_o.
Mat vv_attention_layer(const Mat& z_prev, const Mat& w_v, const Mat& w_o);

// Standard Q-K block with the same residual form.
Mat qk_attention_layer(const Mat& z_prev, const VisionEncoder::Block& blk);

struct DualEncoding {
  Mat z_global;    // 1 x d, final Q-K [CLS], unit norm
  Mat qk_patches;  // P x d, non-CLS rows of the Q-K stream (not normalized)
  Mat vv_patches;  // P x d, non-CLS rows of the V-V stream (not normalized)
};

DualEncoding encode_image_dual(const VisionEncoder& enc, const Mat& patches);

// Learnable d x d projection applied to V-V patch tokens, then row
// normalization. Identity when disabled; normalization is skipped only for
// the no-normalize ablation, which raises the cost clamp downstream instead.
struct LocalProjection {
  Mat weight;
  bool enabled = true;
  bool normalize = true;

  static LocalProjection identity_init(int dim);
};

Mat local_project(const LocalProjection& proj, const Mat& vv_patches);

}  // namespace sotglp
