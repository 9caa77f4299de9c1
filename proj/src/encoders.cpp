#include "sotglp/encoders.hpp"

#include <cmath>

#include "sotglp/rng.hpp"

namespace sotglp {

TextEncoder TextEncoder::make_random(int num_classes, int embed_dim, std::uint64_t seed) {
  if (num_classes < 1 || embed_dim < 1) throw SizeError("TextEncoder: counts must be >= 1");
  TextEncoder enc;
  enc.embed_dim = embed_dim;
  enc.num_classes = num_classes;
  double sigma = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  auto rng = make_rng(seed, 0x7e57);
  enc.vocab = Mat::gaussian(rng, num_classes + kTemplateTokens, embed_dim, sigma);
  enc.out_proj = Mat::gaussian(rng, embed_dim, embed_dim, sigma);
  enc.sos = Mat::gaussian(rng, 1, embed_dim, sigma);
  enc.eot = Mat::gaussian(rng, 1, embed_dim, sigma);
  return enc;
}

Mat TextEncoder::class_token(int class_id) const {
  if (class_id < 0 || class_id >= num_classes) throw IndexError("TextEncoder: class_id out of range");
  return slice_rows(vocab, class_id, class_id + 1);
}

Mat TextEncoder::template_token(int position) const {
  int row = num_classes + (position % kTemplateTokens);
  return slice_rows(vocab, row, row + 1);
}

std::uint64_t TextEncoder::weights_checksum() const {
  std::uint64_t h = checksum(vocab);
  h = h * 1099511628211ULL ^ checksum(out_proj);
  h = h * 1099511628211ULL ^ checksum(sos);
  h = h * 1099511628211ULL ^ checksum(eot);
  return h;
}

Mat encode_text(const TextEncoder& enc, const Mat& prompt_tokens, int class_id) {
  if (prompt_tokens.rows < 1) throw ContractError("encode_text: prompt must have at least one token");
  if (prompt_tokens.cols != enc.embed_dim) throw DimensionError("encode_text: prompt width != embed_dim");
  Mat seq = vstack({enc.sos, prompt_tokens, enc.class_token(class_id), enc.eot});
  return l2norm_rows(matmul(mean_rows(seq), enc.out_proj));
}

VisionEncoder VisionEncoder::make_random(int input_dim, int embed_dim, int num_layers,
                                         std::uint64_t seed) {
  if (input_dim < 1 || embed_dim < 1 || num_layers < 0)
    throw SizeError("VisionEncoder: bad dimensions");
  VisionEncoder enc;
  enc.input_dim = input_dim;
  enc.embed_dim = embed_dim;
  enc.num_layers = num_layers;
  auto rng = make_rng(seed, 0x1517);
  enc.patch_embed = Mat::gaussian(rng, input_dim, embed_dim, 1.0 / std::sqrt(input_dim));
  double sigma = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  enc.cls_token = Mat::gaussian(rng, 1, embed_dim, sigma);
  for (int l = 0; l < num_layers; ++l) {
    Block blk;
    blk.w_q = Mat::gaussian(rng, embed_dim, embed_dim, sigma);
    blk.w_k = Mat::gaussian(rng, embed_dim, embed_dim, sigma);
    blk.w_v = Mat::gaussian(rng, embed_dim, embed_dim, sigma);
    blk.w_o = Mat::gaussian(rng, embed_dim, embed_dim, sigma);
    enc.layers.push_back(std::move(blk));
  }
  return enc;
}

std::uint64_t VisionEncoder::weights_checksum() const {
  std::uint64_t h = checksum(patch_embed);
  h = h * 1099511628211ULL ^ checksum(cls_token);
  for (const auto& blk : layers) {
    h = h * 1099511628211ULL ^ checksum(blk.w_q);
    h = h * 1099511628211ULL ^ checksum(blk.w_k);
    h = h * 1099511628211ULL ^ checksum(blk.w_v);
    h = h * 1099511628211ULL ^ checksum(blk.w_o);
  }
  return h;
}

Mat vv_attention_layer(const Mat& z_prev, const Mat& w_v, const Mat& w_o) {
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(z_prev.cols));
  Mat v = matmul(z_prev, w_v);
  Mat attn = softmax_rows(affine(matmul(v, transpose(v)), inv_sqrt_d, 0.0));
  return add(z_prev, matmul(matmul(attn, v), w_o));
}

Mat qk_attention_layer(const Mat& z_prev, const VisionEncoder::Block& blk) {
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(z_prev.cols));
  Mat q = matmul(z_prev, blk.w_q);
  Mat k = matmul(z_prev, blk.w_k);
  Mat v = matmul(z_prev, blk.w_v);
  Mat attn = softmax_rows(affine(matmul(q, transpose(k)), inv_sqrt_d, 0.0));
  return add(z_prev, matmul(matmul(attn, v), blk.w_o));
}

DualEncoding encode_image_dual(const VisionEncoder& enc, const Mat& patches) {
  if (patches.rows < 1) throw DegenerateInputError("encode_image_dual: image has no patches");
  if (patches.cols != enc.input_dim) throw DimensionError("encode_image_dual: patch width != input_dim");
  Mat z0 = vstack({enc.cls_token, matmul(patches, enc.patch_embed)});
  Mat z_ori = z0;
  Mat z_vv = z0;  // both streams start from the shared sequence
  for (const auto& blk : enc.layers) {
    z_ori = qk_attention_layer(z_ori, blk);
    z_vv = vv_attention_layer(z_vv, blk.w_v, blk.w_o);
  }
  DualEncoding out;
  out.z_global = l2norm_rows(slice_rows(z_ori, 0, 1));
  out.qk_patches = slice_rows(z_ori, 1, z_ori.rows);
  out.vv_patches = slice_rows(z_vv, 1, z_vv.rows);
  return out;
}

LocalProjection LocalProjection::identity_init(int dim) {
  LocalProjection proj;
  proj.weight = Mat::identity(dim);
  return proj;
}

Mat local_project(const LocalProjection& proj, const Mat& vv_patches) {
  Mat projected = proj.enabled ? matmul(vv_patches, proj.weight) : vv_patches;
  return proj.normalize ? l2norm_rows(projected) : projected;
}

}  // namespace sotglp
