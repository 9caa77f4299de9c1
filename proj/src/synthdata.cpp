#include "sotglp/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sotglp/rng.hpp"

namespace sotglp {

void EpisodeConfig::validate() const {
  if (classes < 1 || shots < 1 || test_shots < 0 || patches < 1 || input_dim < 1 || n_parts < 1)
    throw SizeError("EpisodeConfig: counts must be positive");
  if (patches < n_parts) throw SizeError("EpisodeConfig: need patches >= n_parts");
  if (noise_sigma < 0.0 || global_tint < 0.0) throw SizeError("EpisodeConfig: negative amplitude");
}

std::vector<int> Episode::train_labels() const {
  std::vector<int> out;
  out.reserve(train.size());
  for (const auto& im : train) out.push_back(im.label);
  return out;
}

std::vector<int> Episode::test_labels() const {
  std::vector<int> out;
  out.reserve(test.size());
  for (const auto& im : test) out.push_back(im.label);
  return out;
}

const char* OodPool::kind_name(OodKind k) {
  return k == OodKind::background ? "background" : "foreign";
}

namespace {

Mat unit_rows(std::mt19937_64& rng, int rows, int cols) {
  return l2norm_rows(Mat::gaussian(rng, rows, cols, 1.0));
}

// Background descriptor: isotropic noise with expected unit norm, plus the
// class context at tint amplitude when requested.
void fill_background(std::mt19937_64& rng, double* row, int d, const double* context, double tint) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int x = 0; x < d; ++x) {
    row[x] = gauss(rng) * scale;
    if (context) row[x] += tint * context[x];
  }
}

SynthImage make_image(std::mt19937_64& rng, const EpisodeConfig& cfg, const Mat& class_protos,
                      const double* context, int label, int max_planted) {
  SynthImage im;
  im.label = label;
  im.patches = Mat(cfg.patches, cfg.input_dim);
  im.planted.assign(cfg.patches, false);

  int n_protos = class_protos.rows;
  int cap = std::min(n_protos, max_planted);
  int count = cap == 0 ? 0 : std::uniform_int_distribution<int>(1, cap)(rng);

  // distinct prototypes and distinct positions for the planted patches
  std::vector<int> proto_order(n_protos);
  std::iota(proto_order.begin(), proto_order.end(), 0);
  std::shuffle(proto_order.begin(), proto_order.end(), rng);
  std::vector<int> pos_order(cfg.patches);
  std::iota(pos_order.begin(), pos_order.end(), 0);
  std::shuffle(pos_order.begin(), pos_order.end(), rng);

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < count; ++t) {
    int pos = pos_order[t];
    int proto = proto_order[t];
    im.planted[pos] = true;
    for (int x = 0; x < cfg.input_dim; ++x)
      im.patches.at(pos, x) = class_protos.at(proto, x) + cfg.noise_sigma * gauss(rng);
  }
  for (int p = 0; p < cfg.patches; ++p) {
    if (im.planted[p]) continue;
    fill_background(rng, &im.patches.at(p, 0), cfg.input_dim, context, cfg.global_tint);
  }
  return im;
}

}  // namespace

Episode gen_episode(const EpisodeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Episode ep;
  ep.cfg = cfg;
  ep.seed = seed;

  auto proto_rng = make_rng(seed, 0xDA7A);
  for (int c = 0; c < cfg.classes; ++c)
    ep.prototypes.push_back(unit_rows(proto_rng, cfg.n_parts, cfg.input_dim));
  ep.contexts = unit_rows(proto_rng, cfg.classes, cfg.input_dim);

  auto img_rng = make_rng(seed, 0x1A4E);
  for (int c = 0; c < cfg.classes; ++c)
    for (int s = 0; s < cfg.shots; ++s)
      ep.train.push_back(make_image(img_rng, cfg, ep.prototypes[c],
                                    cfg.global_tint > 0.0 ? &ep.contexts.at(c, 0) : nullptr, c,
                                    cfg.n_parts));
  for (int c = 0; c < cfg.classes; ++c)
    for (int s = 0; s < cfg.test_shots; ++s)
      ep.test.push_back(make_image(img_rng, cfg, ep.prototypes[c],
                                   cfg.global_tint > 0.0 ? &ep.contexts.at(c, 0) : nullptr, c,
                                   cfg.n_parts));
  return ep;
}

OodPool gen_ood_pool(const Episode& episode, int size, OodKind kind, std::uint64_t seed) {
  if (size < 1) throw SizeError("gen_ood_pool: size must be >= 1");
  const auto& cfg = episode.cfg;
  OodPool pool;
  pool.kind = kind;
  auto rng = make_rng(seed, kind == OodKind::background ? 0x00D1 : 0x00D2);

  EpisodeConfig ood_cfg = cfg;
  ood_cfg.global_tint = 0.0;  // no in-distribution context leaks into OOD images

  if (kind == OodKind::background) {
    Mat no_protos(0, cfg.input_dim);
    for (int i = 0; i < size; ++i) {
      SynthImage im;
      im.label = -1;
      im.patches = Mat(cfg.patches, cfg.input_dim);
      im.planted.assign(cfg.patches, false);
      for (int p = 0; p < cfg.patches; ++p)
        fill_background(rng, &im.patches.at(p, 0), cfg.input_dim, nullptr, 0.0);
      pool.images.push_back(std::move(im));
    }
    pool.foreign_prototypes = Mat(0, cfg.input_dim);
    return pool;
  }

  // Foreign prototypes: fresh unit vectors with cosine < 0.5 to every
  // episode prototype, by rejection.
  int n_foreign = std::max(4, 2 * cfg.n_parts);
  pool.foreign_prototypes = Mat(n_foreign, cfg.input_dim);
  for (int f = 0; f < n_foreign; ++f) {
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      Mat cand = unit_rows(rng, 1, cfg.input_dim);
      ok = true;
      for (const auto& protos : episode.prototypes) {
        for (int r = 0; r < protos.rows && ok; ++r) {
          double dot = 0.0;
          for (int x = 0; x < cfg.input_dim; ++x) dot += cand.at(0, x) * protos.at(r, x);
          if (dot >= 0.5) ok = false;
        }
        if (!ok) break;
      }
      if (ok)
        for (int x = 0; x < cfg.input_dim; ++x) pool.foreign_prototypes.at(f, x) = cand.at(0, x);
    }
    if (!ok)
      throw GenerationError("gen_ood_pool: could not draw a foreign prototype; input_dim too small");
  }

  // Planted density matches ID images: at most n_parts foreign copies.
  for (int i = 0; i < size; ++i)
    pool.images.push_back(make_image(rng, ood_cfg, pool.foreign_prototypes, nullptr, -1, cfg.n_parts));
  return pool;
}

}  // namespace sotglp
