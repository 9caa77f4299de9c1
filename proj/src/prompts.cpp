#include "sotglp/prompts.hpp"

#include "sotglp/rng.hpp"

namespace sotglp {

std::uint64_t PromptBank::state_checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : global) h = h * 1099511628211ULL ^ checksum(p);
  for (const auto& pool : local)
    for (const auto& p : pool) h = h * 1099511628211ULL ^ checksum(p);
  return h;
}

PromptBank init_prompt_bank(const TextEncoder& enc, int num_classes, int n_global, int n_local,
                            int length, double init_noise, bool shared_local, std::uint64_t seed) {
  if (num_classes < 1 || n_global < 1 || n_local < 1 || length < 1)
    throw SizeError("init_prompt_bank: all counts must be >= 1");
  PromptBank bank;
  bank.num_classes = num_classes;
  bank.n_global = n_global;
  bank.n_local = n_local;
  bank.length = length;
  bank.dim = enc.embed_dim;
  bank.shared_local = shared_local;

  Mat base(length, enc.embed_dim);
  for (int m = 0; m < length; ++m) {
    Mat row = enc.template_token(m);
    for (int j = 0; j < enc.embed_dim; ++j) base.at(m, j) = row.at(0, j);
  }

  auto rng = make_rng(seed, 0xB04F);
  auto perturbed = [&]() {
    Mat noise = Mat::gaussian(rng, length, enc.embed_dim, init_noise);
    return add(base, noise);
  };
  for (int m = 0; m < n_global; ++m) bank.global.push_back(perturbed());
  int pools = shared_local ? 1 : num_classes;
  bank.local.resize(pools);
  for (int c = 0; c < pools; ++c)
    for (int j = 0; j < n_local; ++j) bank.local[c].push_back(perturbed());
  return bank;
}

BankView BankView::track(const PromptBank& bank, Tape& tape) {
  BankView view;
  view.shared_local = bank.shared_local;
  for (const auto& p : bank.global) view.global.push_back(tape.leaf(p));
  view.local.resize(bank.local.size());
  for (size_t c = 0; c < bank.local.size(); ++c)
    for (const auto& p : bank.local[c]) view.local[c].push_back(tape.leaf(p));
  return view;
}

BankView BankView::values(const PromptBank& bank) {
  BankView view;
  view.shared_local = bank.shared_local;
  view.global = bank.global;
  view.local = bank.local;
  return view;
}

PromptEmbeddings embed_class_prompts(const BankView& bank, const TextEncoder& enc, int class_id) {
  PromptEmbeddings out;
  std::vector<Mat> grows, lrows;
  for (const auto& p : bank.global) grows.push_back(encode_text(enc, p, class_id));
  int pool = bank.shared_local ? 0 : class_id;
  for (const auto& p : bank.local[pool]) lrows.push_back(encode_text(enc, p, class_id));
  out.global_emb = vstack(grows);
  out.local_emb = vstack(lrows);
  return out;
}

std::vector<int> sample_prompt_dropout(int n_global, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("sample_prompt_dropout: rate must be in [0, 1)");
  std::vector<int> active;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int m = 0; m < n_global; ++m)
    if (unif(rng) >= rate) active.push_back(m);
  if (active.empty()) {
    std::uniform_int_distribution<int> pick(0, n_global - 1);
    active.push_back(pick(rng));
  }
  return active;
}

}  // namespace sotglp
