#include "rgate/trainer.hpp"

#include <cmath>
#include <numeric>

namespace rgate {

double train_epoch(Model& m, OptimizerState& opt, const std::vector<SeqSample>& train,
                   const TrainOptions& topt, Rng& shuffle_rng) {
  if (train.empty()) throw DimError("train_epoch: empty training set");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i-- > 1;)
    std::swap(order[i], order[shuffle_rng.next_below(i + 1)]);

  GradStore grads = zeros_like(m);
  double total = 0.0;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const std::size_t bsz = std::min(topt.batch_size, order.size() - pos);
    grads.zero();
    double batch_total = 0.0;
    for (std::size_t k = 0; k < bsz; ++k)
      batch_total += sample_loss(m, train[order[pos + k]], &grads);
    grads.scale(1.0 / static_cast<double>(bsz));
    if (topt.clip_norm > 0.0) clip_global_norm(grads, topt.clip_norm);
    optimizer_step(opt, m, grads);
    total += batch_total;
    pos += bsz;
  }
  return total / static_cast<double>(train.size());
}

double sequence_accuracy(const Model& m, const std::vector<SeqSample>& samples) {
  if (samples.empty()) throw DimError("sequence_accuracy: empty set");
  UnrollResult fwd;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    unroll_forward(m, s.inputs, fwd);
    bool ok = true;
    if (m.loss == LossKind::PerStep) {
      for (std::size_t t = 0; t < s.inputs.size() && ok; ++t) {
        const Vec& lg = fwd.logits[t];
        std::size_t pred = 0;
        for (std::size_t k = 1; k < lg.size(); ++k)
          if (lg[k] > lg[pred]) pred = k;
        ok = pred == static_cast<std::size_t>(s.targets[t]);
      }
    } else {
      const Vec& lg = fwd.logits.back();
      std::size_t pred = 0;
      for (std::size_t k = 1; k < lg.size(); ++k)
        if (lg[k] > lg[pred]) pred = k;
      ok = pred == static_cast<std::size_t>(s.targets[0]);
    }
    if (ok) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double mean_loss(const Model& m, const std::vector<SeqSample>& samples) {
  double total = 0.0;
  for (const auto& s : samples) total += sample_loss(m, s, nullptr);
  return total / static_cast<double>(samples.size());
}

namespace {

void one_hot(std::size_t idx, std::size_t vocab, Vec& out) {
  out.assign(vocab, 0.0);
  out[idx] = 1.0;
}

}  // namespace

double charlm_train_epoch(Model& m, OptimizerState& opt, const std::vector<int>& stream,
                          std::size_t unroll, double clip_norm) {
  const std::size_t vocab = m.cfg.input_size;
  if (stream.size() < unroll + 1) throw DimError("charlm_train_epoch: stream too short");
  const std::size_t h = m.cfg.hidden_size;

  Vec hstate(h, 0.0), cstate(h, 0.0);
  std::vector<Vec> xs(unroll);
  std::vector<Vec> dlogits(unroll);
  UnrollResult fwd;
  GradStore grads = zeros_like(m);

  double total = 0.0;
  std::size_t chars = 0;
  for (std::size_t start = 0; start + unroll < stream.size(); start += unroll) {
    for (std::size_t t = 0; t < unroll; ++t)
      one_hot(static_cast<std::size_t>(stream[start + t]), vocab, xs[t]);
    unroll_forward(m, xs, hstate, cstate, fwd);

    double chunk_loss = 0.0;
    for (std::size_t t = 0; t < unroll; ++t)
      chunk_loss += softmax_xent(fwd.logits[t],
                                 static_cast<std::size_t>(stream[start + t + 1]), dlogits[t]);
    const double inv = 1.0 / static_cast<double>(unroll);
    for (auto& d : dlogits) scale_inplace(d, inv);

    grads.zero();
    bptt_backward(m, fwd, dlogits, grads);
    if (clip_norm > 0.0) clip_global_norm(grads, clip_norm);

    // carry the state across the truncation boundary before the update
    hstate = fwd.caches.back().h;
    if (m.cfg.arch == Arch::Lstm) cstate = fwd.caches.back().c;

    optimizer_step(opt, m, grads);
    total += chunk_loss;
    chars += unroll;
  }
  return total / static_cast<double>(chars);
}

double charlm_bpc(const Model& m, const std::vector<int>& stream, std::size_t unroll) {
  const std::size_t vocab = m.cfg.input_size;
  if (stream.size() < unroll + 1) throw DimError("charlm_bpc: stream too short");
  const std::size_t h = m.cfg.hidden_size;

  Vec hstate(h, 0.0), cstate(h, 0.0);
  std::vector<Vec> xs(unroll);
  Vec scratch;
  UnrollResult fwd;

  double total = 0.0;
  std::size_t chars = 0;
  for (std::size_t start = 0; start + unroll < stream.size(); start += unroll) {
    for (std::size_t t = 0; t < unroll; ++t)
      one_hot(static_cast<std::size_t>(stream[start + t]), vocab, xs[t]);
    unroll_forward(m, xs, hstate, cstate, fwd);
    for (std::size_t t = 0; t < unroll; ++t)
      total += softmax_xent(fwd.logits[t], static_cast<std::size_t>(stream[start + t + 1]),
                            scratch);
    hstate = fwd.caches.back().h;
    if (m.cfg.arch == Arch::Lstm) cstate = fwd.caches.back().c;
    chars += unroll;
  }
  return total / static_cast<double>(chars) / std::log(2.0);
}

}  // namespace rgate
