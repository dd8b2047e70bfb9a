#pragma once

#include <functional>
#include <vector>

#include "rgate/engine.hpp"
#include "rgate/tasks.hpp"

namespace rgate {

struct TrainOptions {
  std::size_t batch_size = 32;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

/// One pass over the training set (seeded shuffle, mini-batch averaged
/// gradients, optional global-norm clipping). Returns the mean train loss.
double train_epoch(Model& m, OptimizerState& opt, const std::vector<SeqSample>& train,
                   const TrainOptions& topt, Rng& shuffle_rng);

/// Per-sequence exactness: a PerStep sample counts only if every timestep's
/// argmax matches; a FinalStep sample counts on the final argmax.
double sequence_accuracy(const Model& m, const std::vector<SeqSample>& samples);

double mean_loss(const Model& m, const std::vector<SeqSample>& samples);

// -- character language modeling ----------------------------------------------

/// One stateful pass over the index stream in unroll-length chunks with
/// truncated BPTT (state carries across chunks, gradients do not).
/// Returns the mean per-character cross-entropy (nats).
double charlm_train_epoch(Model& m, OptimizerState& opt, const std::vector<int>& stream,
                          std::size_t unroll, double clip_norm);

/// Mean bits per character of the model on a stream (stateful replay).
double charlm_bpc(const Model& m, const std::vector<int>& stream, std::size_t unroll);

}  // namespace rgate
