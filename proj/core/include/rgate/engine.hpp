#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgate/cells.hpp"
#include "rgate/numkit.hpp"

namespace rgate {

enum class LossKind { PerStep, FinalStep };

/// Recurrent cell plus an affine output head mapping hidden -> class logits.
struct Model {
  CellConfig cfg;
  CellParams cell;
  Matrix w_out;  // classes x hidden
  Vec b_out;     // classes
  LossKind loss = LossKind::PerStep;

  std::size_t classes() const { return w_out.rows; }
};

Model init_model(const CellConfig& cfg, std::size_t classes, LossKind loss, Rng& rng);

/// Shape-mirror of every learnable parameter in a Model.
struct GradStore {
  CellParams cell;
  Matrix w_out;
  Vec b_out;

  void zero();
  void scale(double s);
  double global_norm() const;
};

GradStore zeros_like(const Model& m);

/// One training sequence: inputs per timestep, targets per timestep
/// (PerStep loss) or a single final target (FinalStep loss).
struct SeqSample {
  std::vector<Vec> inputs;
  std::vector<int> targets;
};

struct UnrollResult {
  std::vector<StepCache> caches;
  std::vector<Vec> logits;  // per timestep
};

/// Unrolls the cell from zero initial state and applies the head per step.
/// Reuses storage in `out` across calls.
void unroll_forward(const Model& m, const std::vector<Vec>& xs, UnrollResult& out);
UnrollResult unroll_forward(const Model& m, const std::vector<Vec>& xs);

/// Same, from an explicit initial state (truncated-BPTT replay).
void unroll_forward(const Model& m, const std::vector<Vec>& xs, const Vec& h0, const Vec& c0,
                    UnrollResult& out);

/// Accumulates exact gradients of sum_t <dlogits[t], logits[t]> into g.
void bptt_backward(const Model& m, const UnrollResult& fwd,
                   const std::vector<Vec>& dlogits, GradStore& g);

/// Numerically stabilized softmax cross-entropy. Returns the loss and fills
/// dlogits = softmax(logits) - onehot(target).
double softmax_xent(const Vec& logits, std::size_t target, Vec& dlogits);

/// Loss of one sample (mean over steps for PerStep, the single final-step
/// term otherwise). When g is nonnull, accumulates the matching gradients.
double sample_loss(const Model& m, const SeqSample& s, GradStore* g);

/// Mean loss over a batch; gradients averaged over members when g is nonnull.
double batch_loss(const Model& m, const std::vector<SeqSample>& batch, GradStore* g);

// -- parameter enumeration ---------------------------------------------------

struct ParamRef {
  std::string name;
  std::size_t rows;
  std::size_t cols;  // 1 for vectors
  Vec* values;
};

std::vector<ParamRef> param_refs(Model& m);
std::vector<ParamRef> param_refs(GradStore& g);

// -- optimizers ----------------------------------------------------------------

enum class OptKind { Sgd, Adam, AdaDelta };

struct OptimizerState {
  OptKind kind = OptKind::Sgd;
  double lr = 0.01;
  double beta1 = 0.9, beta2 = 0.999;  // Adam
  double rho = 0.95;                  // AdaDelta
  double eps = 1e-8;
  long step = 0;
  // accumulators aligned with param_refs order; lazily sized on first step
  std::vector<Vec> m1, m2;
};

OptimizerState make_sgd(double lr);
OptimizerState make_adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);
OptimizerState make_adadelta(double lr = 1.0, double rho = 0.95, double eps = 1e-6);

void optimizer_step(OptimizerState& s, Model& m, const GradStore& g);

/// If the global L2 norm exceeds max_norm, rescales g in place.
/// Returns the pre-clip norm.
double clip_global_norm(GradStore& g, double max_norm);

// -- gradient verification -----------------------------------------------------

/// Central finite differences of batch_loss over every scalar parameter.
GradStore finite_diff_grad(Model& m, const std::vector<SeqSample>& batch, double eps);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  double tol = 0.0;
  bool pass = false;
};

/// Compares analytic BPTT gradients against finite differences with
/// relative error |a-n| / max(|a|, |n|, 1e-8).
GradCheckReport gradient_check(Model& m, const std::vector<SeqSample>& batch, double tol,
                               double eps = 1e-5);

}  // namespace rgate
