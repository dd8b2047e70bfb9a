#pragma once

#include <string>
#include <vector>

#include "rgate/numkit.hpp"

namespace rgate {

enum class Arch { Lstm, Gru, Mgu };
enum class RefineMode { None, Add, Mul };

/// Elementwise shortcut from the cell input to a gate output:
///   g = sigma(ghat) <> x   with <> in {+, *}.
/// The result is boundless; no clamping anywhere.
Vec refine(const Vec& a, const Vec& x, RefineMode mode);

/// Reverse of refine. Returns (da, dx_direct):
///   Add:  da = dg, dx_direct = dg          (identity-mapping shortcut)
///   Mul:  da = dg .* x, dx_direct = dg .* a
///   None: da = dg, dx_direct = 0
void refine_backward(const Vec& dg, const Vec& a, const Vec& x, RefineMode mode,
                     Vec& da, Vec& dx_direct);

/// Which gates carry the refinement. Validity depends on the architecture:
/// LSTM may refine input/output, GRU the reset gate, MGU the forget gate.
/// Update (GRU) and forget (LSTM) requests exist only so they can be
/// rejected (or, for LSTM forget, enabled by the unsafe demo flag).
struct GateSelect {
  bool input = false;
  bool output = false;
  bool forget = false;
  bool reset = false;
  bool update = false;

  bool any() const { return input || output || forget || reset || update; }
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CellConfig {
  Arch arch = Arch::Lstm;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  RefineMode refine_mode = RefineMode::None;
  GateSelect refined_gates;
  /// Enables refining the LSTM forget gate, which explodes the memory-state
  /// gradient. Off everywhere except the explosion demonstration.
  bool unsafe_allow_forget_refine = false;
  bool forget_bias_one = false;

  /// The elementwise refinement requires the cell input to live in the
  /// hidden dimension; a learned affine projection is inserted whenever the
  /// raw input size differs.
  bool needs_projection() const { return input_size != hidden_size; }
};

/// Throws ConfigError for any illegal refinement request.
void validate(const CellConfig& cfg);

std::string arch_name(Arch a);
std::string refine_mode_name(RefineMode m);

/// One gate's weights: ghat = W x + U h_prev + b (candidate reuses the same
/// record; for GRU/MGU candidates U is applied to the reset product A).
struct GateParams {
  Matrix w;  // hidden x hidden (post-projection input)
  Matrix u;  // hidden x hidden
  Vec b;     // hidden
};

/// Gate order per architecture (candidate always last):
///   LSTM: forget, input, output, candidate
///   GRU:  update, reset, candidate
///   MGU:  forget, candidate
std::vector<std::string> gate_names(Arch a);

struct CellParams {
  std::vector<GateParams> gates;
  bool has_projection = false;
  Matrix w_in;  // hidden x input_size
  Vec b_in;     // hidden
};

CellParams init_params(const CellConfig& cfg, Rng& rng);
CellParams zeros_like(const CellParams& p);
void zero_params(CellParams& p);

/// Everything the analytic backward pass needs from one forward step.
struct StepCache {
  Vec x_raw;
  Vec x;       // post-projection cell input
  Vec h_prev;
  Vec c_prev;  // LSTM only
  std::vector<Vec> pre;     // per-gate pre-activations ghat (candidate slot too)
  std::vector<Vec> act;     // sigma(ghat); candidate slot holds phi value
  std::vector<Vec> gate;    // refined outputs g (equal to act where unrefined)
  Vec reset_prod;           // A = r' .* h_prev (GRU) or f' .* h_prev (MGU)
  Vec h;
  Vec c;  // LSTM only
};

/// Dispatching forward step. c_prev is ignored for GRU/MGU.
void step_forward(const CellParams& p, const CellConfig& cfg, const Vec& x_raw,
                  const Vec& h_prev, const Vec& c_prev, StepCache& cache);

struct StepGrads {
  Vec dx_raw;
  Vec dh_prev;
  Vec dc_prev;  // LSTM only
};

/// Exact reverse-mode step gradients. Parameter gradients accumulate into
/// `pgrad` (mirror of CellParams); state gradients overwrite `out`.
/// dc is ignored for GRU/MGU.
void step_backward(const CellConfig& cfg, const CellParams& p, const StepCache& cache,
                   const Vec& dh, const Vec& dc, CellParams& pgrad, StepGrads& out);

namespace detail {
/// Test hook: drops the refinement pass-through term (dx_direct) in
/// step_backward so gradient checking can prove the term is load-bearing.
extern bool drop_refine_passthrough;
}  // namespace detail

}  // namespace rgate
