#pragma once

#include <string>
#include <vector>

#include "rgate/engine.hpp"
#include "rgate/tasks.hpp"

namespace rgate {

/// Per-timestep gate behaviour along one sequence: the sigmoid output, the
/// refined output (equal where unrefined) and the cell input entry.
struct GateTrace {
  std::string gate;
  std::size_t unit = 0;
  std::vector<double> sigma;    // sigma(ghat_t)
  std::vector<double> refined;  // g_t
  std::vector<double> input;    // x_t (post-projection)
};

/// One trace per sigmoid gate per hidden unit; with aggregate_mean, one
/// trace per gate holding per-timestep means across units.
std::vector<GateTrace> record_gate_traces(const Model& m, const std::vector<Vec>& xs,
                                          bool aggregate_mean = false);

struct SeriesStats {
  double saturated_frac = 0.0;  // within eps of {0, 1}
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Pooled over all timesteps/units, separately for the sigmoid series and
/// the refined series.
struct SaturationStats {
  SeriesStats sigma;
  SeriesStats refined;
};

SeriesStats series_stats(const std::vector<double>& values, double eps);
SaturationStats saturation_stats(const std::vector<GateTrace>& traces, double eps = 0.01);

/// Point-biserial correlation between |g_t - g_{t-1}| and the carry
/// indicator of the adding sample. 0 for degenerate (constant) traces.
double carry_alignment(const GateTrace& trace, const AddingSample& sample);

/// Per-t infinity norm of d c_T / d c_t along one LSTM sequence, computed
/// as the elementwise running product of the (refined) forget factors.
/// Entry at t = T is 1 (empty product).
std::vector<double> state_grad_norm_series(const Model& m, const std::vector<Vec>& xs);

/// Accumulative error rate per count value c: misclassified fraction among
/// test samples with label <= c.
std::vector<double> counting_error_curve(const Model& m,
                                         const std::vector<CountingSample>& test_set,
                                         std::size_t len);

/// Tab-separated export: `#gate=<name> unit=<i>` header, then `t sigma g x`.
void write_traces(const std::vector<GateTrace>& traces, const std::string& path);

/// Single-line key=value stats record.
void write_saturation_stats(const SaturationStats& stats, const std::string& label,
                            const std::string& path);

}  // namespace rgate
