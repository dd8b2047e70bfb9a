#include "rgate/probe.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace rgate {

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::vector<GateTrace> record_gate_traces(const Model& m, const std::vector<Vec>& xs,
                                          bool aggregate_mean) {
  UnrollResult fwd;
  unroll_forward(m, xs, fwd);
  const std::size_t T = xs.size();
  const std::size_t h = m.cfg.hidden_size;
  const auto names = gate_names(m.cfg.arch);

  std::vector<GateTrace> out;
  for (std::size_t gi = 0; gi < names.size(); ++gi) {
    if (names[gi] == "candidate") continue;  // tanh, not a sigmoid gate
    if (aggregate_mean) {
      GateTrace tr;
      tr.gate = names[gi];
      tr.unit = 0;
      tr.sigma.resize(T);
      tr.refined.resize(T);
      tr.input.resize(T);
      for (std::size_t t = 0; t < T; ++t) {
        tr.sigma[t] = mean_of(fwd.caches[t].act[gi]);
        tr.refined[t] = mean_of(fwd.caches[t].gate[gi]);
        tr.input[t] = mean_of(fwd.caches[t].x);
      }
      out.push_back(std::move(tr));
    } else {
      for (std::size_t u = 0; u < h; ++u) {
        GateTrace tr;
        tr.gate = names[gi];
        tr.unit = u;
        tr.sigma.resize(T);
        tr.refined.resize(T);
        tr.input.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
          tr.sigma[t] = fwd.caches[t].act[gi][u];
          tr.refined[t] = fwd.caches[t].gate[gi][u];
          tr.input[t] = fwd.caches[t].x[u];
        }
        out.push_back(std::move(tr));
      }
    }
  }
  return out;
}

SeriesStats series_stats(const std::vector<double>& values, double eps) {
  if (values.empty()) throw DimError("series_stats: empty series");
  if (eps <= 0.0 || eps >= 0.5) throw DimError("series_stats: eps must be in (0, 0.5)");
  SeriesStats s;
  s.min = values[0];
  s.max = values[0];
  double sum = 0.0;
  std::size_t saturated = 0;
  for (double v : values) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    if (std::fabs(v) <= eps || std::fabs(v - 1.0) <= eps) ++saturated;
  }
  s.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  s.saturated_frac = static_cast<double>(saturated) / static_cast<double>(values.size());
  return s;
}

SaturationStats saturation_stats(const std::vector<GateTrace>& traces, double eps) {
  if (traces.empty()) throw DimError("saturation_stats: no traces");
  std::vector<double> sig, ref;
  for (const auto& tr : traces) {
    sig.insert(sig.end(), tr.sigma.begin(), tr.sigma.end());
    ref.insert(ref.end(), tr.refined.begin(), tr.refined.end());
  }
  SaturationStats out;
  out.sigma = series_stats(sig, eps);
  out.refined = series_stats(ref, eps);
  return out;
}

double carry_alignment(const GateTrace& trace, const AddingSample& sample) {
  const std::size_t T = trace.refined.size();
  if (T != sample.a_bits.size()) throw DimError("carry_alignment: trace/sample length mismatch");
  if (T < 2) return 0.0;
  const auto carries = carry_bits(sample.a_bits, sample.b_bits);

  // pair |g_t - g_{t-1}| with the carry arriving at step t
  std::vector<double> jump(T - 1);
  std::vector<double> ind(T - 1);
  for (std::size_t t = 1; t < T; ++t) {
    jump[t - 1] = std::fabs(trace.refined[t] - trace.refined[t - 1]);
    ind[t - 1] = static_cast<double>(carries[t]);
  }
  const double mj = mean_of(jump);
  const double mi = mean_of(ind);
  double cov = 0.0, vj = 0.0, vi = 0.0;
  for (std::size_t k = 0; k < jump.size(); ++k) {
    cov += (jump[k] - mj) * (ind[k] - mi);
    vj += (jump[k] - mj) * (jump[k] - mj);
    vi += (ind[k] - mi) * (ind[k] - mi);
  }
  if (vj == 0.0 || vi == 0.0) return 0.0;
  return cov / std::sqrt(vj * vi);
}

std::vector<double> state_grad_norm_series(const Model& m, const std::vector<Vec>& xs) {
  if (m.cfg.arch != Arch::Lstm)
    throw ConfigError("state_grad_norm_series requires an LSTM model");
  UnrollResult fwd;
  unroll_forward(m, xs, fwd);
  const std::size_t T = xs.size();
  const std::size_t h = m.cfg.hidden_size;
  constexpr std::size_t kForgetSlot = 0;

  std::vector<double> series(T, 0.0);
  Vec prod(h, 1.0);
  series[T - 1] = 1.0;  // empty product at t = T
  for (std::size_t t = T - 1; t-- > 0;) {
    const Vec& factor = fwd.caches[t + 1].gate[kForgetSlot];
    for (std::size_t i = 0; i < h; ++i) prod[i] *= factor[i];
    series[t] = max_abs(prod);
  }
  return series;
}

std::vector<double> counting_error_curve(const Model& m,
                                         const std::vector<CountingSample>& test_set,
                                         std::size_t len) {
  if (test_set.empty()) throw DimError("counting_error_curve: empty test set");
  std::vector<std::size_t> total(len + 1, 0), wrong(len + 1, 0);
  UnrollResult fwd;
  for (const auto& s : test_set) {
    const SeqSample enc = encode_counting(s, len);
    unroll_forward(m, enc.inputs, fwd);
    const Vec& logits = fwd.logits.back();
    std::size_t pred = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
      if (logits[k] > logits[pred]) pred = k;
    ++total[s.count];
    if (pred != s.count - 1) ++wrong[s.count];
  }
  std::vector<double> curve(len, 0.0);
  std::size_t cum_total = 0, cum_wrong = 0;
  for (std::size_t c = 1; c <= len; ++c) {
    cum_total += total[c];
    cum_wrong += wrong[c];
    curve[c - 1] = cum_total ? static_cast<double>(cum_wrong) / static_cast<double>(cum_total) : 0.0;
  }
  return curve;
}

void write_traces(const std::vector<GateTrace>& traces, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DimError("write_traces: cannot open " + path);
  for (const auto& tr : traces) {
    os << "#gate=" << tr.gate << " unit=" << tr.unit << '\n';
    for (std::size_t t = 0; t < tr.sigma.size(); ++t)
      os << t << '\t' << fmt17(tr.sigma[t]) << '\t' << fmt17(tr.refined[t]) << '\t'
         << fmt17(tr.input[t]) << '\n';
  }
}

void write_saturation_stats(const SaturationStats& stats, const std::string& label,
                            const std::string& path) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw DimError("write_saturation_stats: cannot open " + path);
  os << "label=" << label << " sigma_saturated=" << fmt17(stats.sigma.saturated_frac)
     << " sigma_mean=" << fmt17(stats.sigma.mean) << " sigma_std=" << fmt17(stats.sigma.stddev)
     << " sigma_min=" << fmt17(stats.sigma.min) << " sigma_max=" << fmt17(stats.sigma.max)
     << " refined_saturated=" << fmt17(stats.refined.saturated_frac)
     << " refined_mean=" << fmt17(stats.refined.mean)
     << " refined_std=" << fmt17(stats.refined.stddev)
     << " refined_min=" << fmt17(stats.refined.min)
     << " refined_max=" << fmt17(stats.refined.max) << '\n';
}

}  // namespace rgate
