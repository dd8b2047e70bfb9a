#include "rgate/cells.hpp"

#include <cmath>

namespace rgate {

namespace detail {
bool drop_refine_passthrough = false;
}

Vec refine(const Vec& a, const Vec& x, RefineMode mode) {
  if (a.size() != x.size()) throw DimError("refine: length mismatch");
  Vec out(a.size());
  switch (mode) {
    case RefineMode::None:
      out = a;
      break;
    case RefineMode::Add:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + x[i];
      break;
    case RefineMode::Mul:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * x[i];
      break;
  }
  return out;
}

void refine_backward(const Vec& dg, const Vec& a, const Vec& x, RefineMode mode,
                     Vec& da, Vec& dx_direct) {
  if (dg.size() != a.size() || a.size() != x.size())
    throw DimError("refine_backward: length mismatch");
  da.resize(dg.size());
  dx_direct.resize(dg.size());
  switch (mode) {
    case RefineMode::None:
      da = dg;
      fill(dx_direct, 0.0);
      break;
    case RefineMode::Add:
      da = dg;
      dx_direct = dg;
      break;
    case RefineMode::Mul:
      for (std::size_t i = 0; i < dg.size(); ++i) {
        da[i] = dg[i] * x[i];
        dx_direct[i] = dg[i] * a[i];
      }
      break;
  }
}

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::Lstm: return "lstm";
    case Arch::Gru: return "gru";
    case Arch::Mgu: return "mgu";
  }
  return "?";
}

std::string refine_mode_name(RefineMode m) {
  switch (m) {
    case RefineMode::None: return "none";
    case RefineMode::Add: return "add";
    case RefineMode::Mul: return "mul";
  }
  return "?";
}

std::vector<std::string> gate_names(Arch a) {
  switch (a) {
    case Arch::Lstm: return {"forget", "input", "output", "candidate"};
    case Arch::Gru: return {"update", "reset", "candidate"};
    case Arch::Mgu: return {"forget", "candidate"};
  }
  return {};
}

namespace {

// gate slots per architecture (candidate always last)
constexpr std::size_t kLstmF = 0, kLstmI = 1, kLstmO = 2, kLstmC = 3;
constexpr std::size_t kGruZ = 0, kGruR = 1, kGruC = 2;
constexpr std::size_t kMguF = 0, kMguC = 1;

void gate_preact(const GateParams& g, const Vec& x, const Vec& rec, Vec& out) {
  const std::size_t n = g.b.size();
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* wr = g.w.row(i);
    const double* ur = g.u.row(i);
    double acc = g.b[i];
    for (std::size_t j = 0; j < g.w.cols; ++j) acc += wr[j] * x[j];
    for (std::size_t j = 0; j < g.u.cols; ++j) acc += ur[j] * rec[j];
    out[i] = acc;
  }
}

// dpre flows into this gate's parameters and both operand paths
void gate_backprop(const GateParams& g, const Vec& dpre, const Vec& x, const Vec& rec,
                   GateParams& grad, Vec& dx, Vec& drec) {
  add_outer(grad.w, dpre, x);
  add_outer(grad.u, dpre, rec);
  add_inplace(grad.b, dpre);
  matvec_t_acc(g.w, dpre, dx);
  matvec_t_acc(g.u, dpre, drec);
}

void sigmoid_deriv_inplace(Vec& da, const Vec& act) {
  for (std::size_t i = 0; i < da.size(); ++i) da[i] *= act[i] * (1.0 - act[i]);
}

}  // namespace

void validate(const CellConfig& cfg) {
  if (cfg.input_size < 1 || cfg.hidden_size < 1)
    throw ConfigError("cell sizes must be >= 1");
  const bool refined = cfg.refine_mode != RefineMode::None;
  if (refined != cfg.refined_gates.any())
    throw ConfigError("refined gate subset must be nonempty exactly when a refine mode is set");
  const GateSelect& g = cfg.refined_gates;
  switch (cfg.arch) {
    case Arch::Lstm:
      if (g.reset || g.update) throw ConfigError("LSTM has no reset/update gate");
      if (g.forget && !cfg.unsafe_allow_forget_refine)
        throw ConfigError(
            "refining the LSTM forget gate explodes the memory-state gradient "
            "(product of boundless factors along the cell state path); rejected");
      break;
    case Arch::Gru:
      if (g.update)
        throw ConfigError(
            "refining the GRU update gate explodes the hidden-state gradient "
            "(boundless factors in the state interpolation); rejected");
      if (g.input || g.output || g.forget) throw ConfigError("GRU refines only the reset gate");
      break;
    case Arch::Mgu:
      if (g.input || g.output || g.reset || g.update)
        throw ConfigError("MGU refines only the forget gate (reset-product use only)");
      break;
  }
}

CellParams init_params(const CellConfig& cfg, Rng& rng) {
  validate(cfg);
  CellParams p;
  p.has_projection = cfg.needs_projection();
  const std::size_t h = cfg.hidden_size;
  if (p.has_projection) {
    p.w_in = init_xavier(h, cfg.input_size, rng);
    p.b_in.assign(h, 0.0);
  }
  const auto names = gate_names(cfg.arch);
  p.gates.resize(names.size());
  for (std::size_t gi = 0; gi < names.size(); ++gi) {
    p.gates[gi].w = init_xavier(h, h, rng);
    p.gates[gi].u = init_xavier(h, h, rng);
    p.gates[gi].b.assign(h, 0.0);
    if (cfg.forget_bias_one && names[gi] == "forget") fill(p.gates[gi].b, 1.0);
  }
  return p;
}

CellParams zeros_like(const CellParams& p) {
  CellParams z;
  z.has_projection = p.has_projection;
  if (p.has_projection) {
    z.w_in = Matrix(p.w_in.rows, p.w_in.cols);
    z.b_in.assign(p.b_in.size(), 0.0);
  }
  z.gates.resize(p.gates.size());
  for (std::size_t i = 0; i < p.gates.size(); ++i) {
    z.gates[i].w = Matrix(p.gates[i].w.rows, p.gates[i].w.cols);
    z.gates[i].u = Matrix(p.gates[i].u.rows, p.gates[i].u.cols);
    z.gates[i].b.assign(p.gates[i].b.size(), 0.0);
  }
  return z;
}

void zero_params(CellParams& p) {
  if (p.has_projection) {
    fill(p.w_in.data, 0.0);
    fill(p.b_in, 0.0);
  }
  for (auto& g : p.gates) {
    fill(g.w.data, 0.0);
    fill(g.u.data, 0.0);
    fill(g.b, 0.0);
  }
}

void step_forward(const CellParams& p, const CellConfig& cfg, const Vec& x_raw,
                  const Vec& h_prev, const Vec& c_prev, StepCache& cache) {
  if (x_raw.size() != cfg.input_size) throw DimError("step_forward: input size mismatch");
  if (h_prev.size() != cfg.hidden_size) throw DimError("step_forward: hidden size mismatch");
  const std::size_t h = cfg.hidden_size;
  const RefineMode mode = cfg.refine_mode;
  const GateSelect& sel = cfg.refined_gates;

  cache.x_raw = x_raw;
  cache.h_prev = h_prev;
  if (p.has_projection) {
    matvec(p.w_in, x_raw, cache.x);
    add_inplace(cache.x, p.b_in);
  } else {
    cache.x = x_raw;
  }
  const Vec& x = cache.x;

  const std::size_t ngates = p.gates.size();
  cache.pre.resize(ngates);
  cache.act.resize(ngates);
  cache.gate.resize(ngates);

  switch (cfg.arch) {
    case Arch::Lstm: {
      if (c_prev.size() != h) throw DimError("step_forward: cell size mismatch");
      cache.c_prev = c_prev;
      for (std::size_t gi : {kLstmF, kLstmI, kLstmO}) {
        gate_preact(p.gates[gi], x, h_prev, cache.pre[gi]);
        sigmoid(cache.pre[gi], cache.act[gi]);
      }
      gate_preact(p.gates[kLstmC], x, h_prev, cache.pre[kLstmC]);
      tanh_act(cache.pre[kLstmC], cache.act[kLstmC]);

      cache.gate[kLstmF] =
          refine(cache.act[kLstmF], x, (sel.forget && cfg.unsafe_allow_forget_refine) ? mode : RefineMode::None);
      cache.gate[kLstmI] = refine(cache.act[kLstmI], x, sel.input ? mode : RefineMode::None);
      cache.gate[kLstmO] = refine(cache.act[kLstmO], x, sel.output ? mode : RefineMode::None);
      cache.gate[kLstmC] = cache.act[kLstmC];

      cache.c.resize(h);
      cache.h.resize(h);
      for (std::size_t i = 0; i < h; ++i) {
        cache.c[i] = cache.gate[kLstmF][i] * c_prev[i] + cache.gate[kLstmI][i] * cache.act[kLstmC][i];
        cache.h[i] = cache.gate[kLstmO][i] * std::tanh(cache.c[i]);
      }
      break;
    }
    case Arch::Gru: {
      gate_preact(p.gates[kGruZ], x, h_prev, cache.pre[kGruZ]);
      sigmoid(cache.pre[kGruZ], cache.act[kGruZ]);
      cache.gate[kGruZ] = cache.act[kGruZ];  // update gate is never refined

      gate_preact(p.gates[kGruR], x, h_prev, cache.pre[kGruR]);
      sigmoid(cache.pre[kGruR], cache.act[kGruR]);
      cache.gate[kGruR] = refine(cache.act[kGruR], x, sel.reset ? mode : RefineMode::None);

      cache.reset_prod = hadamard(cache.gate[kGruR], h_prev);
      gate_preact(p.gates[kGruC], x, cache.reset_prod, cache.pre[kGruC]);
      tanh_act(cache.pre[kGruC], cache.act[kGruC]);
      cache.gate[kGruC] = cache.act[kGruC];

      cache.h.resize(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double z = cache.gate[kGruZ][i];
        cache.h[i] = z * h_prev[i] + (1.0 - z) * cache.act[kGruC][i];
      }
      break;
    }
    case Arch::Mgu: {
      gate_preact(p.gates[kMguF], x, h_prev, cache.pre[kMguF]);
      sigmoid(cache.pre[kMguF], cache.act[kMguF]);
      cache.gate[kMguF] = refine(cache.act[kMguF], x, sel.forget ? mode : RefineMode::None);

      cache.reset_prod = hadamard(cache.gate[kMguF], h_prev);
      gate_preact(p.gates[kMguC], x, cache.reset_prod, cache.pre[kMguC]);
      tanh_act(cache.pre[kMguC], cache.act[kMguC]);
      cache.gate[kMguC] = cache.act[kMguC];

      // the state interpolation always uses the unrefined sigmoid output
      cache.h.resize(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double f = cache.act[kMguF][i];
        cache.h[i] = (1.0 - f) * h_prev[i] + f * cache.act[kMguC][i];
      }
      break;
    }
  }
}

void step_backward(const CellConfig& cfg, const CellParams& p, const StepCache& cache,
                   const Vec& dh, const Vec& dc, CellParams& pgrad, StepGrads& out) {
  const std::size_t h = cfg.hidden_size;
  if (dh.size() != h) throw DimError("step_backward: dh size mismatch");
  const RefineMode mode = cfg.refine_mode;
  const GateSelect& sel = cfg.refined_gates;
  const Vec& x = cache.x;

  Vec dx(h, 0.0);
  out.dh_prev.assign(h, 0.0);

  Vec da, dxdir, dgate;

  auto backprop_sigmoid_gate = [&](std::size_t gi, const Vec& dg, RefineMode gmode, const Vec& rec) {
    refine_backward(dg, cache.act[gi], x, gmode, da, dxdir);
    sigmoid_deriv_inplace(da, cache.act[gi]);
    gate_backprop(p.gates[gi], da, x, rec, pgrad.gates[gi], dx, out.dh_prev);
    if (!detail::drop_refine_passthrough) add_inplace(dx, dxdir);
  };

  switch (cfg.arch) {
    case Arch::Lstm: {
      if (dc.size() != h) throw DimError("step_backward: dc size mismatch");
      Vec dct(h), dgo(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double tc = std::tanh(cache.c[i]);
        dgo[i] = dh[i] * tc;
        dct[i] = dc[i] + dh[i] * cache.gate[kLstmO][i] * (1.0 - tc * tc);
      }
      Vec dgf(h), dgi(h), dcand(h);
      out.dc_prev.resize(h);
      for (std::size_t i = 0; i < h; ++i) {
        dgf[i] = dct[i] * cache.c_prev[i];
        dgi[i] = dct[i] * cache.act[kLstmC][i];
        dcand[i] = dct[i] * cache.gate[kLstmI][i];
        out.dc_prev[i] = dct[i] * cache.gate[kLstmF][i];
      }
      backprop_sigmoid_gate(kLstmF, dgf,
                            (sel.forget && cfg.unsafe_allow_forget_refine) ? mode : RefineMode::None,
                            cache.h_prev);
      backprop_sigmoid_gate(kLstmI, dgi, sel.input ? mode : RefineMode::None, cache.h_prev);
      backprop_sigmoid_gate(kLstmO, dgo, sel.output ? mode : RefineMode::None, cache.h_prev);
      // candidate (tanh)
      Vec dpre(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double t = cache.act[kLstmC][i];
        dpre[i] = dcand[i] * (1.0 - t * t);
      }
      gate_backprop(p.gates[kLstmC], dpre, x, cache.h_prev, pgrad.gates[kLstmC], dx, out.dh_prev);
      break;
    }
    case Arch::Gru: {
      Vec dz(h), dcand(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double z = cache.gate[kGruZ][i];
        dz[i] = dh[i] * (cache.h_prev[i] - cache.act[kGruC][i]);
        dcand[i] = dh[i] * (1.0 - z);
        out.dh_prev[i] += dh[i] * z;
      }
      Vec dpre(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double t = cache.act[kGruC][i];
        dpre[i] = dcand[i] * (1.0 - t * t);
      }
      Vec dA(h, 0.0);
      add_outer(pgrad.gates[kGruC].w, dpre, x);
      add_outer(pgrad.gates[kGruC].u, dpre, cache.reset_prod);
      add_inplace(pgrad.gates[kGruC].b, dpre);
      matvec_t_acc(p.gates[kGruC].w, dpre, dx);
      matvec_t_acc(p.gates[kGruC].u, dpre, dA);

      Vec dgr(h);
      for (std::size_t i = 0; i < h; ++i) {
        dgr[i] = dA[i] * cache.h_prev[i];
        out.dh_prev[i] += dA[i] * cache.gate[kGruR][i];
      }
      backprop_sigmoid_gate(kGruR, dgr, sel.reset ? mode : RefineMode::None, cache.h_prev);
      backprop_sigmoid_gate(kGruZ, dz, RefineMode::None, cache.h_prev);
      break;
    }
    case Arch::Mgu: {
      Vec dcand(h), df_interp(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double f = cache.act[kMguF][i];
        df_interp[i] = dh[i] * (cache.act[kMguC][i] - cache.h_prev[i]);
        dcand[i] = dh[i] * f;
        out.dh_prev[i] += dh[i] * (1.0 - f);
      }
      Vec dpre(h);
      for (std::size_t i = 0; i < h; ++i) {
        const double t = cache.act[kMguC][i];
        dpre[i] = dcand[i] * (1.0 - t * t);
      }
      Vec dA(h, 0.0);
      add_outer(pgrad.gates[kMguC].w, dpre, x);
      add_outer(pgrad.gates[kMguC].u, dpre, cache.reset_prod);
      add_inplace(pgrad.gates[kMguC].b, dpre);
      matvec_t_acc(p.gates[kMguC].w, dpre, dx);
      matvec_t_acc(p.gates[kMguC].u, dpre, dA);

      Vec dgf(h);
      for (std::size_t i = 0; i < h; ++i) {
        dgf[i] = dA[i] * cache.h_prev[i];
        out.dh_prev[i] += dA[i] * cache.gate[kMguF][i];
      }
      // the forget sigmoid feeds both the refined reset product and the
      // unrefined state interpolation
      refine_backward(dgf, cache.act[kMguF], x, sel.forget ? mode : RefineMode::None, da, dxdir);
      add_inplace(da, df_interp);
      sigmoid_deriv_inplace(da, cache.act[kMguF]);
      gate_backprop(p.gates[kMguF], da, x, cache.h_prev, pgrad.gates[kMguF], dx, out.dh_prev);
      if (!detail::drop_refine_passthrough) add_inplace(dx, dxdir);
      break;
    }
  }

  if (p.has_projection) {
    out.dx_raw.assign(cfg.input_size, 0.0);
    matvec_t_acc(p.w_in, dx, out.dx_raw);
    add_outer(pgrad.w_in, dx, cache.x_raw);
    add_inplace(pgrad.b_in, dx);
  } else {
    out.dx_raw = dx;
  }
}

}  // namespace rgate
