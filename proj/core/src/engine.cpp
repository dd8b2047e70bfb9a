#include "rgate/engine.hpp"

#include <cmath>

namespace rgate {

Model init_model(const CellConfig& cfg, std::size_t classes, LossKind loss, Rng& rng) {
  validate(cfg);
  Model m;
  m.cfg = cfg;
  m.cell = init_params(cfg, rng);
  m.w_out = init_xavier(classes, cfg.hidden_size, rng);
  m.b_out.assign(classes, 0.0);
  m.loss = loss;
  return m;
}

void GradStore::zero() {
  zero_params(cell);
  fill(w_out.data, 0.0);
  fill(b_out, 0.0);
}

void GradStore::scale(double s) {
  if (cell.has_projection) {
    scale_inplace(cell.w_in.data, s);
    scale_inplace(cell.b_in, s);
  }
  for (auto& g : cell.gates) {
    scale_inplace(g.w.data, s);
    scale_inplace(g.u.data, s);
    scale_inplace(g.b, s);
  }
  scale_inplace(w_out.data, s);
  scale_inplace(b_out, s);
}

double GradStore::global_norm() const {
  double acc = 0.0;
  auto sq = [&](const Vec& v) {
    for (double e : v) acc += e * e;
  };
  if (cell.has_projection) {
    sq(cell.w_in.data);
    sq(cell.b_in);
  }
  for (const auto& g : cell.gates) {
    sq(g.w.data);
    sq(g.u.data);
    sq(g.b);
  }
  sq(w_out.data);
  sq(b_out);
  return std::sqrt(acc);
}

GradStore zeros_like(const Model& m) {
  GradStore g;
  g.cell = zeros_like(m.cell);
  g.w_out = Matrix(m.w_out.rows, m.w_out.cols);
  g.b_out.assign(m.b_out.size(), 0.0);
  return g;
}

void unroll_forward(const Model& m, const std::vector<Vec>& xs, UnrollResult& out) {
  const Vec h0(m.cfg.hidden_size, 0.0);
  const Vec c0(m.cfg.hidden_size, 0.0);
  unroll_forward(m, xs, h0, c0, out);
}

void unroll_forward(const Model& m, const std::vector<Vec>& xs, const Vec& h0, const Vec& c0,
                    UnrollResult& out) {
  if (xs.empty()) throw DimError("unroll_forward: empty sequence");
  const std::size_t T = xs.size();
  out.caches.resize(T);
  out.logits.resize(T);
  const Vec* hp = &h0;
  const Vec* cp = &c0;
  for (std::size_t t = 0; t < T; ++t) {
    step_forward(m.cell, m.cfg, xs[t], *hp, *cp, out.caches[t]);
    matvec(m.w_out, out.caches[t].h, out.logits[t]);
    add_inplace(out.logits[t], m.b_out);
    hp = &out.caches[t].h;
    cp = &out.caches[t].c;
  }
}

UnrollResult unroll_forward(const Model& m, const std::vector<Vec>& xs) {
  UnrollResult out;
  unroll_forward(m, xs, out);
  return out;
}

void bptt_backward(const Model& m, const UnrollResult& fwd,
                   const std::vector<Vec>& dlogits, GradStore& g) {
  const std::size_t T = fwd.caches.size();
  if (dlogits.size() != T) throw DimError("bptt_backward: dlogits/caches mismatch");
  const std::size_t h = m.cfg.hidden_size;
  Vec dh(h, 0.0), dc(h, 0.0);
  StepGrads sg;
  for (std::size_t ti = T; ti-- > 0;) {
    // head contribution at this step
    add_outer(g.w_out, dlogits[ti], fwd.caches[ti].h);
    add_inplace(g.b_out, dlogits[ti]);
    matvec_t_acc(m.w_out, dlogits[ti], dh);

    step_backward(m.cfg, m.cell, fwd.caches[ti], dh, dc, g.cell, sg);
    dh = sg.dh_prev;
    if (m.cfg.arch == Arch::Lstm) dc = sg.dc_prev;
  }
}

double softmax_xent(const Vec& logits, std::size_t target, Vec& dlogits) {
  if (target >= logits.size()) throw DimError("softmax_xent: target out of range");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  dlogits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    dlogits[i] = std::exp(logits[i] - mx);
    sum += dlogits[i];
  }
  const double loss = std::log(sum) - (logits[target] - mx);
  const double inv = 1.0 / sum;
  for (double& v : dlogits) v *= inv;
  dlogits[target] -= 1.0;
  return loss;
}

double sample_loss(const Model& m, const SeqSample& s, GradStore* g) {
  UnrollResult fwd;
  unroll_forward(m, s.inputs, fwd);
  const std::size_t T = s.inputs.size();
  std::vector<Vec> dlogits(T, Vec(m.classes(), 0.0));
  double loss = 0.0;
  if (m.loss == LossKind::PerStep) {
    if (s.targets.size() != T) throw DimError("sample_loss: per-step target count mismatch");
    for (std::size_t t = 0; t < T; ++t)
      loss += softmax_xent(fwd.logits[t], static_cast<std::size_t>(s.targets[t]), dlogits[t]);
    loss /= static_cast<double>(T);
    const double w = 1.0 / static_cast<double>(T);
    for (auto& d : dlogits) scale_inplace(d, w);
  } else {
    if (s.targets.size() != 1) throw DimError("sample_loss: final-step loss expects one target");
    loss = softmax_xent(fwd.logits[T - 1], static_cast<std::size_t>(s.targets[0]), dlogits[T - 1]);
  }
  if (g) bptt_backward(m, fwd, dlogits, *g);
  return loss;
}

double batch_loss(const Model& m, const std::vector<SeqSample>& batch, GradStore* g) {
  if (batch.empty()) throw DimError("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& s : batch) total += sample_loss(m, s, g);
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (g) g->scale(inv);
  return total * inv;
}

namespace {

std::vector<ParamRef> refs_impl(CellParams& cell, Matrix& w_out, Vec& b_out) {
  std::vector<ParamRef> out;
  if (cell.has_projection) {
    out.push_back({"cell.w_in", cell.w_in.rows, cell.w_in.cols, &cell.w_in.data});
    out.push_back({"cell.b_in", cell.b_in.size(), 1, &cell.b_in});
  }
  // gate slot order matches gate_names(arch); names resolved by position
  for (std::size_t i = 0; i < cell.gates.size(); ++i) {
    const std::string base = "cell.gate" + std::to_string(i);
    out.push_back({base + ".w", cell.gates[i].w.rows, cell.gates[i].w.cols, &cell.gates[i].w.data});
    out.push_back({base + ".u", cell.gates[i].u.rows, cell.gates[i].u.cols, &cell.gates[i].u.data});
    out.push_back({base + ".b", cell.gates[i].b.size(), 1, &cell.gates[i].b});
  }
  out.push_back({"head.w", w_out.rows, w_out.cols, &w_out.data});
  out.push_back({"head.b", b_out.size(), 1, &b_out});
  return out;
}

}  // namespace

std::vector<ParamRef> param_refs(Model& m) {
  auto out = refs_impl(m.cell, m.w_out, m.b_out);
  // prettier gate names for reporting
  const auto names = gate_names(m.cfg.arch);
  std::size_t gi = 0;
  for (auto& r : out) {
    if (r.name.rfind("cell.gate", 0) == 0) {
      const std::size_t idx = gi / 3;
      const char* suffix[] = {".w", ".u", ".b"};
      r.name = "cell." + names[idx] + suffix[gi % 3];
      ++gi;
    }
  }
  return out;
}

std::vector<ParamRef> param_refs(GradStore& g) {
  return refs_impl(g.cell, g.w_out, g.b_out);
}

OptimizerState make_sgd(double lr) {
  OptimizerState s;
  s.kind = OptKind::Sgd;
  s.lr = lr;
  return s;
}

OptimizerState make_adam(double lr, double beta1, double beta2, double eps) {
  OptimizerState s;
  s.kind = OptKind::Adam;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

OptimizerState make_adadelta(double lr, double rho, double eps) {
  OptimizerState s;
  s.kind = OptKind::AdaDelta;
  s.lr = lr;
  s.rho = rho;
  s.eps = eps;
  return s;
}

void optimizer_step(OptimizerState& s, Model& m, const GradStore& g) {
  auto prefs = param_refs(m);
  auto grefs = param_refs(const_cast<GradStore&>(g));
  if (prefs.size() != grefs.size()) throw DimError("optimizer_step: model/grad mismatch");

  if (s.kind != OptKind::Sgd && s.m1.size() != prefs.size()) {
    s.m1.assign(prefs.size(), {});
    s.m2.assign(prefs.size(), {});
    for (std::size_t i = 0; i < prefs.size(); ++i) {
      s.m1[i].assign(prefs[i].values->size(), 0.0);
      s.m2[i].assign(prefs[i].values->size(), 0.0);
    }
  }
  ++s.step;

  for (std::size_t i = 0; i < prefs.size(); ++i) {
    Vec& theta = *prefs[i].values;
    const Vec& grad = *grefs[i].values;
    if (theta.size() != grad.size()) throw DimError("optimizer_step: shape mismatch");
    switch (s.kind) {
      case OptKind::Sgd:
        for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= s.lr * grad[k];
        break;
      case OptKind::Adam: {
        const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
        const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
        Vec& m1 = s.m1[i];
        Vec& m2 = s.m2[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
          m1[k] = s.beta1 * m1[k] + (1.0 - s.beta1) * grad[k];
          m2[k] = s.beta2 * m2[k] + (1.0 - s.beta2) * grad[k] * grad[k];
          const double mhat = m1[k] / bc1;
          const double vhat = m2[k] / bc2;
          theta[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
        }
        break;
      }
      case OptKind::AdaDelta: {
        Vec& eg2 = s.m1[i];  // running E[g^2]
        Vec& ed2 = s.m2[i];  // running E[dx^2]
        for (std::size_t k = 0; k < theta.size(); ++k) {
          eg2[k] = s.rho * eg2[k] + (1.0 - s.rho) * grad[k] * grad[k];
          const double dx = -std::sqrt(ed2[k] + s.eps) / std::sqrt(eg2[k] + s.eps) * grad[k];
          ed2[k] = s.rho * ed2[k] + (1.0 - s.rho) * dx * dx;
          theta[k] += s.lr * dx;
        }
        break;
      }
    }
  }
}

double clip_global_norm(GradStore& g, double max_norm) {
  if (max_norm <= 0.0) throw DimError("clip_global_norm: max_norm must be positive");
  const double norm = g.global_norm();
  if (norm > max_norm) g.scale(max_norm / norm);
  return norm;
}

GradStore finite_diff_grad(Model& m, const std::vector<SeqSample>& batch, double eps) {
  GradStore fd = zeros_like(m);
  auto prefs = param_refs(m);
  auto frefs = param_refs(fd);
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    Vec& theta = *prefs[i].values;
    Vec& out = *frefs[i].values;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double saved = theta[k];
      theta[k] = saved + eps;
      const double lp = batch_loss(m, batch, nullptr);
      theta[k] = saved - eps;
      const double lm = batch_loss(m, batch, nullptr);
      theta[k] = saved;
      out[k] = (lp - lm) / (2.0 * eps);
    }
  }
  return fd;
}

GradCheckReport gradient_check(Model& m, const std::vector<SeqSample>& batch, double tol,
                               double eps) {
  GradStore analytic = zeros_like(m);
  batch_loss(m, batch, &analytic);
  GradStore numeric = finite_diff_grad(m, batch, eps);

  GradCheckReport rep;
  rep.tol = tol;
  auto arefs = param_refs(analytic);
  auto nrefs = param_refs(numeric);
  auto mrefs = param_refs(m);  // carries pretty names
  for (std::size_t i = 0; i < arefs.size(); ++i) {
    const Vec& a = *arefs[i].values;
    const Vec& n = *nrefs[i].values;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double denom = std::max({std::fabs(a[k]), std::fabs(n[k]), 1e-8});
      const double rel = std::fabs(a[k] - n[k]) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = mrefs[i].name;
      }
    }
  }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace rgate
