#include "rgate/store.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rgate {

namespace {

constexpr const char* kCkptMagic = "#refined-gates-ckpt v1";

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string gates_to_string(const GateSelect& g) {
  std::string s;
  auto app = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  app(g.input, "input");
  app(g.output, "output");
  app(g.forget, "forget");
  app(g.reset, "reset");
  app(g.update, "update");
  return s.empty() ? "-" : s;
}

GateSelect gates_from_string(const std::string& s) {
  GateSelect g;
  if (s == "-") return g;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "input") g.input = true;
    else if (tok == "output") g.output = true;
    else if (tok == "forget") g.forget = true;
    else if (tok == "reset") g.reset = true;
    else if (tok == "update") g.update = true;
    else throw ParseError("unknown gate name: " + tok);
  }
  return g;
}

Arch arch_from_string(const std::string& s) {
  if (s == "lstm") return Arch::Lstm;
  if (s == "gru") return Arch::Gru;
  if (s == "mgu") return Arch::Mgu;
  throw ParseError("unknown architecture: " + s);
}

RefineMode mode_from_string(const std::string& s) {
  if (s == "none") return RefineMode::None;
  if (s == "add") return RefineMode::Add;
  if (s == "mul") return RefineMode::Mul;
  throw ParseError("unknown refine mode: " + s);
}

std::string canonical_config(const CellConfig& cfg, std::size_t classes, LossKind loss) {
  std::ostringstream os;
  os << "arch=" << arch_name(cfg.arch) << " input=" << cfg.input_size
     << " hidden=" << cfg.hidden_size << " refine=" << refine_mode_name(cfg.refine_mode)
     << " gates=" << gates_to_string(cfg.refined_gates)
     << " unsafe=" << (cfg.unsafe_allow_forget_refine ? 1 : 0)
     << " fbias1=" << (cfg.forget_bias_one ? 1 : 0) << " classes=" << classes
     << " loss=" << (loss == LossKind::PerStep ? "per_step" : "final_step");
  return os.str();
}

Model model_skeleton(const CellConfig& cfg, std::size_t classes, LossKind loss) {
  Model m;
  m.cfg = cfg;
  m.loss = loss;
  const std::size_t h = cfg.hidden_size;
  m.cell.has_projection = cfg.needs_projection();
  if (m.cell.has_projection) {
    m.cell.w_in = Matrix(h, cfg.input_size);
    m.cell.b_in.assign(h, 0.0);
  }
  const auto names = gate_names(cfg.arch);
  m.cell.gates.resize(names.size());
  for (auto& g : m.cell.gates) {
    g.w = Matrix(h, h);
    g.u = Matrix(h, h);
    g.b.assign(h, 0.0);
  }
  m.w_out = Matrix(classes, h);
  m.b_out.assign(classes, 0.0);
  return m;
}

void write_param_block(std::ostream& os, const ParamRef& r) {
  os << "@param " << r.name << ' ' << r.rows << ' ' << r.cols << '\n';
  const Vec& v = *r.values;
  for (std::size_t i = 0; i < r.rows; ++i) {
    for (std::size_t j = 0; j < r.cols; ++j) {
      if (j) os << ' ';
      os << fmt17(v[i * r.cols + j]);
    }
    os << '\n';
  }
}

struct Block {
  std::size_t rows = 0, cols = 0;
  Vec values;
};

}  // namespace

void save_checkpoint(const Model& m, const std::string& path, const TrainProgress* progress,
                     const OptimizerState* opt) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << kCkptMagic << '\n';
  os << "@config arch " << arch_name(m.cfg.arch) << '\n';
  os << "@config input_size " << m.cfg.input_size << '\n';
  os << "@config hidden_size " << m.cfg.hidden_size << '\n';
  os << "@config refine_mode " << refine_mode_name(m.cfg.refine_mode) << '\n';
  os << "@config refined_gates " << gates_to_string(m.cfg.refined_gates) << '\n';
  os << "@config unsafe_forget_refine " << (m.cfg.unsafe_allow_forget_refine ? 1 : 0) << '\n';
  os << "@config forget_bias_one " << (m.cfg.forget_bias_one ? 1 : 0) << '\n';
  os << "@config classes " << m.classes() << '\n';
  os << "@config loss " << (m.loss == LossKind::PerStep ? "per_step" : "final_step") << '\n';
  if (progress)
    os << "@progress epoch " << progress->epoch << " rng " << progress->rng_state << '\n';
  for (const auto& r : param_refs(const_cast<Model&>(m))) write_param_block(os, r);
  if (opt) {
    const char* kind = opt->kind == OptKind::Sgd ? "sgd"
                       : opt->kind == OptKind::Adam ? "adam"
                                                    : "adadelta";
    os << "@opt " << kind << ' ' << fmt17(opt->lr) << ' ' << fmt17(opt->beta1) << ' '
       << fmt17(opt->beta2) << ' ' << fmt17(opt->rho) << ' ' << fmt17(opt->eps) << ' '
       << opt->step << '\n';
    for (std::size_t i = 0; i < opt->m1.size(); ++i) {
      ParamRef r1{"opt.m1." + std::to_string(i), opt->m1[i].size(), 1,
                  const_cast<Vec*>(&opt->m1[i])};
      write_param_block(os, r1);
      ParamRef r2{"opt.m2." + std::to_string(i), opt->m2[i].size(), 1,
                  const_cast<Vec*>(&opt->m2[i])};
      write_param_block(os, r2);
    }
  }
  os << "@end\n";
  if (!os) throw IoError("write failed: " + path);
}

Model load_checkpoint(const std::string& path, TrainProgress* progress, OptimizerState* opt) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for read: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty checkpoint: " + path);
  if (line != kCkptMagic) throw VersionError("unsupported checkpoint header: " + line);

  std::map<std::string, std::string> config;
  std::map<std::string, Block> blocks;
  std::vector<std::string> block_order;
  bool saw_end = false;
  std::size_t lineno = 1;

  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "@config") {
      std::string key, value;
      ls >> key >> value;
      if (key.empty() || value.empty())
        throw ParseError("bad @config at line " + std::to_string(lineno));
      config[key] = value;
    } else if (tag == "@progress") {
      std::string k1, k2;
      long epoch = 0;
      std::uint64_t rng = 0;
      ls >> k1 >> epoch >> k2 >> rng;
      if (progress) {
        progress->epoch = epoch;
        progress->rng_state = rng;
      }
    } else if (tag == "@opt") {
      std::string kind;
      double lr, b1, b2, rho, eps;
      long step;
      ls >> kind >> lr >> b1 >> b2 >> rho >> eps >> step;
      if (!ls) throw ParseError("bad @opt at line " + std::to_string(lineno));
      if (opt) {
        if (kind == "sgd") *opt = make_sgd(lr);
        else if (kind == "adam") *opt = make_adam(lr, b1, b2, eps);
        else if (kind == "adadelta") *opt = make_adadelta(lr, rho, eps);
        else throw ParseError("unknown optimizer kind: " + kind);
        opt->step = step;
      }
    } else if (tag == "@param") {
      std::string name;
      std::size_t rows = 0, cols = 0;
      ls >> name >> rows >> cols;
      if (!ls || rows == 0 || cols == 0)
        throw ParseError("bad @param header at line " + std::to_string(lineno));
      Block b;
      b.rows = rows;
      b.cols = cols;
      b.values.reserve(rows * cols);
      for (std::size_t i = 0; i < rows; ++i) {
        if (!std::getline(is, line))
          throw ParseError("truncated @param block '" + name + "' at line " +
                           std::to_string(lineno));
        ++lineno;
        std::istringstream rs(line);
        for (std::size_t j = 0; j < cols; ++j) {
          double v;
          if (!(rs >> v))
            throw ParseError("bad value in '" + name + "' at line " + std::to_string(lineno));
          b.values.push_back(v);
        }
      }
      block_order.push_back(name);
      blocks[name] = std::move(b);
    } else if (tag == "@end") {
      saw_end = true;
      break;
    } else {
      throw ParseError("unknown tag '" + tag + "' at line " + std::to_string(lineno));
    }
  }
  if (!saw_end) throw ParseError("truncated checkpoint (missing @end): " + path);

  auto need = [&](const char* key) -> const std::string& {
    auto it = config.find(key);
    if (it == config.end()) throw ParseError(std::string("missing @config ") + key);
    return it->second;
  };

  CellConfig cfg;
  cfg.arch = arch_from_string(need("arch"));
  cfg.input_size = std::stoul(need("input_size"));
  cfg.hidden_size = std::stoul(need("hidden_size"));
  cfg.refine_mode = mode_from_string(need("refine_mode"));
  cfg.refined_gates = gates_from_string(need("refined_gates"));
  cfg.unsafe_allow_forget_refine = need("unsafe_forget_refine") == "1";
  cfg.forget_bias_one = need("forget_bias_one") == "1";
  const std::size_t classes = std::stoul(need("classes"));
  const LossKind loss = need("loss") == "per_step" ? LossKind::PerStep : LossKind::FinalStep;

  Model m = model_skeleton(cfg, classes, loss);
  for (const auto& r : param_refs(m)) {
    auto it = blocks.find(r.name);
    if (it == blocks.end()) throw ParseError("missing parameter block: " + r.name);
    if (it->second.rows != r.rows || it->second.cols != r.cols)
      throw ShapeError("shape mismatch for " + r.name);
    *r.values = it->second.values;
  }
  if (opt && opt->kind != OptKind::Sgd) {
    std::size_t n = 0;
    while (blocks.count("opt.m1." + std::to_string(n))) ++n;
    opt->m1.resize(n);
    opt->m2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      opt->m1[i] = blocks["opt.m1." + std::to_string(i)].values;
      opt->m2[i] = blocks["opt.m2." + std::to_string(i)].values;
    }
  }
  return m;
}

void load_checkpoint_into(Model& m, const std::string& path) {
  Model loaded = load_checkpoint(path);
  if (config_hash(loaded.cfg, loaded.classes(), loaded.loss) !=
      config_hash(m.cfg, m.classes(), m.loss))
    throw ShapeError("checkpoint config does not match target model config");
  m = std::move(loaded);
}

std::string config_hash(const CellConfig& cfg, std::size_t classes, LossKind loss) {
  const std::string canon = canonical_config(cfg, classes, loss);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void append_metrics(const MetricsRecord& r, const std::string& path) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot open for append: " + path);
  os << "run=" << r.run_id << " epoch=" << r.epoch << " split=" << r.split
     << " loss=" << fmt17(r.loss) << " acc=" << fmt17(r.accuracy);
  if (r.bpc) os << " bpc=" << fmt17(*r.bpc);
  os << " wall=" << fmt17(r.wall_seconds) << " cfg=" << r.config_hash << '\n';
  if (!os) throw IoError("append failed: " + path);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for read: " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    MetricsRecord r;
    std::istringstream ls(line);
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ParseError("bad metrics token at line " + std::to_string(lineno));
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      if (key == "run") r.run_id = val;
      else if (key == "epoch") r.epoch = std::stol(val);
      else if (key == "split") r.split = val;
      else if (key == "loss") r.loss = std::stod(val);
      else if (key == "acc") r.accuracy = std::stod(val);
      else if (key == "bpc") r.bpc = std::stod(val);
      else if (key == "wall") r.wall_seconds = std::stod(val);
      else if (key == "cfg") r.config_hash = val;
      else throw ParseError("unknown metrics key '" + key + "' at line " + std::to_string(lineno));
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

void write_dataset_header(std::ostream& os, const char* task, std::size_t len,
                          std::uint64_t seed) {
  os << "#task=" << task << " L=" << len << " seed=" << seed << " version=1\n";
}

void parse_dataset_header(const std::string& line, const char* expected_task,
                          std::size_t* len_out) {
  std::istringstream ls(line);
  std::string task_kv, len_kv, seed_kv, ver_kv;
  ls >> task_kv >> len_kv >> seed_kv >> ver_kv;
  if (task_kv.rfind("#task=", 0) != 0) throw ParseError("missing dataset header");
  const std::string task = task_kv.substr(6);
  if (task != expected_task)
    throw ParseError("dataset header task '" + task + "' does not match expected '" +
                     expected_task + "'");
  if (ver_kv != "version=1") throw VersionError("unsupported dataset version: " + ver_kv);
  if (len_kv.rfind("L=", 0) != 0) throw ParseError("missing L= in dataset header");
  if (len_out) *len_out = std::stoul(len_kv.substr(2));
}

}  // namespace

void write_adding_dataset(const std::vector<AddingSample>& samples, std::size_t len,
                          std::uint64_t seed, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  write_dataset_header(os, "adding", len, seed);
  for (const auto& s : samples) os << s.a_bits << '\t' << s.b_bits << '\t' << s.s_bits << '\n';
  if (!os) throw IoError("write failed: " + path);
}

std::vector<AddingSample> read_adding_dataset(const std::string& path, std::size_t* len) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for read: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty dataset: " + path);
  std::size_t expect_len = 0;
  parse_dataset_header(line, "adding", &expect_len);
  if (len) *len = expect_len;

  std::vector<AddingSample> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    AddingSample s;
    std::istringstream ls(line);
    if (!std::getline(ls, s.a_bits, '\t') || !std::getline(ls, s.b_bits, '\t') ||
        !std::getline(ls, s.s_bits))
      throw ParseError("malformed adding line " + std::to_string(lineno));
    if (s.a_bits.size() != expect_len || s.b_bits.size() != expect_len ||
        s.s_bits.size() != expect_len)
      throw ParseError("wrong bit-string length at line " + std::to_string(lineno));
    bool overflow = false;
    if (add_bitstrings(s.a_bits, s.b_bits, &overflow) != s.s_bits || overflow)
      throw ParseError("arithmetically inconsistent adding sample at line " +
                       std::to_string(lineno));
    out.push_back(std::move(s));
  }
  return out;
}

void write_counting_dataset(const std::vector<CountingSample>& samples, std::size_t len,
                            std::uint64_t seed, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  write_dataset_header(os, "counting", len, seed);
  for (const auto& s : samples) os << s.bits << '\t' << s.count << '\n';
  if (!os) throw IoError("write failed: " + path);
}

std::vector<CountingSample> read_counting_dataset(const std::string& path, std::size_t* len) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for read: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty dataset: " + path);
  std::size_t expect_len = 0;
  parse_dataset_header(line, "counting", &expect_len);
  if (len) *len = expect_len;

  std::vector<CountingSample> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    CountingSample s;
    std::istringstream ls(line);
    std::string count_str;
    if (!std::getline(ls, s.bits, '\t') || !std::getline(ls, count_str))
      throw ParseError("malformed counting line " + std::to_string(lineno));
    s.count = std::stoul(count_str);
    if (s.bits.size() != expect_len)
      throw ParseError("wrong bit-string length at line " + std::to_string(lineno));
    if (trailing_run_length(s.bits) != s.count)
      throw ParseError("count does not match trailing run at line " + std::to_string(lineno));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace rgate
