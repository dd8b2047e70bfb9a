// Command-line driver for the refined-gate RNN laboratory: dataset
// generation, training, evaluation, gradient checking and gate probing.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rgate/probe.hpp"
#include "rgate/store.hpp"
#include "rgate/trainer.hpp"

namespace fs = std::filesystem;
using namespace rgate;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitGradcheck = 3;
constexpr int kExitIo = 4;

struct RunConfig {
  std::string task = "adding";
  std::string arch = "lstm";
  std::string refine = "none";
  std::string gates;  // comma-separated subset
  std::size_t hidden = 0;  // 0 = per-task default
  std::size_t len = 10;
  std::size_t unroll = 50;
  std::size_t epochs = 100;
  std::size_t batch = 32;
  std::size_t train_count = 10000;
  std::size_t test_count = 5000;
  std::string opt = "adam";
  double lr = -1.0;  // < 0 = optimizer default
  double clip = 5.0;
  std::uint64_t seed = 1;
  std::string data;
  std::string out = ".";
  std::string ckpt;
  bool unsafe_forget = false;
  bool forget_bias_one = false;
  bool timing = false;  // wall-clock in metrics breaks byte-determinism; opt-in
};

Arch parse_arch(const std::string& s) {
  if (s == "lstm") return Arch::Lstm;
  if (s == "gru") return Arch::Gru;
  if (s == "mgu") return Arch::Mgu;
  throw ConfigError("unknown --arch: " + s);
}

RefineMode parse_mode(const std::string& s) {
  if (s == "none") return RefineMode::None;
  if (s == "add") return RefineMode::Add;
  if (s == "mul") return RefineMode::Mul;
  throw ConfigError("unknown --refine: " + s);
}

GateSelect parse_gates(const std::string& s) {
  GateSelect g;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "input") g.input = true;
    else if (tok == "output") g.output = true;
    else if (tok == "forget") g.forget = true;
    else if (tok == "reset") g.reset = true;
    else if (tok == "update") g.update = true;
    else throw ConfigError("unknown gate in --gates: " + tok);
  }
  return g;
}

CellConfig cell_config(const RunConfig& rc, std::size_t input_size, std::size_t default_hidden) {
  CellConfig cfg;
  cfg.arch = parse_arch(rc.arch);
  cfg.input_size = input_size;
  cfg.hidden_size = rc.hidden ? rc.hidden : default_hidden;
  cfg.refine_mode = parse_mode(rc.refine);
  cfg.refined_gates = parse_gates(rc.gates);
  cfg.unsafe_allow_forget_refine = rc.unsafe_forget;
  cfg.forget_bias_one = rc.forget_bias_one;
  validate(cfg);
  return cfg;
}

OptimizerState make_optimizer(const RunConfig& rc) {
  if (rc.opt == "sgd") return make_sgd(rc.lr > 0 ? rc.lr : 0.1);
  if (rc.opt == "adam") return make_adam(rc.lr > 0 ? rc.lr : 1e-3);
  if (rc.opt == "adadelta") return make_adadelta(rc.lr > 0 ? rc.lr : 1.0);
  throw ConfigError("unknown --opt: " + rc.opt);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open text file: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int cmd_gen(const RunConfig& rc) {
  fs::create_directories(rc.out);
  if (rc.task == "adding") {
    Rng train_rng(rc.seed), test_rng(rc.seed ^ 0x5eed5eed5eed5eedULL);
    std::vector<AddingSample> train, test;
    for (std::size_t i = 0; i < rc.train_count; ++i)
      train.push_back(gen_adding_sample(rc.len, train_rng));
    for (std::size_t i = 0; i < rc.test_count; ++i)
      test.push_back(gen_adding_sample(rc.len, test_rng));
    write_adding_dataset(train, rc.len, rc.seed, rc.out + "/train.txt");
    write_adding_dataset(test, rc.len, rc.seed, rc.out + "/test.txt");
  } else if (rc.task == "counting") {
    Rng train_rng(rc.seed), test_rng(rc.seed ^ 0x5eed5eed5eed5eedULL);
    std::vector<CountingSample> train, test;
    for (std::size_t i = 0; i < rc.train_count; ++i)
      train.push_back(gen_counting_sample(rc.len, train_rng));
    for (std::size_t i = 0; i < rc.test_count; ++i)
      test.push_back(gen_counting_sample(rc.len, test_rng));
    write_counting_dataset(train, rc.len, rc.seed, rc.out + "/train.txt");
    write_counting_dataset(test, rc.len, rc.seed, rc.out + "/test.txt");
  } else {
    throw ConfigError("gen supports tasks: adding, counting");
  }
  std::cout << "wrote " << rc.train_count << " train / " << rc.test_count << " test samples to "
            << rc.out << "\n";
  return kExitOk;
}

std::vector<SeqSample> load_task_samples(const RunConfig& rc, const std::string& path,
                                         std::size_t* len_out) {
  std::vector<SeqSample> out;
  if (rc.task == "adding") {
    for (const auto& s : read_adding_dataset(path, len_out)) out.push_back(encode_adding(s));
  } else {
    std::size_t len = 0;
    auto raw = read_counting_dataset(path, &len);
    if (len_out) *len_out = len;
    for (const auto& s : raw) out.push_back(encode_counting(s, len));
  }
  return out;
}

int cmd_train_charlm(const RunConfig& rc) {
  const std::string text = read_text_file(rc.data);
  CharCorpus corpus = build_char_corpus(text, rc.unroll, 0.8, 0.1);
  const std::size_t vocab = corpus.vocab_size();

  CellConfig cfg = cell_config(rc, vocab, 128);
  Rng init_rng(rc.seed);
  Model model = init_model(cfg, vocab, LossKind::PerStep, init_rng);
  OptimizerState opt = make_optimizer(rc);

  fs::create_directories(rc.out);
  const std::string metrics_path = rc.out + "/metrics.txt";
  const std::string hash = config_hash(cfg, vocab, model.loss);
  const std::string run_id = rc.task + "-" + hash.substr(0, 8) + "-s" + std::to_string(rc.seed);

  double best_bpc = 1e300;
  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&]() {
    if (!rc.timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  for (std::size_t epoch = 1; epoch <= rc.epochs; ++epoch) {
    const double train_loss = charlm_train_epoch(model, opt, corpus.train, rc.unroll, rc.clip);
    const double valid_bpc = charlm_bpc(model, corpus.valid, rc.unroll);
    append_metrics({run_id, static_cast<long>(epoch), "train", train_loss, 0.0, std::nullopt,
                    wall(), hash},
                   metrics_path);
    append_metrics({run_id, static_cast<long>(epoch), "valid", 0.0, 0.0, valid_bpc, wall(), hash},
                   metrics_path);
    std::cout << "epoch " << epoch << " train_loss=" << train_loss << " valid_bpc=" << valid_bpc
              << "\n";
    if (valid_bpc < best_bpc) {
      best_bpc = valid_bpc;
      save_checkpoint(model, rc.out + "/best.ckpt");
    }
  }
  const double test_bpc = charlm_bpc(model, corpus.test, rc.unroll);
  append_metrics({run_id, static_cast<long>(rc.epochs), "test", 0.0, 0.0, test_bpc, wall(), hash},
                 metrics_path);
  TrainProgress prog{static_cast<long>(rc.epochs), rc.seed};
  save_checkpoint(model, rc.out + "/final.ckpt", &prog, &opt);
  std::cout << "test_bpc=" << test_bpc << " (uniform=" << std::log2(double(vocab)) << ")\n";
  return kExitOk;
}

int cmd_train(const RunConfig& rc) {
  if (rc.task == "charlm") return cmd_train_charlm(rc);

  std::size_t len = 0;
  const auto train = load_task_samples(rc, rc.data + "/train.txt", &len);
  const auto test = load_task_samples(rc, rc.data + "/test.txt", nullptr);

  const bool adding = rc.task == "adding";
  const std::size_t classes = adding ? 2 : len;
  const LossKind loss = adding ? LossKind::PerStep : LossKind::FinalStep;
  CellConfig cfg = cell_config(rc, 2, adding ? 4 : 2);

  Rng init_rng(rc.seed);
  Model model = init_model(cfg, classes, loss, init_rng);
  Rng shuffle_rng(rc.seed ^ 0x51e55eedbeefULL);
  OptimizerState opt = make_optimizer(rc);
  TrainOptions topt{rc.batch, rc.clip};

  fs::create_directories(rc.out);
  const std::string metrics_path = rc.out + "/metrics.txt";
  const std::string hash = config_hash(cfg, classes, loss);
  const std::string run_id = rc.task + "-" + hash.substr(0, 8) + "-s" + std::to_string(rc.seed);

  const auto t0 = std::chrono::steady_clock::now();
  auto wall = [&]() {
    if (!rc.timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  // epoch-0 evaluation of the untrained model
  double acc = sequence_accuracy(model, test);
  append_metrics({run_id, 0, "test", mean_loss(model, test), acc, std::nullopt, wall(), hash},
                 metrics_path);
  save_checkpoint(model, rc.out + "/best.ckpt");

  std::vector<double> acc_history;
  double best_acc = acc;
  for (std::size_t epoch = 1; epoch <= rc.epochs; ++epoch) {
    const double train_loss = train_epoch(model, opt, train, topt, shuffle_rng);
    acc = sequence_accuracy(model, test);
    acc_history.push_back(acc);
    append_metrics({run_id, static_cast<long>(epoch), "train", train_loss, 0.0, std::nullopt,
                    wall(), hash},
                   metrics_path);
    append_metrics({run_id, static_cast<long>(epoch), "test", mean_loss(model, test), acc,
                    std::nullopt, wall(), hash},
                   metrics_path);
    std::cout << "epoch " << epoch << " train_loss=" << train_loss << " test_acc=" << acc << "\n";
    if (acc >= best_acc) {
      best_acc = acc;
      save_checkpoint(model, rc.out + "/best.ckpt");
    }
    if (acc == 1.0) break;  // complete convergence
  }
  TrainProgress prog{static_cast<long>(acc_history.size()), rc.seed};
  save_checkpoint(model, rc.out + "/final.ckpt", &prog, &opt);

  if (adding) {
    const auto conv = convergence_epoch(acc_history.empty() ? std::vector<double>{0.0}
                                                            : acc_history);
    std::cout << "convergence_epoch=" << (conv ? std::to_string(*conv) : "inf") << "\n";
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& rc) {
  Model model = load_checkpoint(rc.ckpt);
  if (rc.task == "charlm") {
    const std::string text = read_text_file(rc.data);
    CharCorpus corpus = build_char_corpus(text, rc.unroll, 0.8, 0.1);
    std::cout << "test_bpc=" << charlm_bpc(model, corpus.test, rc.unroll) << "\n";
    return kExitOk;
  }
  const auto test = load_task_samples(rc, rc.data + "/test.txt", nullptr);
  std::cout << "loss=" << mean_loss(model, test)
            << " seq_accuracy=" << sequence_accuracy(model, test) << "\n";
  return kExitOk;
}

int run_gradcheck_one(const CellConfig& cfg, std::size_t T, std::uint64_t seed, double tol) {
  Rng rng(seed);
  Model m = init_model(cfg, 3, LossKind::PerStep, rng);
  std::vector<SeqSample> batch(2);
  for (auto& s : batch) {
    s.inputs.resize(T);
    s.targets.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      s.inputs[t].resize(cfg.input_size);
      for (auto& v : s.inputs[t]) v = rng.uniform(-1.0, 1.0);
      s.targets[t] = static_cast<int>(rng.next_below(3));
    }
  }
  const auto rep = gradient_check(m, batch, tol);
  std::printf("%-4s refine=%-4s gates=%-12s max_rel_err=%.3e worst=%s  %s\n",
              arch_name(cfg.arch).c_str(), refine_mode_name(cfg.refine_mode).c_str(),
              [&] {
                std::string g;
                if (cfg.refined_gates.input) g += "input,";
                if (cfg.refined_gates.output) g += "output,";
                if (cfg.refined_gates.forget) g += "forget,";
                if (cfg.refined_gates.reset) g += "reset,";
                if (g.empty()) g = "-";
                return g;
              }()
                  .c_str(),
              rep.max_rel_err, rep.worst_param.c_str(), rep.pass ? "PASS" : "FAIL");
  return rep.pass ? kExitOk : kExitGradcheck;
}

int cmd_gradcheck(const RunConfig& rc, bool all, double tol) {
  const std::size_t hidden = rc.hidden ? rc.hidden : 3;
  const std::size_t T = rc.len;
  if (hidden > 8 || T > 16)
    throw ConfigError("gradcheck enforces hidden <= 8 and sequence length <= 16");

  int rcode = kExitOk;
  auto run = [&](CellConfig cfg) {
    if (run_gradcheck_one(cfg, T, rc.seed, tol) != kExitOk) rcode = kExitGradcheck;
  };

  if (all) {
    for (Arch arch : {Arch::Lstm, Arch::Gru, Arch::Mgu}) {
      CellConfig base;
      base.arch = arch;
      base.input_size = 3;
      base.hidden_size = hidden;
      run(base);
      std::vector<GateSelect> subsets;
      if (arch == Arch::Lstm) {
        GateSelect i, o, io;
        i.input = true;
        o.output = true;
        io.input = io.output = true;
        subsets = {i, o, io};
      } else if (arch == Arch::Gru) {
        GateSelect r;
        r.reset = true;
        subsets = {r};
      } else {
        GateSelect f;
        f.forget = true;
        subsets = {f};
      }
      for (const auto& sel : subsets)
        for (RefineMode mode : {RefineMode::Add, RefineMode::Mul}) {
          CellConfig cfg = base;
          cfg.refine_mode = mode;
          cfg.refined_gates = sel;
          run(cfg);
        }
    }
    if (rc.unsafe_forget) {
      CellConfig cfg;
      cfg.arch = Arch::Lstm;
      cfg.input_size = 3;
      cfg.hidden_size = hidden;
      cfg.refine_mode = RefineMode::Add;
      cfg.refined_gates.forget = true;
      cfg.unsafe_allow_forget_refine = true;
      run(cfg);
    }
  } else {
    CellConfig cfg = cell_config(rc, 3, 3);
    cfg.hidden_size = hidden;
    run(cfg);
  }
  return rcode;
}

int cmd_probe(const RunConfig& rc) {
  Model model = load_checkpoint(rc.ckpt);
  fs::create_directories(rc.out);

  if (rc.task == "adding") {
    std::size_t len = 0;
    const auto samples = read_adding_dataset(rc.data + "/test.txt", &len);
    if (samples.empty()) throw IoError("empty test set");

    // per-unit traces of the first test sequence
    const auto first = encode_adding(samples[0]);
    const auto traces = record_gate_traces(model, first.inputs);
    write_traces(traces, rc.out + "/traces.txt");

    // pooled saturation stats over the full test set
    std::vector<GateTrace> all;
    for (const auto& s : samples) {
      auto tr = record_gate_traces(model, encode_adding(s).inputs);
      all.insert(all.end(), tr.begin(), tr.end());
    }
    write_saturation_stats(saturation_stats(all), "all_gates", rc.out + "/stats.txt");

    // carry alignment per gate, averaged over the test set
    std::ofstream carry_os(rc.out + "/carry.txt");
    const auto names = gate_names(model.cfg.arch);
    for (const auto& name : names) {
      if (name == "candidate") continue;
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& s : samples) {
        auto tr = record_gate_traces(model, encode_adding(s).inputs, /*aggregate_mean=*/true);
        for (const auto& t : tr)
          if (t.gate == name) {
            sum += carry_alignment(t, s);
            ++n;
          }
      }
      carry_os << "gate=" << name << " mean_carry_alignment=" << (n ? sum / double(n) : 0.0)
               << "\n";
    }

    if (model.cfg.arch == Arch::Lstm) {
      const auto series = state_grad_norm_series(model, first.inputs);
      std::ofstream os(rc.out + "/gradnorm.txt");
      for (std::size_t t = 0; t < series.size(); ++t) os << t + 1 << '\t' << series[t] << '\n';
    }
  } else if (rc.task == "counting") {
    std::size_t len = 0;
    const auto samples = read_counting_dataset(rc.data + "/test.txt", &len);
    const auto curve = counting_error_curve(model, samples, len);
    std::ofstream os(rc.out + "/counting_curve.txt");
    for (std::size_t c = 0; c < curve.size(); ++c) os << c + 1 << '\t' << curve[c] << '\n';

    std::vector<GateTrace> all;
    for (const auto& s : samples) {
      auto tr = record_gate_traces(model, encode_counting(s, len).inputs);
      all.insert(all.end(), tr.begin(), tr.end());
    }
    write_saturation_stats(saturation_stats(all), "all_gates", rc.out + "/stats.txt");
  } else {
    throw ConfigError("probe supports tasks: adding, counting");
  }
  std::cout << "probe artifacts written to " << rc.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refined-gate recurrent network laboratory"};
  app.require_subcommand(1);

  RunConfig rc;
  bool gc_all = false;
  double gc_tol = 1e-5;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--task", rc.task, "adding | counting | charlm");
    cmd->add_option("--arch", rc.arch, "lstm | gru | mgu");
    cmd->add_option("--refine", rc.refine, "none | add | mul");
    cmd->add_option("--gates", rc.gates, "comma-separated refined gate subset");
    cmd->add_option("--hidden", rc.hidden, "hidden units (0 = task default)");
    cmd->add_option("--len", rc.len, "sequence length L");
    cmd->add_option("--unroll", rc.unroll, "charlm truncated-BPTT length");
    cmd->add_option("--epochs", rc.epochs, "epoch budget");
    cmd->add_option("--batch", rc.batch, "mini-batch size");
    cmd->add_option("--train-count", rc.train_count, "training set size (gen)");
    cmd->add_option("--test-count", rc.test_count, "test set size (gen)");
    cmd->add_option("--opt", rc.opt, "sgd | adam | adadelta");
    cmd->add_option("--lr", rc.lr, "learning rate (optimizer default if unset)");
    cmd->add_option("--clip", rc.clip, "global-norm gradient clip (<=0 disables)");
    cmd->add_option("--seed", rc.seed, "master seed");
    cmd->add_option("--data", rc.data, "dataset directory (or text file for charlm)");
    cmd->add_option("--out", rc.out, "output directory");
    cmd->add_option("--ckpt", rc.ckpt, "checkpoint path (eval/probe)");
    cmd->add_flag("--unsafe-forget-refine", rc.unsafe_forget,
                  "allow refining the LSTM forget gate (explosion demo only)");
    cmd->add_flag("--forget-bias-one", rc.forget_bias_one, "initialize forget bias to +1");
    cmd->add_flag("--timing", rc.timing, "record real wall-clock in metrics (breaks "
                                         "byte-determinism of metrics files)");
    cmd->set_config("--config", "", "key=value config file; flags override");
  };

  auto* gen = app.add_subcommand("gen", "generate dataset files");
  auto* train = app.add_subcommand("train", "train a model, logging metrics + checkpoints");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients vs finite differences");
  auto* probe = app.add_subcommand("probe", "emit gate traces, stats and curves");
  for (auto* cmd : {gen, train, eval, gradcheck, probe}) add_common(cmd);
  gradcheck->add_flag("--all", gc_all, "run the full supported configuration grid");
  gradcheck->add_option("--tol", gc_tol, "relative-error tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(rc);
    if (train->parsed()) return cmd_train(rc);
    if (eval->parsed()) return cmd_eval(rc);
    if (gradcheck->parsed()) return cmd_gradcheck(rc, gc_all, gc_tol);
    if (probe->parsed()) return cmd_probe(rc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const StoreError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DimError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
