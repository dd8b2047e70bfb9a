#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "rgate/store.hpp"
#include "rgate/tasks.hpp"

using namespace rgate;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rgate-test-" + std::to_string(::getpid()) + "-" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

Model make_model(std::uint64_t seed, RefineMode mode = RefineMode::Add) {
  CellConfig cfg;
  cfg.arch = Arch::Lstm;
  cfg.input_size = 2;
  cfg.hidden_size = 3;
  cfg.refine_mode = mode;
  if (mode != RefineMode::None) cfg.refined_gates.output = true;
  Rng rng(seed);
  return init_model(cfg, 2, LossKind::PerStep, rng);
}

std::vector<Vec> probe_inputs(std::size_t T, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> xs(T);
  for (auto& x : xs) {
    x.resize(dim);
    for (auto& v : x) v = rng.uniform(-1, 1);
  }
  return xs;
}

}  // namespace

TEST_CASE("checkpoint round trip reproduces forward outputs bitwise") {
  TempDir dir;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Model m = make_model(seed);
    const auto xs = probe_inputs(7, 2, seed + 100);
    const UnrollResult before = unroll_forward(m, xs);

    const std::string path = dir.file("ckpt.txt");
    save_checkpoint(m, path);
    const Model loaded = load_checkpoint(path);
    const UnrollResult after = unroll_forward(loaded, xs);

    REQUIRE(after.logits.size() == before.logits.size());
    for (std::size_t t = 0; t < before.logits.size(); ++t)
      CHECK(after.logits[t] == before.logits[t]);
  }
}

TEST_CASE("checkpoint carries progress and optimizer state") {
  TempDir dir;
  Model m = make_model(3);
  OptimizerState opt = make_adam(2e-3);
  GradStore g = zeros_like(m);
  g.b_out[0] = 0.5;
  optimizer_step(opt, m, g);

  TrainProgress prog{42, 0xdeadbeefULL};
  const std::string path = dir.file("ckpt.txt");
  save_checkpoint(m, path, &prog, &opt);

  TrainProgress got{};
  OptimizerState gopt;
  const Model loaded = load_checkpoint(path, &got, &gopt);
  CHECK(got.epoch == 42);
  CHECK(got.rng_state == 0xdeadbeefULL);
  CHECK(gopt.kind == OptKind::Adam);
  CHECK(gopt.lr == 2e-3);
  CHECK(gopt.step == 1);
  REQUIRE(gopt.m1.size() == opt.m1.size());
  for (std::size_t i = 0; i < opt.m1.size(); ++i) {
    CHECK(gopt.m1[i] == opt.m1[i]);
    CHECK(gopt.m2[i] == opt.m2[i]);
  }
}

TEST_CASE("truncated checkpoint raises a parse error") {
  TempDir dir;
  Model m = make_model(5);
  const std::string path = dir.file("ckpt.txt");
  save_checkpoint(m, path);

  std::ifstream is(path);
  std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  std::ofstream os(path, std::ios::trunc);
  os << all.substr(0, all.size() / 2);
  os.close();

  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
}

TEST_CASE("wrong magic raises a version error") {
  TempDir dir;
  const std::string path = dir.file("bad.txt");
  std::ofstream(path) << "#refined-gates-ckpt v9\n@end\n";
  CHECK_THROWS_AS(load_checkpoint(path), VersionError);
}

TEST_CASE("loading into a mismatched model raises a shape error") {
  TempDir dir;
  Model m = make_model(7);
  const std::string path = dir.file("ckpt.txt");
  save_checkpoint(m, path);

  Model other = make_model(7, RefineMode::None);
  CHECK_THROWS_AS(load_checkpoint_into(other, path), ShapeError);

  // matching config loads fine
  Model same = make_model(99);
  load_checkpoint_into(same, path);
  CHECK(same.b_out == m.b_out);
}

TEST_CASE("config hash separates configs and ignores parameter values") {
  const Model a = make_model(1);
  const Model b = make_model(2);
  const Model c = make_model(1, RefineMode::Mul);
  CHECK(config_hash(a.cfg, a.classes(), a.loss) == config_hash(b.cfg, b.classes(), b.loss));
  CHECK(config_hash(a.cfg, a.classes(), a.loss) != config_hash(c.cfg, c.classes(), c.loss));
}

TEST_CASE("metrics append and read round trip") {
  TempDir dir;
  const std::string path = dir.file("metrics.txt");
  MetricsRecord r1{"runA", 1, "train", 0.6931471805599453, 0.5, std::nullopt, 0.0, "cafebabe"};
  MetricsRecord r2{"runA", 2, "test", 0.25, 1.0, 1.75, 0.0, "cafebabe"};
  append_metrics(r1, path);
  append_metrics(r2, path);

  const auto got = read_metrics(path);
  REQUIRE(got.size() == 2);
  CHECK(got[0].run_id == "runA");
  CHECK(got[0].epoch == 1);
  CHECK(got[0].split == "train");
  CHECK(got[0].loss == r1.loss);  // 17 digits keep the value exact
  CHECK_FALSE(got[0].bpc.has_value());
  CHECK(got[1].accuracy == 1.0);
  REQUIRE(got[1].bpc.has_value());
  CHECK(*got[1].bpc == 1.75);
  CHECK(got[1].config_hash == "cafebabe");
}

TEST_CASE("convergence epoch recoverable from reread metrics") {
  TempDir dir;
  const std::string path = dir.file("metrics.txt");
  const double accs[4] = {0.7, 0.9, 1.0, 1.0};
  for (int e = 0; e < 4; ++e)
    append_metrics({"run", e + 1, "test", 0.1, accs[e], std::nullopt, 0.0, "x"}, path);
  std::vector<double> history;
  for (const auto& r : read_metrics(path))
    if (r.split == "test") history.push_back(r.accuracy);
  CHECK(convergence_epoch(history) == 3);
}

TEST_CASE("adding dataset round trip") {
  TempDir dir;
  Rng rng(90);
  std::vector<AddingSample> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(gen_adding_sample(10, rng));
  const std::string path = dir.file("add.txt");
  write_adding_dataset(samples, 10, 90, path);

  std::size_t len = 0;
  const auto got = read_adding_dataset(path, &len);
  CHECK(len == 10);
  REQUIRE(got.size() == samples.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].a_bits == samples[i].a_bits);
    CHECK(got[i].b_bits == samples[i].b_bits);
    CHECK(got[i].s_bits == samples[i].s_bits);
  }
}

TEST_CASE("inconsistent adding line is rejected with its line number") {
  TempDir dir;
  const std::string path = dir.file("bad.txt");
  std::ofstream os(path);
  os << "#task=adding L=4 seed=1 version=1\n";
  os << "1000\t0100\t1100\n";   // 1 + 2 = 3: consistent
  os << "1000\t1000\t1000\n";   // 1 + 1 = 2, not 1: inconsistent
  os.close();
  try {
    read_adding_dataset(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("adding dataset header validation") {
  TempDir dir;
  const std::string path = dir.file("bad.txt");
  std::ofstream(path) << "#task=counting L=4 seed=1 version=1\n";
  CHECK_THROWS_AS(read_adding_dataset(path), ParseError);

  std::ofstream(path, std::ios::trunc) << "#task=adding L=4 seed=1 version=2\n";
  CHECK_THROWS_AS(read_adding_dataset(path), VersionError);
}

TEST_CASE("counting dataset round trip and validation") {
  TempDir dir;
  Rng rng(91);
  std::vector<CountingSample> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(gen_counting_sample(20, rng));
  const std::string path = dir.file("count.txt");
  write_counting_dataset(samples, 20, 91, path);

  std::size_t len = 0;
  const auto got = read_counting_dataset(path, &len);
  CHECK(len == 20);
  REQUIRE(got.size() == samples.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].bits == samples[i].bits);
    CHECK(got[i].count == samples[i].count);
  }

  std::ofstream os(path, std::ios::app);
  os << "11111111110000000000\t3\n";  // trailing run is 10, not 3
  os.close();
  CHECK_THROWS_AS(read_counting_dataset(path), ParseError);
}
