#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "mib/data.hpp"
#include "mib/errors.hpp"
#include "mib/model.hpp"
#include "mib/rng.hpp"
#include "mib/trainer.hpp"

using namespace mib;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d = 6;
  c.hidden_size = 8;
  c.latent_size = 3;
  c.gap_length = 5;
  c.condition_length = 2;
  return c;
}

Corpus tiny_corpus(std::uint64_t seed, int n = 3, int frames = 30) {
  return generate_synthetic_corpus(chain_skeleton(2, 3), n, frames, seed);
}

TrainConfig fast_train(int epochs, double lambda) {
  TrainConfig t;
  t.epochs = epochs;
  t.lambda = lambda;
  t.batch_size = 4;
  t.seed = 9;
  t.window_stride = 3;
  return t;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mib_trainer_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.epochs = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.lambda = -1.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.learning_rate = 0.0;  // explicitly legal: optimizer identity
  CHECK_NOTHROW(t.validate());
}

TEST_CASE("adam single and double step match the hand formula") {
  const ModelConfig c = tiny_config();
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  AdamOptimizer adam(c, lr, b1, b2, eps);

  ModelParams params = zero_params(c);
  ModelParams grads = zero_params(c);
  // Distinct, reproducible gradient values per entry.
  {
    auto gs = param_tensors(grads);
    double v = -1.0;
    for (auto& t : gs) {
      auto m = t.map();
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        m(i % m.rows(), i / m.rows()) = v;
        v += 0.37;
        if (v > 1.0) v -= 2.0;
      }
    }
  }
  const ModelParams grads_copy = grads;

  adam.step(params, grads);

  // After one step from zero params: m = (1-b1) g, v = (1-b2) g^2, and the
  // bias corrections cancel exactly, so the update is -lr * g / (|g| + eps).
  {
    ModelParams expect = zero_params(c);
    auto es = param_tensors(expect);
    ModelParams gc = grads_copy;
    auto gs = param_tensors(gc);
    double max_err = 0.0;
    for (std::size_t t = 0; t < es.size(); ++t) {
      const Eigen::MatrixXd g = gs[t].map();
      const Eigen::MatrixXd want =
          (-lr * g.array() / (g.array().abs() + eps)).matrix();
      auto got = param_tensors(params)[t].map();
      max_err = std::max(max_err, (got - want).cwiseAbs().maxCoeff());
    }
    CHECK(max_err < 1e-12);
  }

  // Second step with the same gradient, tracked by an independent scalar
  // recurrence applied entry-wise.
  ModelParams params_before = params;
  ModelParams grads2 = grads_copy;
  adam.step(params, grads2);
  {
    auto before = param_tensors(params_before);
    auto after = param_tensors(params);
    ModelParams gc = grads_copy;
    auto gs = param_tensors(gc);
    double max_err = 0.0;
    for (std::size_t t = 0; t < before.size(); ++t) {
      for (Eigen::Index i = 0; i < before[t].size(); ++i) {
        const double g = gs[t].data[i];
        const double m1 = (1 - b1) * g;
        const double v1 = (1 - b2) * g * g;
        const double m2 = b1 * m1 + (1 - b1) * g;
        const double v2 = b2 * v1 + (1 - b2) * g * g;
        const double mhat = m2 / (1 - b1 * b1);
        const double vhat = v2 / (1 - b2 * b2);
        const double want = before[t].data[i] - lr * mhat / (std::sqrt(vhat) + eps);
        max_err = std::max(max_err, std::abs(after[t].data[i] - want));
      }
    }
    CHECK(max_err < 1e-12);
  }
}

TEST_CASE("clip_gradients rescales exactly to the bound") {
  const ModelConfig c = tiny_config();
  ModelParams grads = zero_params(c);
  auto gs = param_tensors(grads);
  for (auto& t : gs) t.map().setConstant(0.5);
  double sq = 0.0;
  for (auto& t : gs) sq += t.map().squaredNorm();
  const double norm = std::sqrt(sq);
  REQUIRE(norm > 5.0);

  const double reported = clip_gradients(grads, 5.0);
  CHECK(reported == doctest::Approx(norm).epsilon(1e-12));
  double sq_after = 0.0;
  for (auto& t : param_tensors(grads)) sq_after += t.map().squaredNorm();
  CHECK(std::sqrt(sq_after) == doctest::Approx(5.0).epsilon(1e-12));

  // Below the bound nothing changes.
  ModelParams small = zero_params(c);
  param_tensors(small)[0].map()(0, 0) = 0.25;
  const double small_norm = clip_gradients(small, 5.0);
  CHECK(small_norm == 0.25);
  CHECK(param_tensors(small)[0].map()(0, 0) == 0.25);
}

TEST_CASE("training is deterministic and writes byte-identical checkpoints") {
  const ModelConfig c = tiny_config();
  const TrainConfig t = fast_train(3, 5.0);
  const Corpus corpus = tiny_corpus(5);
  const fs::path dir = fresh_dir("determinism");

  TrainOptions o1;
  o1.checkpoint_path = (dir / "a.ckpt").string();
  TrainOptions o2;
  o2.checkpoint_path = (dir / "b.ckpt").string();
  const TrainResult r1 = train(corpus, c, t, o1);
  const TrainResult r2 = train(corpus, c, t, o2);

  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));
  CHECK(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i)
    CHECK(r1.log[i].total == r2.log[i].total);
}

TEST_CASE("zero learning rate leaves the initialization untouched") {
  const ModelConfig c = tiny_config();
  TrainConfig t = fast_train(2, 5.0);
  t.learning_rate = 0.0;
  const Corpus corpus = tiny_corpus(6);
  const TrainResult r = train(corpus, c, t, {});

  Rng init_rng(mix_seed(t.seed, 1));
  ModelParams want = init_params(c, init_rng);
  auto ws = param_tensors(want);
  ModelParams got = r.params;
  auto gs = param_tensors(got);
  for (std::size_t i = 0; i < ws.size(); ++i)
    CHECK((ws[i].map() - gs[i].map()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("reconstruction drops over a short run") {
  const ModelConfig c = tiny_config();
  const TrainConfig t = fast_train(30, 0.0);
  const Corpus corpus = tiny_corpus(7);
  const TrainResult r = train(corpus, c, t, {});
  REQUIRE(!r.log.empty());
  const std::size_t per_epoch = r.log.size() / 30;
  REQUIRE(per_epoch > 0);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < per_epoch; ++i) {
    first += r.log[i].reconstruction;
    last += r.log[r.log.size() - per_epoch + i].reconstruction;
  }
  CHECK(last < first);
}

TEST_CASE("train rejects unusable corpora") {
  const ModelConfig c = tiny_config();
  const TrainConfig t = fast_train(1, 0.0);
  Corpus empty;
  CHECK_THROWS_AS(train(empty, c, t, {}), DataError);

  // Sequences shorter than one window yield no tasks.
  const Corpus stub = tiny_corpus(8, 2, 5);
  CHECK_THROWS_AS(train(stub, c, t, {}), DataError);

  // Dimension mismatch between corpus and config.
  const Corpus wrong_d = generate_synthetic_corpus(chain_skeleton(3, 3), 2, 30, 1);
  CHECK_THROWS_AS(train(wrong_d, c, t, {}), DataError);
}

TEST_CASE("training aborts with diagnostics when the loss explodes") {
  const ModelConfig c = tiny_config();
  TrainConfig t = fast_train(50, 5.0);
  t.learning_rate = 1e155;  // drives activations past the double range
  const Corpus corpus = tiny_corpus(9);
  CHECK_THROWS_AS(train(corpus, c, t, {}), NonFiniteLossError);
}

TEST_CASE("checkpoints round-trip parameters, config and normalizer exactly") {
  const ModelConfig c = tiny_config();
  Rng rng(77);
  ModelParams params = init_params(c, rng);
  Normalizer norm;
  norm.mean = rng.normal_vector(c.d);
  norm.std = rng.normal_vector(c.d).cwiseAbs().array() + 0.5;

  const fs::path path = fresh_dir("roundtrip") / "m.ckpt";
  save_checkpoint(path.string(), params, c, norm);
  const Checkpoint ck = load_checkpoint(path.string());

  CHECK(ck.config == c);
  auto want = param_tensors(params);
  ModelParams loaded = ck.params;
  auto got = param_tensors(loaded);
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK((want[i].map() - got[i].map()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ck.normalizer.mean - norm.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ck.normalizer.std - norm.std).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint loader rejects damaged files with precise errors") {
  const ModelConfig c = tiny_config();
  Rng rng(78);
  ModelParams params = init_params(c, rng);
  Normalizer norm;
  norm.mean = Eigen::VectorXd::Zero(c.d);
  norm.std = Eigen::VectorXd::Ones(c.d);
  const fs::path dir = fresh_dir("damage");
  const fs::path good = dir / "good.ckpt";
  save_checkpoint(good.string(), params, c, norm);
  const std::string bytes = slurp(good);

  const auto write_bytes = [&](const std::string& name, const std::string& content) {
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    return p.string();
  };

  // Wrong magic.
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  try {
    load_checkpoint(write_bytes("magic.ckpt", wrong_magic));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // Truncated payload.
  const std::string truncated = bytes.substr(0, bytes.size() / 2);
  try {
    load_checkpoint(write_bytes("trunc.ckpt", truncated));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("truncat") != std::string::npos);
  }

  // Header edited to a different d: first group's shape no longer matches.
  std::string wrong_d = bytes;
  const std::string needle = "d=" + std::to_string(c.d);
  wrong_d.replace(wrong_d.find(needle), needle.size(),
                  "d=" + std::to_string(c.d + 3));
  try {
    load_checkpoint(write_bytes("wrongd.ckpt", wrong_d));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("shape mismatch") != std::string::npos);
    CHECK(msg.find("cond.start.wr") != std::string::npos);
  }

  // Trailing garbage.
  try {
    load_checkpoint(write_bytes("trail.ckpt", bytes + "zz"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("trailing") != std::string::npos);
  }

  // Missing file.
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), DataError);
}

TEST_CASE("config files parse, override defaults and reject junk") {
  const fs::path dir = fresh_dir("config");
  const fs::path good = dir / "good.conf";
  {
    std::ofstream out(good);
    out << "# model geometry\n";
    out << "d = 6\n";
    out << "hidden_size = 8\n\n";
    out << "latent_size=3\n";
    out << "gap_length = 5\n";
    out << "condition_length = 2\n";
    out << "epochs = 12\n";
    out << "learning_rate = 0.002\n";
    out << "lambda = 1.5\n";
    out << "batch_size = 4\n";
    out << "seed = 99\n";
    out << "cap = 50\n";
    out << "checkpoint_every = 6\n";
    out << "window_stride = 3\n";
  }
  ModelConfig model;
  TrainConfig train_cfg;
  parse_config_file(good.string(), &model, &train_cfg);
  CHECK(model.d == 6);
  CHECK(model.hidden_size == 8);
  CHECK(model.latent_size == 3);
  CHECK(model.gap_length == 5);
  CHECK(model.condition_length == 2);
  CHECK(train_cfg.epochs == 12);
  CHECK(train_cfg.learning_rate == 0.002);
  CHECK(train_cfg.lambda == 1.5);
  CHECK(train_cfg.batch_size == 4);
  CHECK(train_cfg.seed == 99);
  CHECK(train_cfg.cap == 50);
  CHECK(train_cfg.checkpoint_every == 6);
  CHECK(train_cfg.window_stride == 3);

  const fs::path unknown = dir / "unknown.conf";
  {
    std::ofstream out(unknown);
    out << "d = 6\nwookie = 12\n";
  }
  ModelConfig m2;
  TrainConfig t2;
  try {
    parse_config_file(unknown.string(), &m2, &t2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("wookie") != std::string::npos);
    CHECK(msg.find(":2") != std::string::npos);
  }

  const fs::path bad_value = dir / "bad_value.conf";
  {
    std::ofstream out(bad_value);
    out << "epochs = soon\n";
  }
  CHECK_THROWS_AS(parse_config_file(bad_value.string(), &m2, &t2), DataError);

  const fs::path no_eq = dir / "no_eq.conf";
  {
    std::ofstream out(no_eq);
    out << "epochs 12\n";
  }
  CHECK_THROWS_AS(parse_config_file(no_eq.string(), &m2, &t2), DataError);

  CHECK_THROWS_AS(parse_config_file((dir / "missing.conf").string(), &m2, &t2),
                  DataError);
}

TEST_CASE("loss CSV has the documented columns and one row per step") {
  std::vector<LossBreakdown> log(2);
  log[0] = total_loss(1.0, 2.0, 0.5, 0.25, 5.0);
  log[1] = total_loss(0.5, 1.0, 0.5, 0.125, 5.0);
  const fs::path path = fresh_dir("csv") / "loss.csv";
  write_loss_csv(path.string(), log);
  const std::string got = slurp(path);
  CHECK(got ==
        "step,reconstruction,kl,diversity,coherence,total\n"
        "1,1,2,0.5,0.25,0.75\n"
        "2,0.5,1,0.5,0.125,-0.875\n");
}

TEST_CASE("checkpoint cadence writes intermediate files") {
  const ModelConfig c = tiny_config();
  TrainConfig t = fast_train(4, 0.0);
  t.checkpoint_every = 2;
  const Corpus corpus = tiny_corpus(10);
  const fs::path dir = fresh_dir("cadence");
  TrainOptions o;
  o.checkpoint_path = (dir / "m.ckpt").string();
  o.log_csv_path = (dir / "loss.csv").string();
  const TrainResult r = train(corpus, c, t, o);
  CHECK(fs::exists(dir / "m.ckpt"));
  CHECK(fs::exists(dir / "loss.csv"));
  const Checkpoint ck = load_checkpoint((dir / "m.ckpt").string());
  ModelParams final_params = r.params;
  ModelParams loaded = ck.params;
  auto a = param_tensors(final_params), b = param_tensors(loaded);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK((a[i].map() - b[i].map()).cwiseAbs().maxCoeff() == 0.0);
}
