#include <cmath>
#include <cstring>

#include "amr/train.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace amr;

TEST_CASE("loss spot values") {
  Tensor perfect = Tensor::from({1, 2}, {0.0, 1.0});
  CHECK(loss(perfect, {1}).at(0) == 0.0);

  Tensor half = Tensor::from({1, 2}, {0.5, 0.5});
  CHECK(loss(half, {0}).at(0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor both = Tensor::from({2, 2}, {0.0, 1.0, 0.5, 0.5});
  CHECK(loss(both, {1, 0}).at(0) ==
        doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(loss(both, {1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(loss(both, {1}), std::invalid_argument);
}

TEST_CASE("adam_update spot values") {
  const double lr = 0.0001, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  SUBCASE("zero gradient is a no-op") {
    std::vector<double> w = {1.5, -2.0}, g = {0.0, 0.0}, m(2, 0.0), v(2, 0.0);
    adam_update(w, g, m, v, 1, lr, b1, b2, eps);
    CHECK(w == std::vector<double>{1.5, -2.0});
  }

  SUBCASE("t=1 unit gradient moves by ~lr") {
    std::vector<double> w = {0.0}, g = {1.0}, m(1, 0.0), v(1, 0.0);
    adam_update(w, g, m, v, 1, lr, b1, b2, eps);
    // one-step hand evaluation: m_hat = 1, v_hat = 1, step = lr/(1+eps)
    const double expected = -lr / (1.0 + eps);
    CHECK(w[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::fabs(w[0] + lr) < 1e-11);
  }

  SUBCASE("constant gradient reaches the lr-sized fixed point") {
    std::vector<double> w = {0.0}, m(1, 0.0), v(1, 0.0);
    std::vector<double> g = {1.0};
    double prev = 0.0;
    for (long t = 1; t <= 100; ++t) {
      adam_update(w, g, m, v, t, lr, b1, b2, eps);
      const double step = std::fabs(w[0] - prev);
      prev = w[0];
      CHECK(std::fabs(step - lr) < 1e-10);
    }
  }

  SUBCASE("finite gradients keep parameters finite") {
    std::vector<double> w = {1.0, -1.0}, g = {1e9, -1e-9}, m(2, 0.0), v(2, 0.0);
    for (long t = 1; t <= 10; ++t) adam_update(w, g, m, v, t, lr, b1, b2, eps);
    CHECK(std::isfinite(w[0]));
    CHECK(std::isfinite(w[1]));
  }

  SUBCASE("shape mismatch rejected") {
    std::vector<double> w = {1.0}, g = {1.0, 2.0}, m(1, 0.0), v(1, 0.0);
    CHECK_THROWS_AS(adam_update(w, g, m, v, 1, lr, b1, b2, eps),
                    std::invalid_argument);
  }
}

TEST_CASE("adam_step keeps frozen embeddings and the padding row fixed") {
  Vocabulary vocab = testutil::toy_vocab(9);
  ModelConfig config = testutil::toy_config();
  apply_variant(config, "frozen-embeddings");
  config.r = config.d = 4;
  AmrParams params = testutil::toy_model(config, vocab, 23);
  const std::vector<double> emb_before = *params.embeddings.values.data;

  std::mt19937_64 rng(24);
  Batch batch = testutil::toy_batch(2, 3, 2, vocab.size(), rng);
  AdamState state;
  for (int step = 0; step < 3; ++step) {
    Tape tape;
    watch_parameters(tape, params);
    ForwardResult out = forward(params, config, batch);
    tape.backward(loss(out.probabilities, batch.labels));
    adam_step(params, tape, state, 1e-3);
  }
  CHECK(std::memcmp(params.embeddings.values.ptr(), emb_before.data(),
                    emb_before.size() * sizeof(double)) == 0);

  // trainable run: padding row stays zero while other rows move
  ModelConfig config2 = testutil::toy_config();
  AmrParams params2 = testutil::toy_model(config2, vocab, 23);
  AdamState state2;
  for (int step = 0; step < 3; ++step) {
    Tape tape;
    watch_parameters(tape, params2);
    ForwardResult out = forward(params2, config2, batch);
    tape.backward(loss(out.probabilities, batch.labels));
    adam_step(params2, tape, state2, 1e-3);
  }
  for (int j = 0; j < config2.r; ++j) CHECK(params2.embeddings.values.at(j) == 0.0);
}

TEST_CASE("loss near ln 2 on a fresh balanced batch") {
  Vocabulary vocab = testutil::toy_vocab(20);
  ModelConfig config = testutil::toy_config();
  AmrParams params = testutil::toy_model(config, vocab, 29);
  std::mt19937_64 rng(30);
  Batch batch = testutil::toy_batch(8, 4, 3, vocab.size(), rng);
  for (int b = 0; b < batch.size; ++b) batch.labels[b] = b % 2;

  ForwardResult out = forward(params, config, batch);
  const double l = loss(out.probabilities, batch.labels).at(0);
  CHECK(std::fabs(l - std::log(2.0)) < 0.2);
}

TEST_CASE("train_loop determinism and early stopping") {
  auto corpus = make_synthetic_corpus(24, 20, 6, 6, 99);
  Vocabulary vocab = build_vocab(corpus);
  ModelConfig config;
  config.r = config.d = 8;
  config.n_cap = 6;
  config.m_cap = 6;

  TrainConfig tcfg;
  tcfg.learning_rate = 1e-3;
  tcfg.batch_size = 8;
  tcfg.max_epochs = 4;
  tcfg.patience = 5;
  tcfg.seed = 7;

  auto run = [&] {
    AmrParams init = testutil::toy_model(config, vocab, 31);
    std::vector<Example> train(corpus.begin(), corpus.begin() + 16);
    std::vector<Example> val(corpus.begin() + 16, corpus.end());
    return train_loop(config, std::move(init), vocab, train, val, tcfg);
  };

  TrainResult a = run();
  TrainResult b = run();
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);  // bit-identical
    CHECK(a.history[i].val_accuracy == b.history[i].val_accuracy);
  }

  testutil::TempDir dir("hist");
  write_history(dir.file("a.jsonl"), a.history);
  write_history(dir.file("b.jsonl"), b.history);
  CHECK(testutil::read_file(dir.file("a.jsonl")) ==
        testutil::read_file(dir.file("b.jsonl")));

  // patience 0 stops after the first non-improving epoch
  TrainConfig impatient = tcfg;
  impatient.patience = 0;
  impatient.max_epochs = 50;
  AmrParams init = testutil::toy_model(config, vocab, 31);
  std::vector<Example> train(corpus.begin(), corpus.begin() + 16);
  std::vector<Example> val(corpus.begin() + 16, corpus.end());
  TrainResult c = train_loop(config, std::move(init), vocab, train, val, impatient);
  REQUIRE(!c.history.empty());
  std::size_t first_stale = c.history.size();
  double best = -1.0;
  for (std::size_t i = 0; i < c.history.size(); ++i) {
    if (c.history[i].val_accuracy > best) {
      best = c.history[i].val_accuracy;
    } else {
      first_stale = i;
      break;
    }
  }
  CHECK(c.history.size() == first_stale + 1);

  CHECK_THROWS_AS(train_loop(config, testutil::toy_model(config, vocab, 31), vocab,
                             {}, val, tcfg),
                  std::invalid_argument);
}

TEST_CASE("overfit smoke test on a small separable set") {
  auto corpus = make_synthetic_corpus(16, 20, 5, 5, 123);
  Vocabulary vocab = build_vocab(corpus);
  ModelConfig config;
  config.r = config.d = 8;
  config.n_cap = 5;
  config.m_cap = 5;

  TrainConfig tcfg;
  tcfg.learning_rate = 1e-3;
  tcfg.batch_size = 16;
  tcfg.max_epochs = 150;
  tcfg.patience = 1000;
  tcfg.seed = 3;

  AmrParams init = testutil::toy_model(config, vocab, 37);
  TrainResult result = train_loop(config, std::move(init), vocab, corpus, corpus, tcfg);
  double best = 0.0;
  for (const EpochRecord& r : result.history) best = std::max(best, r.val_accuracy);
  CHECK(best >= 0.95);
}

TEST_CASE("checkpoint round-trip") {
  Vocabulary vocab = testutil::toy_vocab(9);
  ModelConfig config = testutil::toy_config();
  config.path_mode = PathMode::both;
  AmrParams params = testutil::toy_model(config, vocab, 41);
  testutil::TempDir dir("ckpt");

  const std::string first = dir.file("model.ckpt");
  save_checkpoint(params, config, vocab, first);
  Checkpoint loaded = load_checkpoint(first);
  CHECK(loaded.config.d == config.d);
  CHECK(loaded.config.path_mode == config.path_mode);
  CHECK(loaded.vocab.tokens == vocab.tokens);

  // save -> load -> save is byte-identical
  const std::string second = dir.file("model2.ckpt");
  save_checkpoint(loaded.params, loaded.config, loaded.vocab, second);
  CHECK(testutil::read_file(first) == testutil::read_file(second));

  // restored inference within 32-bit rounding
  std::mt19937_64 rng(42);
  Batch batch = testutil::toy_batch(3, 4, 3, vocab.size(), rng);
  ForwardResult a = forward(params, config, batch);
  ForwardResult b = forward(loaded.params, loaded.config, batch);
  for (std::size_t i = 0; i < a.probabilities.size(); ++i) {
    CHECK(std::fabs(a.probabilities.at(i) - b.probabilities.at(i)) < 1e-5);
  }

  // corrupted magic rejected
  std::string bytes = testutil::read_file(first);
  bytes[0] = 'X';
  testutil::write_file(dir.file("bad.ckpt"), bytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("bad.ckpt")),
                       doctest::Contains("magic"), std::runtime_error);

  // wrong version rejected
  std::string vbytes = testutil::read_file(first);
  vbytes[8] = 99;
  testutil::write_file(dir.file("ver.ckpt"), vbytes);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("ver.ckpt")),
                       doctest::Contains("version"), std::runtime_error);

  // truncated file rejected
  testutil::write_file(dir.file("trunc.ckpt"), bytes.substr(0, 40));
  CHECK_THROWS_AS(load_checkpoint(dir.file("trunc.ckpt")), std::runtime_error);
}

TEST_CASE("sub_seed separates named streams") {
  CHECK(sub_seed(1, "init") != sub_seed(1, "shuffle"));
  CHECK(sub_seed(1, "init") != sub_seed(2, "init"));
  CHECK(sub_seed(5, "dropout") == sub_seed(5, "dropout"));
}
