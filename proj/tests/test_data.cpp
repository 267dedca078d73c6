#include <algorithm>
#include <cmath>
#include <set>

#include "amr/data.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace amr;

TEST_CASE("tokenize") {
  CHECK(tokenize("Don't stop!") ==
        std::vector<std::string>{"don", "'", "t", "stop", "!"});
  CHECK(tokenize("  a   b ") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("").empty());

  // idempotent on already-tokenized, lowercased, space-joined text
  auto once = tokenize("He said: DON'T!");
  std::string joined;
  for (std::size_t i = 0; i < once.size(); ++i) {
    if (i) joined += ' ';
    joined += once[i];
  }
  CHECK(tokenize(joined) == once);
}

TEST_CASE("load_corpus") {
  testutil::TempDir dir("corpus");
  const std::string path = dir.file("train.jsonl");

  SUBCASE("schema") {
    testutil::write_file(path,
        R"({"comments":["a b","c"],"response":"d e","label":1})" "\n"
        R"({"comments":["x"],"response":"y","label":0,"extra":42})" "\n");
    auto examples = load_corpus(path);
    REQUIRE(examples.size() == 2);
    CHECK(examples[0].comment_tokens == std::vector<std::string>{"a", "b", "c"});
    CHECK(examples[0].response_tokens == std::vector<std::string>{"d", "e"});
    CHECK(examples[0].label == 1);
    CHECK(examples[1].label == 0);
  }

  SUBCASE("empty response rejected with line number") {
    testutil::write_file(path,
        R"({"comments":["a"],"response":"b","label":0})" "\n"
        R"({"comments":["a"],"response":"   ","label":0})" "\n");
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains(":2:"),
                         std::runtime_error);
  }

  SUBCASE("unknown label value") {
    testutil::write_file(path, R"({"comments":["a"],"response":"b","label":3})" "\n");
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("label"),
                         std::runtime_error);
  }

  SUBCASE("malformed line carries its number") {
    testutil::write_file(path, "{not json}\n");
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains(":1:"),
                         std::runtime_error);
  }

  SUBCASE("label optional for prediction input") {
    testutil::write_file(path, R"({"comments":["a"],"response":"b"})" "\n");
    CHECK_THROWS_AS(load_corpus(path, true), std::runtime_error);
    auto examples = load_corpus(path, false);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].label == -1);
  }

  SUBCASE("missing file names the path") {
    CHECK_THROWS_WITH_AS(load_corpus(dir.file("absent.jsonl")),
                         doctest::Contains("absent.jsonl"), std::runtime_error);
  }
}

TEST_CASE("truncate") {
  Example e;
  for (int i = 0; i < 250; ++i) e.comment_tokens.push_back("c" + std::to_string(i));
  for (int i = 0; i < 50; ++i) e.response_tokens.push_back("r" + std::to_string(i));
  e.label = 1;

  Example t = truncate(e, 200, 100);
  CHECK(t.comment_tokens.size() == 200);
  CHECK(t.comment_tokens.front() == "c0");
  CHECK(t.comment_tokens.back() == "c199");
  CHECK(t.response_tokens.size() == 50);

  Example tiny = truncate(e, 1, 1);
  CHECK(tiny.comment_tokens == std::vector<std::string>{"c0"});
  CHECK(tiny.response_tokens == std::vector<std::string>{"r0"});

  CHECK_THROWS_AS(truncate(e, 0, 1), std::invalid_argument);
}

TEST_CASE("build_vocab") {
  Example e1, e2;
  e1.comment_tokens = {"a", "b"};
  e1.response_tokens = {"b"};
  e2.comment_tokens = {"b"};
  e2.response_tokens = {"c"};
  std::vector<Example> corpus = {e1, e2};

  Vocabulary v = build_vocab(corpus);
  CHECK(v.size() == 5);
  CHECK(v.lookup("<pad>") == 0);
  CHECK(v.lookup("<unk>") == 1);
  CHECK(v.lookup("a") == 2);
  CHECK(v.lookup("b") == 3);
  CHECK(v.lookup("c") == 4);
  CHECK(v.lookup("zzz") == Vocabulary::kUnk);

  Vocabulary again = build_vocab(corpus);
  CHECK(again.tokens == v.tokens);

  CHECK_THROWS_AS(build_vocab({}), std::invalid_argument);
}

TEST_CASE("embeddings") {
  testutil::TempDir dir("glove");
  const std::string path = dir.file("vectors.txt");

  Example e;
  e.comment_tokens = {"alpha", "beta"};
  e.response_tokens = {"gamma"};
  Vocabulary vocab = build_vocab({e});

  SUBCASE("file rows copied, OOV random, padding zero") {
    testutil::write_file(path,
                         "alpha 1 2 3\n"
                         "other 9 9 9\n"
                         "gamma -1 0.5 2\n");
    EmbeddingMatrix em = load_embeddings(path, vocab, 3, 99);
    const int a = vocab.lookup("alpha");
    CHECK(em.values.at(a * 3 + 0) == 1.0);
    CHECK(em.values.at(a * 3 + 1) == 2.0);
    CHECK(em.values.at(a * 3 + 2) == 3.0);
    const int g = vocab.lookup("gamma");
    CHECK(em.values.at(g * 3 + 0) == -1.0);

    for (int j = 0; j < 3; ++j) CHECK(em.values.at(j) == 0.0);  // padding row

    const int b = vocab.lookup("beta");  // not in file
    for (int j = 0; j < 3; ++j) CHECK(std::fabs(em.values.at(b * 3 + j)) <= 0.05);
  }

  SUBCASE("wrong width names the line") {
    testutil::write_file(path, "alpha 1 2 3\nbeta 1 2\n");
    CHECK_THROWS_WITH_AS(load_embeddings(path, vocab, 3, 99),
                         doctest::Contains(":2:"), std::runtime_error);
  }

  SUBCASE("random init bound and padding") {
    EmbeddingMatrix em = random_embeddings(vocab, 4, 7);
    for (int j = 0; j < 4; ++j) CHECK(em.values.at(j) == 0.0);
    for (std::size_t i = 4; i < em.values.size(); ++i) {
      CHECK(std::fabs(em.values.at(i)) <= 0.05);
    }
  }
}

TEST_CASE("split_train_val") {
  std::vector<Example> corpus;
  for (int i = 0; i < 100; ++i) {
    Example e;
    e.comment_tokens = {"c" + std::to_string(i)};
    e.response_tokens = {"r"};
    e.label = i % 2;
    corpus.push_back(e);
  }

  auto [train, val] = split_train_val(corpus, 0.10, 5);
  CHECK(train.size() == 90);
  CHECK(val.size() == 10);

  auto [train2, val2] = split_train_val(corpus, 0.10, 5);
  for (std::size_t i = 0; i < val.size(); ++i) {
    CHECK(val2[i].comment_tokens == val[i].comment_tokens);
  }

  // partition: union of outputs equals the input multiset
  std::multiset<std::string> all, split_tokens;
  for (const auto& e : corpus) all.insert(e.comment_tokens[0]);
  for (const auto& e : train) split_tokens.insert(e.comment_tokens[0]);
  for (const auto& e : val) split_tokens.insert(e.comment_tokens[0]);
  CHECK(all == split_tokens);

  CHECK_THROWS_AS(split_train_val(corpus, 0.0, 1), std::invalid_argument);
}

TEST_CASE("make_batches") {
  std::vector<Example> corpus;
  for (int i = 0; i < 33; ++i) {
    Example e;
    for (int t = 0; t <= i % 4; ++t) e.comment_tokens.push_back("c" + std::to_string(t));
    e.response_tokens = {"r0", "r1"};
    e.label = i % 2;
    corpus.push_back(e);
  }
  Vocabulary vocab = build_vocab(corpus);

  auto batches = make_batches(corpus, vocab, 32, 9);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].size == 32);
  CHECK(batches[1].size == 1);

  for (const Batch& batch : batches) {
    for (int b = 0; b < batch.size; ++b) {
      auto mask = batch.comment_row_mask(b);
      // true-prefix, and mask agrees with stored lengths
      int len = 0;
      bool in_prefix = true;
      for (std::uint8_t v : mask) {
        if (v) {
          CHECK(in_prefix);
          ++len;
        } else {
          in_prefix = false;
        }
      }
      CHECK(len == batch.comment_len[b]);
      // padding positions hold the padding id
      auto ids = batch.comment_row(b);
      for (int t = len; t < batch.n_max; ++t) CHECK(ids[t] == Vocabulary::kPad);
    }
  }

  // explicit padding rule: lengths (3, 5) give width 5 and mask 1,1,1,0,0
  Example a, b;
  a.comment_tokens = {"x", "x", "x"};
  a.response_tokens = {"r0"};
  b.comment_tokens = {"x", "x", "x", "x", "x"};
  b.response_tokens = {"r0"};
  Batch two = make_batch({a, b}, vocab);
  CHECK(two.n_max == 5);
  CHECK(two.comment_row_mask(0) == std::vector<std::uint8_t>{1, 1, 1, 0, 0});
}

TEST_CASE("compute_stats") {
  Example a, b, c, d;
  a.comment_tokens.assign(10, "x");
  a.response_tokens.assign(4, "y");
  a.label = 1;
  b.comment_tokens.assign(20, "x");
  b.response_tokens.assign(6, "y");
  b.label = 1;
  c.comment_tokens.assign(8, "x");
  c.response_tokens.assign(2, "y");
  c.label = 0;
  d.comment_tokens.assign(12, "x");
  d.response_tokens.assign(2, "y");
  d.label = 0;

  CorpusStats stats = compute_stats({a, b, c, d});
  CHECK(stats.per_class[1].count == 2);
  CHECK(*stats.per_class[1].mean_comment_len == doctest::Approx(15.0));
  CHECK(*stats.per_class[1].mean_response_len == doctest::Approx(5.0));
  CHECK(stats.per_class[0].count == 2);
  CHECK(*stats.per_class[0].mean_comment_len == doctest::Approx(10.0));

  CorpusStats one_sided = compute_stats({a, b});
  CHECK(one_sided.per_class[0].count == 0);
  CHECK_FALSE(one_sided.per_class[0].mean_comment_len.has_value());
}

TEST_CASE("synthetic corpus is balanced, separable and writable") {
  auto corpus = make_synthetic_corpus(32, 50, 10, 10, 1234);
  REQUIRE(corpus.size() == 32);
  long pos = 0;
  for (const Example& e : corpus) {
    const bool has_marker =
        std::find(e.response_tokens.begin(), e.response_tokens.end(), "w0") !=
        e.response_tokens.end();
    CHECK(has_marker == (e.label == 1));
    pos += e.label;
  }
  CHECK(pos == 16);

  auto again = make_synthetic_corpus(32, 50, 10, 10, 1234);
  CHECK(again[7].comment_tokens == corpus[7].comment_tokens);

  testutil::TempDir dir("synth");
  const std::string path = dir.file("synth.jsonl");
  write_corpus(path, corpus);
  auto loaded = load_corpus(path);
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].comment_tokens == corpus[i].comment_tokens);
    CHECK(loaded[i].response_tokens == corpus[i].response_tokens);
    CHECK(loaded[i].label == corpus[i].label);
  }
}
