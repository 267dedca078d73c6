#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "amr/data.hpp"
#include "amr/model.hpp"

namespace testutil {

inline amr::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  return amr::Tensor::uniform(std::move(shape), lo, hi, rng);
}

/// Toy dimensions used across the gradient and attention suites.
inline amr::ModelConfig toy_config() {
  amr::ModelConfig c;
  c.r = 4;
  c.d = 4;
  c.n_cap = 8;
  c.m_cap = 8;
  return c;
}

inline amr::Vocabulary toy_vocab(int size = 7) {
  std::vector<amr::Example> seed;
  amr::Example e;
  for (int i = 0; i < size - 2; ++i) e.comment_tokens.push_back("t" + std::to_string(i));
  e.response_tokens = {"t0"};
  e.label = 0;
  seed.push_back(e);
  return amr::build_vocab(seed);
}

inline amr::AmrParams toy_model(const amr::ModelConfig& config,
                                const amr::Vocabulary& vocab, std::uint64_t seed) {
  amr::EmbeddingMatrix em = amr::random_embeddings(vocab, config.r, seed + 17);
  return amr::init_model(config, vocab, em, seed);
}

/// Batch of `size` random examples at the given true lengths (vocab ids
/// drawn from [1, vocab_size)).
inline amr::Batch toy_batch(int size, int n, int m, int vocab_size,
                            std::mt19937_64& rng) {
  amr::Batch batch;
  batch.size = size;
  batch.n_max = n;
  batch.m_max = m;
  std::uniform_int_distribution<int> tok(1, vocab_size - 1);
  std::uniform_int_distribution<int> lab(0, 1);
  for (int b = 0; b < size; ++b) {
    batch.comment_len.push_back(n);
    batch.response_len.push_back(m);
    batch.labels.push_back(lab(rng));
    for (int t = 0; t < n; ++t) {
      batch.comment_ids.push_back(tok(rng));
      batch.comment_mask.push_back(1);
    }
    for (int t = 0; t < m; ++t) {
      batch.response_ids.push_back(tok(rng));
      batch.response_mask.push_back(1);
    }
  }
  return batch;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("amr_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  out << contents;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil
