#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "amr/tensor.hpp"

namespace amr {

/// One labeled instance: chronologically concatenated comment tokens, the
/// response tokens, and the binary label (1 = sarcastic).
struct Example {
  std::vector<std::string> comment_tokens;
  std::vector<std::string> response_tokens;
  int label = 0;
};

/// Lowercases, splits on whitespace, and isolates punctuation characters
/// into single-character tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Reads the JSONL corpus format: one object per line with keys `comments`
/// (array of strings, chronological), `response` (string), `label` (0/1).
/// Unknown keys are ignored. With require_label=false a missing label is
/// stored as -1 (prediction input).
std::vector<Example> load_corpus(const std::string& path, bool require_label = true);

/// Writes examples back out in the corpus JSONL format (whole comment as a
/// single entry).
void write_corpus(const std::string& path, const std::vector<Example>& examples);

/// Keeps the first n_cap comment tokens and m_cap response tokens.
Example truncate(const Example& e, int n_cap, int m_cap);

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> tokens;  // index -> token, [0]=<pad>, [1]=<unk>
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }
  int lookup(const std::string& token) const;
};

/// First-occurrence vocabulary over comment then response tokens of each
/// example in corpus order.
Vocabulary build_vocab(const std::vector<Example>& examples);

struct EmbeddingMatrix {
  Tensor values;  // [vocab_size x r]; row 0 (padding) all-zero
  bool trainable = true;
};

/// GloVe text format: `token v1 ... vr` per line. Vocab tokens found in the
/// file get the file's vector; the rest are uniform in [-0.05, 0.05] from
/// the seed. The padding row is zero.
EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                int r, std::uint64_t seed);

/// All-random initialization for runs without a pretrained file.
EmbeddingMatrix random_embeddings(const Vocabulary& vocab, int r, std::uint64_t seed);

/// Seeded shuffle, then holds out `fraction` as the validation split.
/// Returns (train, val); disjoint and exhaustive.
std::pair<std::vector<Example>, std::vector<Example>> split_train_val(
    const std::vector<Example>& examples, double fraction, std::uint64_t seed);

struct Batch {
  int size = 0;
  int n_max = 0;  // padded comment width
  int m_max = 0;  // padded response width
  std::vector<int> comment_ids;           // [size x n_max]
  std::vector<int> response_ids;          // [size x m_max]
  std::vector<std::uint8_t> comment_mask;  // true exactly at token positions
  std::vector<std::uint8_t> response_mask;
  std::vector<int> comment_len;
  std::vector<int> response_len;
  std::vector<int> labels;

  std::vector<int> comment_row(int b) const;
  std::vector<int> response_row(int b) const;
  std::vector<std::uint8_t> comment_row_mask(int b) const;
  std::vector<std::uint8_t> response_row_mask(int b) const;
};

/// Seeded shuffle, then fixed-size chunks padded to each batch's own max
/// lengths. Tokens map through the vocabulary (unknown -> index 1).
std::vector<Batch> make_batches(const std::vector<Example>& examples,
                                const Vocabulary& vocab, int batch_size,
                                std::uint64_t seed);

/// Builds a single batch from given examples in order (no shuffle).
Batch make_batch(const std::vector<Example>& examples, const Vocabulary& vocab);

struct ClassStats {
  long count = 0;
  std::optional<double> mean_comment_len;
  std::optional<double> mean_response_len;
};

struct CorpusStats {
  ClassStats per_class[2];
  long total() const { return per_class[0].count + per_class[1].count; }
};

CorpusStats compute_stats(const std::vector<Example>& examples);

/// Deterministic separable corpus: sarcastic responses contain a marker
/// token that never appears in non-sarcastic ones. Balanced labels.
std::vector<Example> make_synthetic_corpus(int n, int vocab_size,
                                           int max_comment_len, int max_response_len,
                                           std::uint64_t seed);

}  // namespace amr
