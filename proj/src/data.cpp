#include "amr/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace amr {

namespace {

using nlohmann::json;

[[noreturn]] void corpus_error(const std::string& path, std::size_t line,
                               const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    } else {
      current += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return tokens;
}

std::vector<Example> load_corpus(const std::string& path, bool require_label) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);

  std::vector<Example> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      corpus_error(path, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object() || !obj.contains("comments") || !obj.contains("response")) {
      corpus_error(path, line_no, "expected object with `comments` and `response`");
    }
    if (!obj["comments"].is_array()) {
      corpus_error(path, line_no, "`comments` must be an array of strings");
    }

    std::string comment_text;
    for (const auto& c : obj["comments"]) {
      if (!c.is_string()) corpus_error(path, line_no, "`comments` entries must be strings");
      if (!comment_text.empty()) comment_text += ' ';
      comment_text += c.get<std::string>();
    }

    Example e;
    e.comment_tokens = tokenize(comment_text);
    e.response_tokens = tokenize(obj["response"].get<std::string>());

    if (obj.contains("label")) {
      if (!obj["label"].is_number_integer()) {
        corpus_error(path, line_no, "`label` must be an integer");
      }
      const int label = obj["label"].get<int>();
      if (label != 0 && label != 1) {
        corpus_error(path, line_no, "unknown label value " + std::to_string(label));
      }
      e.label = label;
    } else if (require_label) {
      corpus_error(path, line_no, "missing `label`");
    } else {
      e.label = -1;
    }

    if (e.comment_tokens.empty()) {
      corpus_error(path, line_no, "empty comment after tokenization");
    }
    if (e.response_tokens.empty()) {
      corpus_error(path, line_no, "empty response after tokenization");
    }
    examples.push_back(std::move(e));
  }
  return examples;
}

void write_corpus(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const Example& e : examples) {
    json obj;
    obj["comments"] = json::array({join_tokens(e.comment_tokens)});
    obj["response"] = join_tokens(e.response_tokens);
    if (e.label >= 0) obj["label"] = e.label;
    out << obj.dump() << '\n';
  }
}

Example truncate(const Example& e, int n_cap, int m_cap) {
  if (n_cap <= 0 || m_cap <= 0) {
    throw std::invalid_argument("truncate: caps must be positive");
  }
  Example out;
  out.label = e.label;
  const std::size_t n = std::min<std::size_t>(e.comment_tokens.size(), n_cap);
  const std::size_t m = std::min<std::size_t>(e.response_tokens.size(), m_cap);
  out.comment_tokens.assign(e.comment_tokens.begin(), e.comment_tokens.begin() + n);
  out.response_tokens.assign(e.response_tokens.begin(), e.response_tokens.begin() + m);
  return out;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index.find(token);
  return it == index.end() ? kUnk : it->second;
}

Vocabulary build_vocab(const std::vector<Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  Vocabulary v;
  v.tokens = {"<pad>", "<unk>"};
  v.index[v.tokens[0]] = Vocabulary::kPad;
  v.index[v.tokens[1]] = Vocabulary::kUnk;
  auto admit = [&](const std::string& token) {
    if (v.index.emplace(token, v.size()).second) v.tokens.push_back(token);
  };
  for (const Example& e : examples) {
    for (const auto& t : e.comment_tokens) admit(t);
    for (const auto& t : e.response_tokens) admit(t);
  }
  return v;
}

namespace {

void randomize_row(double* row, int r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.05, 0.05);
  for (int j = 0; j < r; ++j) row[j] = dist(rng);
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::string& path, const Vocabulary& vocab,
                                int r, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  EmbeddingMatrix em = random_embeddings(vocab, r, seed);
  double* values = em.values.ptr();

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    auto it = vocab.index.find(token);
    std::vector<double> vec;
    vec.reserve(r);
    double v;
    while (ss >> v) vec.push_back(v);
    if (static_cast<int>(vec.size()) != r) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(r) + " values, got " +
                               std::to_string(vec.size()));
    }
    if (it == vocab.index.end()) continue;
    const int row = it->second;
    if (row == Vocabulary::kPad) continue;  // padding row stays zero
    std::copy(vec.begin(), vec.end(), values + static_cast<std::size_t>(row) * r);
  }
  return em;
}

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, int r, std::uint64_t seed) {
  EmbeddingMatrix em;
  em.values = Tensor::zeros({vocab.size(), r});
  em.values.requires_grad = true;
  std::mt19937_64 rng(seed);
  double* values = em.values.ptr();
  for (int row = 1; row < vocab.size(); ++row) {  // row 0 (padding) stays zero
    randomize_row(values + static_cast<std::size_t>(row) * r, r, rng);
  }
  return em;
}

std::pair<std::vector<Example>, std::vector<Example>> split_train_val(
    const std::vector<Example>& examples, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("split_train_val: fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(fraction * examples.size()));
  std::vector<Example> val, train;
  val.reserve(n_val);
  train.reserve(examples.size() - n_val);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train).push_back(examples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

std::vector<int> Batch::comment_row(int b) const {
  return {comment_ids.begin() + static_cast<std::size_t>(b) * n_max,
          comment_ids.begin() + static_cast<std::size_t>(b + 1) * n_max};
}

std::vector<int> Batch::response_row(int b) const {
  return {response_ids.begin() + static_cast<std::size_t>(b) * m_max,
          response_ids.begin() + static_cast<std::size_t>(b + 1) * m_max};
}

std::vector<std::uint8_t> Batch::comment_row_mask(int b) const {
  return {comment_mask.begin() + static_cast<std::size_t>(b) * n_max,
          comment_mask.begin() + static_cast<std::size_t>(b + 1) * n_max};
}

std::vector<std::uint8_t> Batch::response_row_mask(int b) const {
  return {response_mask.begin() + static_cast<std::size_t>(b) * m_max,
          response_mask.begin() + static_cast<std::size_t>(b + 1) * m_max};
}

Batch make_batch(const std::vector<Example>& examples, const Vocabulary& vocab) {
  Batch batch;
  batch.size = static_cast<int>(examples.size());
  for (const Example& e : examples) {
    batch.n_max = std::max(batch.n_max, static_cast<int>(e.comment_tokens.size()));
    batch.m_max = std::max(batch.m_max, static_cast<int>(e.response_tokens.size()));
    batch.comment_len.push_back(static_cast<int>(e.comment_tokens.size()));
    batch.response_len.push_back(static_cast<int>(e.response_tokens.size()));
    batch.labels.push_back(e.label);
  }
  batch.comment_ids.assign(static_cast<std::size_t>(batch.size) * batch.n_max,
                           Vocabulary::kPad);
  batch.response_ids.assign(static_cast<std::size_t>(batch.size) * batch.m_max,
                            Vocabulary::kPad);
  batch.comment_mask.assign(batch.comment_ids.size(), 0);
  batch.response_mask.assign(batch.response_ids.size(), 0);
  for (int b = 0; b < batch.size; ++b) {
    const Example& e = examples[b];
    for (std::size_t t = 0; t < e.comment_tokens.size(); ++t) {
      batch.comment_ids[static_cast<std::size_t>(b) * batch.n_max + t] =
          vocab.lookup(e.comment_tokens[t]);
      batch.comment_mask[static_cast<std::size_t>(b) * batch.n_max + t] = 1;
    }
    for (std::size_t t = 0; t < e.response_tokens.size(); ++t) {
      batch.response_ids[static_cast<std::size_t>(b) * batch.m_max + t] =
          vocab.lookup(e.response_tokens[t]);
      batch.response_mask[static_cast<std::size_t>(b) * batch.m_max + t] = 1;
    }
  }
  return batch;
}

std::vector<Batch> make_batches(const std::vector<Example>& examples,
                                const Vocabulary& vocab, int batch_size,
                                std::uint64_t seed) {
  if (batch_size <= 0) throw std::invalid_argument("make_batches: batch size must be positive");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Example> chunk;
    chunk.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) chunk.push_back(examples[order[i]]);
    batches.push_back(make_batch(chunk, vocab));
  }
  return batches;
}

CorpusStats compute_stats(const std::vector<Example>& examples) {
  CorpusStats stats;
  double comment_sum[2] = {0.0, 0.0};
  double response_sum[2] = {0.0, 0.0};
  for (const Example& e : examples) {
    const int y = e.label;
    if (y != 0 && y != 1) continue;
    stats.per_class[y].count += 1;
    comment_sum[y] += static_cast<double>(e.comment_tokens.size());
    response_sum[y] += static_cast<double>(e.response_tokens.size());
  }
  for (int y = 0; y < 2; ++y) {
    if (stats.per_class[y].count > 0) {
      stats.per_class[y].mean_comment_len = comment_sum[y] / stats.per_class[y].count;
      stats.per_class[y].mean_response_len = response_sum[y] / stats.per_class[y].count;
    }
  }
  return stats;
}

std::vector<Example> make_synthetic_corpus(int n, int vocab_size,
                                           int max_comment_len, int max_response_len,
                                           std::uint64_t seed) {
  if (n <= 0 || vocab_size < 4 || max_comment_len < 1 || max_response_len < 2) {
    throw std::invalid_argument("make_synthetic_corpus: degenerate parameters");
  }
  std::mt19937_64 rng(seed);
  // w0 is the sarcasm marker; fillers are w1..w{vocab_size-1}.
  std::uniform_int_distribution<int> filler(1, vocab_size - 1);
  std::uniform_int_distribution<int> clen(1, max_comment_len);
  std::uniform_int_distribution<int> rlen(2, max_response_len);

  std::vector<Example> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Example e;
    e.label = i % 2;
    const int nc = clen(rng);
    for (int t = 0; t < nc; ++t) e.comment_tokens.push_back("w" + std::to_string(filler(rng)));
    const int nr = rlen(rng);
    for (int t = 0; t < nr; ++t) e.response_tokens.push_back("w" + std::to_string(filler(rng)));
    if (e.label == 1) {
      std::uniform_int_distribution<int> pos(0, nr - 1);
      e.response_tokens[pos(rng)] = "w0";
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace amr
