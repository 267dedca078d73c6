#include "amr/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace amr {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning rate must be positive");
  if (batch_size <= 0) throw std::invalid_argument("train config: batch size must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("train config: dropout rate must be in [0, 1)");
  }
  if (max_epochs <= 0) throw std::invalid_argument("train config: max epochs must be positive");
  if (patience < 0) throw std::invalid_argument("train config: patience must be non-negative");
}

Tensor loss(const Tensor& probabilities, const std::vector<int>& labels) {
  return nll_mean(probabilities, labels);
}

void adam_update(std::vector<double>& value, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, long t, double lr,
                 double beta1, double beta2, double epsilon) {
  if (value.size() != grad.size() || m.size() != value.size() || v.size() != value.size()) {
    throw std::invalid_argument("adam_update: shape mismatch between value, grad and moments");
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    value[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

void adam_step(AmrParams& params, const Tape& tape, AdamState& state, double lr) {
  state.step += 1;
  for (auto& [name, tensor] : params.named()) {
    if (name == "embeddings" && !params.embeddings.trainable) continue;
    std::vector<double> grad = tape.grad(*tensor);
    if (name == "embeddings") {
      // padding row never moves
      const int r = tensor->shape[1];
      std::fill(grad.begin(), grad.begin() + r, 0.0);
    }
    auto& [m, v] = state.moments[name];
    if (m.empty()) {
      m.assign(tensor->size(), 0.0);
      v.assign(tensor->size(), 0.0);
    }
    adam_update(*tensor->data, grad, m, v, state.step, lr, state.beta1, state.beta2,
                state.epsilon);
  }
}

double dataset_accuracy(const AmrParams& params, const ModelConfig& config,
                        const Vocabulary& vocab, const std::vector<Example>& examples,
                        int batch_size) {
  if (examples.empty()) return 0.0;
  long correct = 0;
  for (std::size_t start = 0; start < examples.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<Example> chunk(examples.begin() + start, examples.begin() + end);
    Batch batch = make_batch(chunk, vocab);
    ForwardResult out = forward(params, config, batch);
    for (int b = 0; b < batch.size; ++b) {
      const int pred = argmax_label(out.probabilities.at(b * 2),
                                    out.probabilities.at(b * 2 + 1));
      if (pred == batch.labels[b]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train_loop(const ModelConfig& config, AmrParams initial,
                       const Vocabulary& vocab, const std::vector<Example>& train_set,
                       const std::vector<Example>& val_set, const TrainConfig& tcfg) {
  config.validate();
  tcfg.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train_loop: splits must be non-empty");
  }

  AmrParams params = std::move(initial);
  AdamState state;
  std::mt19937_64 dropout_rng(sub_seed(tcfg.seed, "dropout"));
  const std::uint64_t shuffle_seed = sub_seed(tcfg.seed, "shuffle");

  TrainResult result;
  result.best_params = params.clone();
  result.best_val_accuracy = -1.0;
  int stale = 0;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    std::vector<Batch> batches =
        make_batches(train_set, vocab, tcfg.batch_size, shuffle_seed + epoch);

    double nll_sum = 0.0;
    for (const Batch& batch : batches) {
      Tape tape;
      watch_parameters(tape, params);
      ForwardOptions opt;
      opt.training = true;
      opt.dropout_rate = tcfg.dropout_rate;
      opt.rng = &dropout_rng;
      ForwardResult out = forward(params, config, batch, opt);
      Tensor batch_loss = loss(out.probabilities, batch.labels);
      tape.backward(batch_loss);
      adam_step(params, tape, state, tcfg.learning_rate);
      nll_sum += batch_loss.at(0) * batch.size;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = nll_sum / static_cast<double>(train_set.size());
    record.val_accuracy =
        dataset_accuracy(params, config, vocab, val_set, tcfg.batch_size);
    result.history.push_back(record);

    if (record.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = record.val_accuracy;
      result.best_epoch = epoch;
      result.best_params = params.clone();
      stale = 0;
    } else {
      ++stale;
      if (stale > tcfg.patience) break;
    }
  }
  return result;
}

void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const EpochRecord& r : history) {
    nlohmann::json obj;
    obj["epoch"] = r.epoch;
    obj["train_loss"] = r.train_loss;
    obj["val_accuracy"] = r.val_accuracy;
    out << obj.dump() << '\n';
  }
}

// ------------------------------------------------------------- checkpoint

namespace {

constexpr char kMagic[8] = {'A', 'M', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr char kGateOrder[4] = {'i', 'f', 'g', 'o'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  char byte() {
    need(1);
    return buf[pos++];
  }
};

void put_config(std::string& out, const ModelConfig& c) {
  put_u32(out, static_cast<std::uint32_t>(c.r));
  put_u32(out, static_cast<std::uint32_t>(c.d));
  put_u32(out, static_cast<std::uint32_t>(c.n_cap));
  put_u32(out, static_cast<std::uint32_t>(c.m_cap));
  out.push_back(static_cast<char>(c.path_mode));
  out.push_back(static_cast<char>(c.use_attention));
  out.push_back(static_cast<char>(c.use_rereading));
  out.push_back(static_cast<char>(c.aug_identity));
  out.push_back(static_cast<char>(c.aug_diff));
  out.push_back(static_cast<char>(c.aug_prod));
  out.push_back(static_cast<char>(c.train_embeddings));
  out.push_back(static_cast<char>(c.untie_encoder));
  out.push_back(static_cast<char>(c.untie_projection));
  out.push_back(static_cast<char>(c.untie_reread_conv));
}

ModelConfig read_config(Cursor& cur) {
  ModelConfig c;
  c.r = static_cast<int>(cur.u32());
  c.d = static_cast<int>(cur.u32());
  c.n_cap = static_cast<int>(cur.u32());
  c.m_cap = static_cast<int>(cur.u32());
  const int mode = cur.byte();
  if (mode < 0 || mode > 2) throw std::runtime_error("checkpoint: bad path mode");
  c.path_mode = static_cast<PathMode>(mode);
  c.use_attention = cur.byte() != 0;
  c.use_rereading = cur.byte() != 0;
  c.aug_identity = cur.byte() != 0;
  c.aug_diff = cur.byte() != 0;
  c.aug_prod = cur.byte() != 0;
  c.train_embeddings = cur.byte() != 0;
  c.untie_encoder = cur.byte() != 0;
  c.untie_projection = cur.byte() != 0;
  c.untie_reread_conv = cur.byte() != 0;
  return c;
}

}  // namespace

void save_checkpoint(const AmrParams& params, const ModelConfig& config,
                     const Vocabulary& vocab, const std::string& path) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  out.append(kGateOrder, sizeof(kGateOrder));
  put_config(out, config);

  put_u64(out, static_cast<std::uint64_t>(vocab.size()));
  for (const std::string& token : vocab.tokens) put_str(out, token);

  const auto named = params.named();
  put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    put_str(out, name);
    put_u32(out, static_cast<std::uint32_t>(tensor->rank()));
    for (int e : tensor->shape) put_u32(out, static_cast<std::uint32_t>(e));
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      put_f32(out, static_cast<float>(tensor->at(i)));
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();

  Cursor cur{buf};
  cur.need(sizeof(kMagic));
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not an AMR checkpoint (bad magic)");
  }
  cur.pos += sizeof(kMagic);
  const std::uint32_t version = cur.u32();
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  cur.need(sizeof(kGateOrder));
  if (std::memcmp(buf.data() + cur.pos, kGateOrder, sizeof(kGateOrder)) != 0) {
    throw std::runtime_error(path + ": unexpected gate order tag");
  }
  cur.pos += sizeof(kGateOrder);

  Checkpoint ck;
  ck.config = read_config(cur);

  const std::uint64_t vocab_size = cur.u64();
  ck.vocab.tokens.reserve(vocab_size);
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    std::string token = cur.str();
    ck.vocab.index[token] = static_cast<int>(i);
    ck.vocab.tokens.push_back(std::move(token));
  }
  if (ck.vocab.size() < 2) throw std::runtime_error(path + ": vocabulary too small");

  EmbeddingMatrix zeros;
  zeros.values = Tensor::zeros({ck.vocab.size(), ck.config.r});
  ck.params = init_model(ck.config, ck.vocab, zeros, 0);

  auto named = ck.params.named();
  const std::uint32_t tensor_count = cur.u32();
  if (tensor_count != named.size()) {
    throw std::runtime_error(path + ": tensor count " + std::to_string(tensor_count) +
                             " does not match config-derived " +
                             std::to_string(named.size()));
  }
  for (auto& [name, tensor] : named) {
    const std::string file_name = cur.str();
    if (file_name != name) {
      throw std::runtime_error(path + ": expected tensor `" + name + "`, found `" +
                               file_name + "`");
    }
    const std::uint32_t rank = cur.u32();
    std::vector<int> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(cur.u32());
    if (shape != tensor->shape) {
      throw std::runtime_error(path + ": tensor `" + name +
                               "` shape mismatch against embedded config");
    }
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      tensor->at(i) = static_cast<double>(cur.f32());
    }
  }
  ck.params.embeddings.trainable = ck.config.train_embeddings;
  return ck;
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, mixed with the seed through splitmix64.
  std::uint64_t h = 1469598103934665603ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace amr
