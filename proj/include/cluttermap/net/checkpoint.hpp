#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluttermap/image.hpp"
#include "cluttermap/net/config.hpp"

namespace cluttermap::net {

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_val_accuracy = 0.0;
};

inline void to_json(nlohmann::json& j, const TrainingMeta& m) {
  j = nlohmann::json{{"seed", m.seed},
                     {"epochs", m.epochs},
                     {"final_val_accuracy", m.final_val_accuracy}};
}

inline void from_json(const nlohmann::json& j, TrainingMeta& m) {
  j.at("seed").get_to(m.seed);
  j.at("epochs").get_to(m.epochs);
  j.at("final_val_accuracy").get_to(m.final_val_accuracy);
}

// Serialized trained model: architecture, training metadata, and every named
// tensor (learnable parameters plus batch-norm running statistics).
struct Checkpoint {
  static constexpr std::uint32_t kSupportedVersion = 1;

  std::uint32_t format_version = kSupportedVersion;
  NetConfig config;
  TrainingMeta meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

template <typename T>
Checkpoint checkpoint_from_network(nn::Network<T>& net, const NetConfig& config,
                                   const TrainingMeta& meta) {
  Checkpoint ck;
  ck.config = config;
  ck.meta = meta;
  for (const auto& p : net.params()) {
    require(ck.find(p.name) == nullptr, "duplicate tensor name ", p.name);
    ck.tensors.emplace_back(p.name, p.tensor->template cast<float>());
  }
  for (const auto& b : net.buffers()) {
    require(ck.find(b.name) == nullptr, "duplicate tensor name ", b.name);
    ck.tensors.emplace_back(b.name, b.tensor->template cast<float>());
  }
  return ck;
}

template <typename T>
nn::Network<T> network_from_checkpoint(const Checkpoint& ck) {
  auto net = build_network<T>(ck.config, ck.meta.seed);
  std::size_t assigned = 0;
  auto assign = [&](const std::vector<nn::NamedParam<T>>& slots) {
    for (const auto& slot : slots) {
      const Tensor<float>* src = ck.find(slot.name);
      require(src != nullptr, "checkpoint is missing tensor ", slot.name);
      require(src->shape == slot.tensor->shape, "checkpoint tensor ", slot.name,
              " has shape ", shape_str(src->shape), " but the network expects ",
              shape_str(slot.tensor->shape));
      *slot.tensor = src->template cast<T>();
      slot.tensor->ensure_grad();
      ++assigned;
    }
  };
  auto params = net.params();
  auto buffers = net.buffers();
  assign(params);
  assign(buffers);
  require(assigned == ck.tensors.size(), "checkpoint carries ",
          ck.tensors.size(), " tensors but the network consumed ", assigned);
  return net;
}

// ---------------------------------------------------------------------------
// Binary format: magic "CLTR"; u32 LE version; u32 LE config-document length
// followed by that many UTF-8 JSON bytes; then, until end of file, per
// tensor: u32 LE name length + name bytes, u32 LE rank, rank u32 LE dims,
// and the IEEE-754 little-endian 32-bit values in row-major order.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_f32(std::string& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
public:
  Reader(const std::string& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 4;
    return v;
  }

  float f32(const std::string& what) {
    return std::bit_cast<float>(u32(what));
  }

  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void f32_block(float* dst, std::size_t count, const std::string& what) {
    need(4 * count, what);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t v = 0;
      for (int b = 3; b >= 0; --b)
        v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + 4 * i + static_cast<std::size_t>(b)]);
      dst[i] = std::bit_cast<float>(v);
    }
    pos_ += 4 * count;
  }

  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t position() const { return pos_; }

private:
  void need(std::size_t n, const std::string& what) {
    if (pos_ + n > bytes_.size())
      fail(origin_, ": truncated at byte ", pos_, " while reading ", what,
           " (need ", n, " bytes, have ", bytes_.size() - pos_, ")");
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out;
  out += "CLTR";
  detail::put_u32(out, ck.format_version);
  nlohmann::json doc{{"config", ck.config}, {"meta", ck.meta}};
  const std::string config_doc = doc.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(config_doc.size()));
  out += config_doc;
  for (const auto& [name, tensor] : ck.tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (int d : tensor.shape)
      detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : tensor.data) detail::put_f32(out, v);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes,
                                         const std::string& origin) {
  detail::Reader r(bytes, origin);
  const std::string magic = r.str(4, "magic");
  require(magic == "CLTR", origin, ": bad magic '", magic,
          "' (expected 'CLTR')");
  Checkpoint ck;
  ck.format_version = r.u32("version");
  require(ck.format_version == Checkpoint::kSupportedVersion, origin,
          ": unsupported checkpoint version ", ck.format_version,
          " (supported: ", Checkpoint::kSupportedVersion, ")");
  const std::uint32_t doc_len = r.u32("config document length");
  const std::string doc_bytes = r.str(doc_len, "config document");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(doc_bytes);
  } catch (const nlohmann::json::exception& e) {
    fail(origin, ": bad config document: ", e.what());
  }
  ck.config = doc.at("config").get<NetConfig>();
  ck.meta = doc.at("meta").get<TrainingMeta>();
  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32("tensor name length");
    const std::string name = r.str(name_len, "tensor name");
    require(ck.find(name) == nullptr, origin, ": duplicate tensor ", name);
    const std::uint32_t rank = r.u32("rank of tensor " + name);
    std::vector<int> shape(rank);
    for (auto& d : shape)
      d = static_cast<int>(r.u32("dims of tensor " + name));
    Tensor<float> t(shape);
    r.f32_block(t.data.data(), t.size(), "values of tensor " + name);
    ck.tensors.emplace_back(name, std::move(t));
  }
  return ck;
}

// Write-to-temp then atomic rename, so failures never leave partial files.
inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write checkpoint to ", tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), "short write to ", tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: ", path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path);
}

// ---------------------------------------------------------------------------
// Inference. A Predictor owns its network state, so concurrent callers each
// build one from the (immutable) checkpoint; predictions are pure functions
// of (checkpoint, image).
// ---------------------------------------------------------------------------

template <typename T = float>
class Predictor {
public:
  explicit Predictor(const Checkpoint& ck)
      : config_(ck.config), net_(network_from_checkpoint<T>(ck)) {}

  const NetConfig& config() const { return config_; }

  // Probability vector over the head's classes. A sigmoid head reports
  // {p, 1-p} where p scores the first class of its pair.
  std::vector<double> predict(const ImagePatch& patch) {
    require(patch.width == config_.input_side &&
                patch.height == config_.input_side,
            "predict expects a ", config_.input_side, "x", config_.input_side,
            " patch (center-cropped), got ", patch.width, "x", patch.height);
    Tensor<T> x({1, 3, config_.input_side, config_.input_side});
    d4_normalize_into(patch, 0, x.data.data());
    return predict_logits_row(forward_batch(x, serial_pool()), 0);
  }

  // Batched inference: rows of `batch` are NxCxHxW samples; returns one
  // probability vector per sample.
  std::vector<std::vector<double>> predict_batch(const Tensor<T>& batch,
                                                 ThreadPool& pool) {
    Tensor<T> logits = forward_batch(batch, pool);
    std::vector<std::vector<double>> out(static_cast<std::size_t>(logits.dim(0)));
    for (int n = 0; n < logits.dim(0); ++n)
      out[static_cast<std::size_t>(n)] = predict_logits_row(logits, n);
    return out;
  }

private:
  Tensor<T> forward_batch(const Tensor<T>& x, ThreadPool& pool) {
    return net_.forward(x, nn::Mode::Eval, pool);
  }

  std::vector<double> predict_logits_row(const Tensor<T>& logits, int row) {
    const int C = logits.dim(1);
    if (std::holds_alternative<SigmoidHead>(config_.head)) {
      const double p =
          nn::sigmoid(static_cast<double>(logits[static_cast<std::size_t>(row)]));
      return {p, 1.0 - p};
    }
    std::vector<double> z(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c)
      z[static_cast<std::size_t>(c)] =
          logits[static_cast<std::size_t>(row) * C + static_cast<std::size_t>(c)];
    return nn::softmax(z);
  }

  NetConfig config_;
  nn::Network<T> net_;
};

// Deterministic argmax: ties resolve to the earliest index.
inline int argmax_index(const std::vector<double>& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace cluttermap::net
