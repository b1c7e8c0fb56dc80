#pragma once

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cluttermap/nn/network.hpp"

namespace cluttermap::net {

struct SoftmaxHead {
  int num_classes = 0;
};
struct SigmoidHead {};

using Head = std::variant<SoftmaxHead, SigmoidHead>;

// Architecture description for the shared trunk: a stack of same-padding
// conv blocks (conv -> relu -> [batch norm on the last block] -> 2x2 pool),
// an optional extra final pool, dropout, and a fully connected head.
struct NetConfig {
  int input_side = 112;
  std::vector<int> conv_block_channels = {16, 16, 16, 16};
  int kernel_size = 3;
  bool batchnorm_on_last_conv = true;
  bool extra_final_pool = true;
  double dropout_probability = 0.5;
  Head head = SoftmaxHead{3};

  // Logit count of the final linear layer.
  int head_outputs() const {
    if (const auto* s = std::get_if<SoftmaxHead>(&head)) return s->num_classes;
    return 1;
  }

  // Number of classes the produced probability vector covers (a sigmoid head
  // scores a two-class decision with a single output).
  int head_classes() const {
    if (const auto* s = std::get_if<SoftmaxHead>(&head)) return s->num_classes;
    return 2;
  }

  // Feature-map side after each pooling step, starting from input_side.
  // Fails when the trace would shrink below one pixel.
  std::vector<int> feature_trace() const {
    require(!conv_block_channels.empty(), "need at least one conv block");
    require(input_side >= 1, "input side must be positive");
    std::vector<int> trace{input_side};
    int side = input_side;
    const int pools =
        static_cast<int>(conv_block_channels.size()) + (extra_final_pool ? 1 : 0);
    for (int i = 0; i < pools; ++i) {
      require(side >= 2, "feature trace reaches side ", side,
              " before pool ", i + 1, "; network rejected");
      side = side / 2;
      trace.push_back(side);
    }
    return trace;
  }

  int final_side() const { return feature_trace().back(); }

  int head_input_features() const {
    return conv_block_channels.back() * final_side() * final_side();
  }

  void validate() const {
    require(kernel_size % 2 == 1, "same padding requires an odd kernel size");
    require(dropout_probability >= 0.0 && dropout_probability < 1.0,
            "dropout probability must be in [0,1)");
    require(head_outputs() >= 1, "head must produce at least one output");
    feature_trace();
    for (int c : conv_block_channels)
      require(c >= 1, "conv block channels must be positive");
  }
};

// The three model kinds the pipeline trains.
inline NetConfig default_stage1_config() {
  NetConfig c;
  c.head = SoftmaxHead{3};
  return c;
}

inline NetConfig default_stage2_config() {
  NetConfig c;
  c.head = SigmoidHead{};
  return c;
}

inline NetConfig default_single_stage_config() {
  NetConfig c;
  c.head = SoftmaxHead{5};
  return c;
}

inline void to_json(nlohmann::json& j, const NetConfig& c) {
  j = nlohmann::json{
      {"input_side", c.input_side},
      {"conv_block_channels", c.conv_block_channels},
      {"kernel_size", c.kernel_size},
      {"batchnorm_on_last_conv", c.batchnorm_on_last_conv},
      {"extra_final_pool", c.extra_final_pool},
      {"dropout_probability", c.dropout_probability},
  };
  if (const auto* s = std::get_if<SoftmaxHead>(&c.head)) {
    j["head"] = {{"kind", "softmax"}, {"num_classes", s->num_classes}};
  } else {
    j["head"] = {{"kind", "sigmoid"}};
  }
}

inline void from_json(const nlohmann::json& j, NetConfig& c) {
  j.at("input_side").get_to(c.input_side);
  j.at("conv_block_channels").get_to(c.conv_block_channels);
  j.at("kernel_size").get_to(c.kernel_size);
  j.at("batchnorm_on_last_conv").get_to(c.batchnorm_on_last_conv);
  j.at("extra_final_pool").get_to(c.extra_final_pool);
  j.at("dropout_probability").get_to(c.dropout_probability);
  const auto& h = j.at("head");
  const std::string kind = h.at("kind").get<std::string>();
  if (kind == "softmax") {
    c.head = SoftmaxHead{h.at("num_classes").get<int>()};
  } else if (kind == "sigmoid") {
    c.head = SigmoidHead{};
  } else {
    fail("unknown head kind '", kind, "'");
  }
}

// Builds the runtime network. Weight initialization is He-normal drawn from a
// stream derived from `seed`, so identical seeds give identical networks.
template <typename T>
nn::Network<T> build_network(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "weight-init"));
  nn::Network<T> net;
  int in_ch = 3;
  const int blocks = static_cast<int>(config.conv_block_channels.size());
  for (int i = 0; i < blocks; ++i) {
    const int out_ch = config.conv_block_channels[static_cast<std::size_t>(i)];
    const std::string id = std::to_string(i + 1);
    nn::ConvSpec conv{in_ch, out_ch, config.kernel_size, true, true};
    validate(nn::LayerKind{conv});
    net.add("conv" + id, std::make_unique<nn::Conv2d<T>>(conv, rng));
    net.add("relu" + id, std::make_unique<nn::Relu<T>>());
    if (config.batchnorm_on_last_conv && i == blocks - 1) {
      nn::BatchNormSpec bn{out_ch, 0.1, 1e-5};
      net.add("bn" + id, std::make_unique<nn::BatchNorm2d<T>>(bn));
    }
    net.add("pool" + id, std::make_unique<nn::MaxPool2<T>>(nn::MaxPoolSpec{}));
    in_ch = out_ch;
  }
  if (config.extra_final_pool)
    net.add("pool_final", std::make_unique<nn::MaxPool2<T>>(nn::MaxPoolSpec{}));
  net.add("dropout", std::make_unique<nn::Dropout<T>>(
                         nn::DropoutSpec{config.dropout_probability},
                         derive_seed(seed, "dropout")));
  net.add("flatten", std::make_unique<nn::Flatten<T>>());
  nn::FullyConnectedSpec fc{config.head_input_features(), config.head_outputs()};
  net.add("fc", std::make_unique<nn::Linear<T>>(fc, rng));
  return net;
}

template <typename T>
long long count_parameters(nn::Network<T>& net) {
  return net.count_parameters();
}

}  // namespace cluttermap::net
