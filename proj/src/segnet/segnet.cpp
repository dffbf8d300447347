#include "sharpseg/segnet.hpp"

#include <cmath>

#include "sharpseg/error.hpp"
#include "sharpseg/ops.hpp"
#include "sharpseg/strict_json.hpp"

namespace sharpseg {

void NetworkConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidConfig, msg); };
  if (n_stages < 2) bad("network.n_stages must be at least 2");
  if (channels.size() != n_stages) bad("network.channels must have n_stages entries");
  if (strides.size() != n_stages) bad("network.strides must have n_stages entries");
  if (strides[0] != 1) bad("network.strides[0] must be 1");
  for (std::size_t s = 0; s < n_stages; ++s) {
    if (channels[s] == 0) bad("network.channels entries must be positive");
    if (strides[s] == 0) bad("network.strides entries must be positive");
  }
  if (input_shape.size() != 2 && input_shape.size() != 3) bad("network.input_shape must have 2 or 3 axes");
  std::size_t factor = 1;
  for (std::size_t s : strides) factor *= s;
  for (std::size_t e : input_shape) {
    if (e == 0 || e % factor != 0) {
      bad("network.input_shape extent " + std::to_string(e) + " is not divisible by total downsampling " +
          std::to_string(factor));
    }
  }
  if (in_channels == 0) bad("network.in_channels must be positive");
  if (n_classes < 2) bad("network.n_classes must be at least 2");
  if (n_state == 0) bad("network.n_state must be positive");
  if (expand == 0) bad("network.expand must be positive");
  if (umamba_blocks_per_stage == 0) bad("network.umamba_blocks_per_stage must be positive");
}

nlohmann::json NetworkConfig::to_json() const {
  return {{"n_stages", n_stages},
          {"channels", channels},
          {"strides", strides},
          {"input_shape", input_shape},
          {"in_channels", in_channels},
          {"n_classes", n_classes},
          {"deep_supervision", deep_supervision},
          {"selective_ssm", selective_ssm},
          {"n_state", n_state},
          {"expand", expand},
          {"umamba_blocks_per_stage", umamba_blocks_per_stage}};
}

NetworkConfig NetworkConfig::from_json(const nlohmann::json& j, const std::string& path) {
  StrictObject o(j, path);
  NetworkConfig c;
  c.n_stages = o.get("n_stages", c.n_stages);
  c.channels = o.get("channels", c.channels);
  c.strides = o.get("strides", c.strides);
  c.input_shape = o.get("input_shape", c.input_shape);
  c.in_channels = o.get("in_channels", c.in_channels);
  c.n_classes = o.get("n_classes", c.n_classes);
  c.deep_supervision = o.get("deep_supervision", c.deep_supervision);
  c.selective_ssm = o.get("selective_ssm", c.selective_ssm);
  c.n_state = o.get("n_state", c.n_state);
  c.expand = o.get("expand", c.expand);
  c.umamba_blocks_per_stage = o.get("umamba_blocks_per_stage", c.umamba_blocks_per_stage);
  o.finish();
  c.validate();
  return c;
}

std::vector<double> deep_supervision_weights(std::size_t levels, bool enabled) {
  if (!enabled || levels <= 1) return {1.0};
  std::vector<double> w(levels);
  double total = 0.0;
  for (std::size_t s = 0; s < levels; ++s) total += w[s] = std::ldexp(1.0, -static_cast<int>(s));
  for (double& v : w) v /= total;
  return w;
}

std::vector<std::uint8_t> downsample_labels(const std::vector<std::uint8_t>& labels,
                                            const std::vector<std::size_t>& shape,
                                            const std::vector<std::size_t>& factors) {
  // shape = [N, spatial...]; factors per spatial axis.
  if (shape.size() < 2 || factors.size() != shape.size() - 1) {
    fail(ErrorCode::ShapeMismatch, "downsample_labels needs one factor per spatial axis");
  }
  std::size_t total = 1;
  for (std::size_t e : shape) total *= e;
  if (total != labels.size()) fail(ErrorCode::ShapeMismatch, "label buffer does not match its shape");
  std::vector<std::size_t> out_shape = shape;
  for (std::size_t a = 0; a < factors.size(); ++a) {
    if (factors[a] == 0 || shape[a + 1] % factors[a] != 0) {
      fail(ErrorCode::ShapeMismatch, "label extent not divisible by downsampling factor");
    }
    out_shape[a + 1] = shape[a + 1] / factors[a];
  }
  std::size_t out_total = 1;
  for (std::size_t e : out_shape) out_total *= e;
  std::vector<std::uint8_t> out(out_total);
  const std::size_t rank = shape.size();
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t o = 0; o < out_total; ++o) {
    std::size_t rem = o, src = 0;
    for (std::size_t a = rank; a-- > 0;) {
      idx[a] = rem % out_shape[a];
      rem /= out_shape[a];
    }
    for (std::size_t a = 0; a < rank; ++a) src = src * shape[a] + (a == 0 ? idx[0] : idx[a] * factors[a - 1]);
    out[o] = labels[src];
  }
  return out;
}

namespace {

Shape kernel_shape(std::size_t out, std::size_t in, std::size_t k, std::size_t rank) {
  Shape s{out, in};
  s.resize(2 + rank, k);
  return s;
}

std::size_t pow_size(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

SegNetwork SegNetwork::build(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SegNetwork net;
  net.cfg_ = cfg;
  std::mt19937_64 rng(seed);
  const std::size_t rank = cfg.input_shape.size(), n = cfg.n_stages;
  ParameterStore& st = net.store_;

  auto conv_norm = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t stride) {
    ConvNorm c;
    c.weight = st.add(name + ".conv", he_uniform(kernel_shape(out, in, 3, rank), in * pow_size(3, rank), rng));
    c.gamma = st.add(name + ".norm.gamma", Tensor({out}, 1.0));
    c.beta = st.add(name + ".norm.beta", Tensor({out}, 0.0));
    c.stride = stride;
    return c;
  };
  MambaConfig mc;
  mc.expand = cfg.expand;
  mc.n_state = cfg.n_state;
  mc.selective = cfg.selective_ssm;

  net.stem_ = conv_norm("stem", cfg.in_channels, cfg.channels[0], 1);
  net.encoder_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (s > 0) {
      net.down_.push_back(conv_norm("enc" + std::to_string(s) + ".down", cfg.channels[s - 1], cfg.channels[s],
                                    cfg.strides[s]));
    }
    for (std::size_t b = 0; b < cfg.umamba_blocks_per_stage; ++b) {
      net.encoder_[s].push_back(UMambaBlock::create(st, "enc" + std::to_string(s) + ".umamba" + std::to_string(b),
                                                    cfg.channels[s], cfg.channels[s], rank, mc, rng));
    }
  }
  for (std::size_t s = 1; s < n; ++s) {
    const std::size_t k = cfg.strides[s];
    Shape ws{cfg.channels[s], cfg.channels[s - 1]};
    ws.resize(2 + rank, k);
    net.up_.push_back(st.add("dec" + std::to_string(s) + ".up", he_uniform(ws, cfg.channels[s], rng)));
    net.decoder_.push_back(ResidualBlock::create(st, "dec" + std::to_string(s) + ".res", 2 * cfg.channels[s - 1],
                                                 cfg.channels[s - 1], rank, rng));
  }
  net.head_w_ = st.add("head.weight", he_uniform(kernel_shape(cfg.n_classes, cfg.channels[0], 1, rank),
                                                 cfg.channels[0], rng));
  net.head_b_ = st.add("head.bias", Tensor({cfg.n_classes}, 0.0));
  if (cfg.deep_supervision) {
    for (std::size_t s = 1; s < n; ++s) {
      Head h;
      h.weight = st.add("aux" + std::to_string(s) + ".weight",
                        he_uniform(kernel_shape(cfg.n_classes, cfg.channels[s], 1, rank), cfg.channels[s], rng));
      h.bias = st.add("aux" + std::to_string(s) + ".bias", Tensor({cfg.n_classes}, 0.0));
      net.aux_heads_.push_back(h);
    }
  }
  return net;
}

std::size_t SegNetwork::stage_factor(std::size_t s) const {
  std::size_t f = 1;
  for (std::size_t i = 0; i <= s && i < cfg_.strides.size(); ++i) f *= cfg_.strides[i];
  return f;
}

std::vector<std::size_t> SegNetwork::stage_shape(std::size_t s) const {
  std::vector<std::size_t> shape = cfg_.input_shape;
  for (auto& e : shape) e /= stage_factor(s);
  return shape;
}

Var SegNetwork::conv_norm_act(ParamBinder& bind, const ConvNorm& c, Var x) const {
  const Var y = conv(x, bind(c.weight), ConvAttrs{{c.stride}, {1}});
  return leaky_relu(instance_norm(y, bind(c.gamma), bind(c.beta)));
}

Var SegNetwork::head(ParamBinder& bind, const Head& h, Var x) const {
  return softmax(bias_add(conv(x, bind(h.weight)), bind(h.bias), 1), 1);
}

NetworkOutput SegNetwork::forward(Graph& graph, Var image) {
  Shape want{0, cfg_.in_channels};
  want.insert(want.end(), cfg_.input_shape.begin(), cfg_.input_shape.end());
  const Shape got = image.shape();
  want[0] = got.empty() ? 0 : got[0];
  if (got != want || want[0] == 0) {
    fail(ErrorCode::ShapeMismatch, "network expects [N, " + std::to_string(cfg_.in_channels) + ", " +
                                       shape_str(cfg_.input_shape) + "], got " + shape_str(got));
  }
  ParamBinder bind(graph, store_);
  const std::size_t n = cfg_.n_stages;
  std::vector<Var> skips(n);
  Var h = conv_norm_act(bind, stem_, image);
  for (std::size_t s = 0; s < n; ++s) {
    if (s > 0) h = conv_norm_act(bind, down_[s - 1], h);
    for (const auto& block : encoder_[s]) h = block.forward(bind, h);
    skips[s] = h;
  }
  NetworkOutput out;
  std::vector<Var> level_features(n);
  level_features[n - 1] = h;
  for (std::size_t s = n - 1; s > 0; --s) {
    const Var up = transposed_conv(h, bind(up_[s - 1]), ConvAttrs{{cfg_.strides[s]}, {0}});
    const Var parts[] = {skips[s - 1], up};
    h = decoder_[s - 1].forward(bind, concat(parts, 1));
    level_features[s - 1] = h;
  }
  out.probs = head(bind, Head{head_w_, head_b_}, h);
  for (std::size_t s = 1; s < n && cfg_.deep_supervision; ++s) {
    out.aux.push_back(head(bind, aux_heads_[s - 1], level_features[s]));
  }
  return out;
}

}  // namespace sharpseg
