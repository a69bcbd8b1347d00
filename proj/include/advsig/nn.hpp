// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_NN_HPP
#define ADVSIG_NN_HPP

#include <memory>
#include <string>
#include <vector>

#include "advsig/conv.hpp"
#include "advsig/tensor.hpp"

namespace advsig {

// ------------------------------- module base -------------------------------

class Module {
 public:
  virtual ~Module() = default;

  // Parameters in fixed registration order; the order defines the layout of
  // the serialized parameter blob.
  virtual void collect_params(std::vector<Tensor>& out) = 0;

  // Canonical structural description (layer kinds and shapes). Two modules
  // with different graphs produce different strings.
  virtual void describe(std::string& out) const = 0;

  std::vector<Tensor> parameters() {
    std::vector<Tensor> out;
    collect_params(out);
    return out;
  }

  std::size_t num_params() {
    std::size_t n = 0;
    for (auto& p : parameters()) n += p.numel();
    return n;
  }

  void set_training(bool training) {
    training_ = training;
    for (auto& p : parameters()) p.set_requires_grad(training);
  }
  bool training() const { return training_; }

  std::uint64_t graph_hash() const {
    std::string desc;
    describe(desc);
    return fnv1a(desc);
  }

  std::vector<Scalar> state_flat() {
    std::vector<Scalar> out;
    for (auto& p : parameters()) out.insert(out.end(), p.data().begin(), p.data().end());
    return out;
  }

  void load_state_flat(const std::vector<Scalar>& flat) {
    std::size_t off = 0;
    for (auto& p : parameters()) {
      if (off + p.numel() > flat.size()) throw ParseError("parameter blob too short");
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + p.numel()), p.data().begin());
      off += p.numel();
    }
    if (off != flat.size()) throw ParseError("parameter blob size mismatch");
  }

  std::uint64_t param_checksum() {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto& p : parameters()) h = fnv1a(p.data().data(), p.data().size() * sizeof(Scalar), h);
    return h;
  }

 private:
  bool training_ = false;
};

// Backbone activation. Smooth so that finite-difference checks on input
// gradients converge at moderate step sizes.
inline Tensor act(const Tensor& x) { return softplus_t(x, 4.0); }

namespace nninit {
inline Tensor uniform_fan_in(std::vector<int> shape, int fan_in, Rng& rng) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  const Scalar s = std::sqrt(1.0 / static_cast<Scalar>(fan_in));
  std::vector<Scalar> data(n);
  for (auto& v : data) v = rng.uniform(-s, s);
  return Tensor::from(std::move(data), std::move(shape));
}
}  // namespace nninit

// --------------------------------- layers ----------------------------------

class Linear : public Module {
 public:
  Linear(int in, int out, Rng& rng)
      : in_(in), out_(out), w_(nninit::uniform_fan_in({out, in}, in, rng)), b_(Tensor::zeros({out})) {}

  Tensor forward(const Tensor& x) const { return linear(x, w_, b_); }

  void collect_params(std::vector<Tensor>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void describe(std::string& out) const override {
    out += "Linear(" + std::to_string(in_) + "," + std::to_string(out_) + ");";
  }

 private:
  int in_, out_;
  Tensor w_, b_;
};

class Conv2dLayer : public Module {
 public:
  Conv2dLayer(int cin, int cout, int k, int stride, Rng& rng)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(k / 2),
        w_(nninit::uniform_fan_in({cout, cin, k, k}, cin * k * k, rng)), b_(Tensor::zeros({cout})) {}

  Tensor forward(const Tensor& x) const { return conv2d(x, w_, b_, stride_, stride_, pad_, pad_); }

  void collect_params(std::vector<Tensor>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void describe(std::string& out) const override {
    out += "Conv2d(" + std::to_string(cin_) + "," + std::to_string(cout_) + ",k" + std::to_string(k_) + ",s" +
           std::to_string(stride_) + ");";
  }

 private:
  int cin_, cout_, k_, stride_, pad_;
  Tensor w_, b_;
};

class Conv1dLayer : public Module {
 public:
  Conv1dLayer(int cin, int cout, int k, int stride, int dilation, Rng& rng)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), dilation_(dilation), pad_((k - 1) * dilation / 2),
        w_(nninit::uniform_fan_in({cout, cin, k}, cin * k, rng)), b_(Tensor::zeros({cout})) {}

  Tensor forward(const Tensor& x) const { return conv1d(x, w_, b_, stride_, pad_, dilation_); }

  void collect_params(std::vector<Tensor>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void describe(std::string& out) const override {
    out += "Conv1d(" + std::to_string(cin_) + "," + std::to_string(cout_) + ",k" + std::to_string(k_) + ",s" +
           std::to_string(stride_) + ",d" + std::to_string(dilation_) + ");";
  }

 private:
  int cin_, cout_, k_, stride_, dilation_, pad_;
  Tensor w_, b_;
};

class ConvT1dLayer : public Module {
 public:
  ConvT1dLayer(int cin, int cout, int k, int stride, int pad, Rng& rng)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
        w_(nninit::uniform_fan_in({cin, cout, k}, cin * k, rng)), b_(Tensor::zeros({cout})) {}

  Tensor forward(const Tensor& x) const { return conv_transpose1d(x, w_, b_, stride_, pad_); }

  void collect_params(std::vector<Tensor>& out) override {
    out.push_back(w_);
    out.push_back(b_);
  }
  void describe(std::string& out) const override {
    out += "ConvT1d(" + std::to_string(cin_) + "," + std::to_string(cout_) + ",k" + std::to_string(k_) + ",s" +
           std::to_string(stride_) + ");";
  }

 private:
  int cin_, cout_, k_, stride_, pad_;
  Tensor w_, b_;
};

// Per-example normalization across the non-channel extent, with affine
// parameters. Stateless between calls, so eval inference stays a pure
// function of the input.
class InstanceNorm : public Module {
 public:
  explicit InstanceNorm(int channels) : c_(channels), gamma_(Tensor::zeros({channels})), beta_(Tensor::zeros({channels})) {
    for (auto& v : gamma_.data()) v = 1.0;
  }

  Tensor forward(const Tensor& x) const {
    Tensor m = channel_mean(x);
    Tensor xc = sub_channels(x, m);
    Tensor var = channel_mean(square(xc));
    Tensor scale = div(gamma_, sqrt_t(add_scalar(var, kEps)));
    return add_channels(mul_channels(xc, scale), beta_);
  }

  void collect_params(std::vector<Tensor>& out) override {
    out.push_back(gamma_);
    out.push_back(beta_);
  }
  void describe(std::string& out) const override { out += "InstanceNorm(" + std::to_string(c_) + ");"; }

 private:
  static constexpr Scalar kEps = 1e-5;
  int c_;
  Tensor gamma_, beta_;
};

// Channel squeeze-excitation over a [C,T] map.
class SEBlock1d : public Module {
 public:
  SEBlock1d(int channels, int reduced, Rng& rng) : fc1_(channels, reduced, rng), fc2_(reduced, channels, rng) {}

  Tensor forward(const Tensor& x) const {
    Tensor z = channel_mean(x);
    Tensor s = sigmoid_t(fc2_.forward(act(fc1_.forward(z))));
    return mul_channels(x, s);
  }

  void collect_params(std::vector<Tensor>& out) override {
    fc1_.collect_params(out);
    fc2_.collect_params(out);
  }
  void describe(std::string& out) const override {
    out += "SE1d[";
    fc1_.describe(out);
    fc2_.describe(out);
    out += "];";
  }

 private:
  Linear fc1_, fc2_;
};

// Frequency-wise squeeze-excitation over a [C,F,T] map: attention weights per
// frequency bin, shared across channels and frames.
class FwSEBlock : public Module {
 public:
  FwSEBlock(int freq_bins, Rng& rng) : f_(freq_bins), fc1_(freq_bins, freq_bins, rng), fc2_(freq_bins, freq_bins, rng) {}

  Tensor forward(const Tensor& x) const {
    Tensor z = freq_mean(x);
    Tensor s = sigmoid_t(fc2_.forward(act(fc1_.forward(z))));
    return mul_freq(x, s);
  }

  void collect_params(std::vector<Tensor>& out) override {
    fc1_.collect_params(out);
    fc2_.collect_params(out);
  }
  void describe(std::string& out) const override { out += "FwSE(" + std::to_string(f_) + ");"; }

 private:
  int f_;
  Linear fc1_, fc2_;
};

// Residual 2-D block: conv-norm-relu-conv-norm (+ optional frequency SE) + skip.
class ResBlock2d : public Module {
 public:
  ResBlock2d(int cin, int cout, int stride, int fwse_bins, Rng& rng)
      : conv1_(cin, cout, 3, stride, rng), norm1_(cout), conv2_(cout, cout, 3, 1, rng), norm2_(cout) {
    if (cin != cout || stride != 1) proj_ = std::make_unique<Conv2dLayer>(cin, cout, 1, stride, rng);
    if (fwse_bins > 0) fwse_ = std::make_unique<FwSEBlock>(fwse_bins, rng);
  }

  Tensor forward(const Tensor& x) const {
    Tensor h = act(norm1_.forward(conv1_.forward(x)));
    h = norm2_.forward(conv2_.forward(h));
    if (fwse_) h = fwse_->forward(h);
    Tensor skip = proj_ ? proj_->forward(x) : x;
    return act(add(h, skip));
  }

  void collect_params(std::vector<Tensor>& out) override {
    conv1_.collect_params(out);
    norm1_.collect_params(out);
    conv2_.collect_params(out);
    norm2_.collect_params(out);
    if (fwse_) fwse_->collect_params(out);
    if (proj_) proj_->collect_params(out);
  }
  void describe(std::string& out) const override {
    out += "ResBlock2d[";
    conv1_.describe(out);
    conv2_.describe(out);
    if (fwse_) fwse_->describe(out);
    if (proj_) proj_->describe(out);
    out += "];";
  }

 private:
  Conv2dLayer conv1_;
  InstanceNorm norm1_;
  Conv2dLayer conv2_;
  InstanceNorm norm2_;
  std::unique_ptr<FwSEBlock> fwse_;
  std::unique_ptr<Conv2dLayer> proj_;
};

// Attention-weighted mean and standard deviation over frames: [C,T] -> [2C].
class AttentiveStatsPool : public Module {
 public:
  AttentiveStatsPool(int channels, int attn_dim, Rng& rng)
      : c_(channels), attn1_(channels, attn_dim, 1, 1, 1, rng), attn2_(attn_dim, 1, 1, 1, 1, rng) {}

  Tensor forward(const Tensor& h) const {
    Tensor e = attn2_.forward(tanh_t(attn1_.forward(h)));  // [1,T]
    Tensor a = softmax_vec(reshape(e, {h.dim(1)}));
    Tensor mu = channel_sum(mul_time(h, a));
    Tensor m2 = channel_sum(mul_time(square(h), a));
    Tensor var = sub(m2, square(mu));
    Tensor sd = sqrt_t(clamp_min_t(var, 1e-8));
    return concat_vec({mu, sd});
  }

  void collect_params(std::vector<Tensor>& out) override {
    attn1_.collect_params(out);
    attn2_.collect_params(out);
  }
  void describe(std::string& out) const override { out += "AttnStatsPool(" + std::to_string(c_) + ");"; }

 private:
  int c_;
  Conv1dLayer attn1_, attn2_;
};

// Per-utterance mean/variance normalization of a [F,T] feature map.
inline Tensor cmvn(const Tensor& feats) {
  Tensor m = channel_mean(feats);
  Tensor xc = sub_channels(feats, m);
  Tensor var = channel_mean(square(xc));
  Tensor ones = Tensor::from(std::vector<Scalar>(static_cast<std::size_t>(feats.dim(0)), 1.0), {feats.dim(0)});
  Tensor inv = div(ones, sqrt_t(add_scalar(var, 1e-6)));
  return mul_channels(xc, inv);
}

// --------------------------------- optimizer -------------------------------

class Adam {
 public:
  Adam(std::vector<Tensor> params, Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999, Scalar eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
    const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      auto& g = p.grad();
      for (std::size_t i = 0; i < p.numel(); ++i) {
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * g[i];
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * g[i] * g[i];
        const Scalar mhat = m_[k][i] / bc1;
        const Scalar vhat = v_[k][i] / bc2;
        p.data()[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void set_lr(Scalar lr) { lr_ = lr; }

 private:
  std::vector<Tensor> params_;
  Scalar lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<Scalar>> m_, v_;
};

}  // namespace advsig

#endif  // ADVSIG_NN_HPP
