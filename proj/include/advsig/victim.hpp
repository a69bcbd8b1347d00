// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_VICTIM_HPP
#define ADVSIG_VICTIM_HPP

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "advsig/features.hpp"
#include "advsig/nn.hpp"

namespace advsig {

using nlohmann::json;

// ------------------------------- arch ids ----------------------------------

enum class ArchId { resnet34, lresnet34, fwseresnet, ecapatdnn };

inline std::string to_string(ArchId a) {
  switch (a) {
    case ArchId::resnet34: return "resnet34";
    case ArchId::lresnet34: return "lresnet34";
    case ArchId::fwseresnet: return "fwseresnet";
    case ArchId::ecapatdnn: return "ecapatdnn";
  }
  throw ConfigError("bad ArchId");
}

inline ArchId arch_from_string(const std::string& s) {
  if (s == "resnet34") return ArchId::resnet34;
  if (s == "lresnet34") return ArchId::lresnet34;
  if (s == "fwseresnet") return ArchId::fwseresnet;
  if (s == "ecapatdnn") return ArchId::ecapatdnn;
  throw ConfigError("unknown arch_id: " + s);
}

inline const std::vector<std::string>& all_arch_ids() {
  static const std::vector<std::string> ids = {"resnet34", "lresnet34", "fwseresnet", "ecapatdnn"};
  return ids;
}

// ---------------------------- gradient model -------------------------------

// Anything attacks can run against: builds a logit graph from a waveform
// tensor, so both loss gradients and arbitrary logit-margin gradients flow
// back to the input.
class GradientModel {
 public:
  virtual ~GradientModel() = default;
  virtual Tensor logits_graph(const Tensor& waveform) const = 0;
  virtual int num_classes() const = 0;

  std::pair<int, std::vector<Scalar>> predict(const std::vector<Scalar>& waveform) const {
    if (!all_finite(waveform)) throw DataError("waveform contains non-finite samples");
    Tensor logits = logits_graph(Tensor::from(waveform, {static_cast<int>(waveform.size())}));
    return {argmax(logits.data()), logits.data()};
  }

  // d(cross-entropy)/d(waveform) at the given true label.
  std::vector<Scalar> input_gradient(const std::vector<Scalar>& waveform, int true_label) const {
    if (!all_finite(waveform)) throw DataError("waveform contains non-finite samples");
    if (true_label < 0 || true_label >= num_classes()) throw DataError("label out of range");
    Tensor x = Tensor::from(waveform, {static_cast<int>(waveform.size())}, /*requires_grad=*/true);
    Tensor loss = cross_entropy_logits(logits_graph(x), true_label);
    loss.backward();
    return x.grad();
  }

  bool classifies_correctly(const std::vector<Scalar>& waveform, int label) const {
    return predict(waveform).first == label;
  }
};

// --------------------------- backbone networks -----------------------------

// Residual 1-D block with channel squeeze-excitation (TDNN-style).
class SERes1dBlock : public Module {
 public:
  SERes1dBlock(int channels, int dilation, Rng& rng)
      : conv_(channels, channels, 3, 1, dilation, rng), norm_(channels), se_(channels, std::max(1, channels / 4), rng) {}

  Tensor forward(const Tensor& x) const {
    Tensor h = act(norm_.forward(conv_.forward(x)));
    h = se_.forward(h);
    return act(add(h, x));
  }

  void collect_params(std::vector<Tensor>& out) override {
    conv_.collect_params(out);
    norm_.collect_params(out);
    se_.collect_params(out);
  }
  void describe(std::string& out) const override {
    out += "SERes1d[";
    conv_.describe(out);
    se_.describe(out);
    out += "];";
  }

 private:
  Conv1dLayer conv_;
  InstanceNorm norm_;
  SEBlock1d se_;
};

// Shared builder for the three residual-conv variants and the attention TDNN.
// With embed_dim == 0 the head maps pooled activations straight to logits;
// with embed_dim > 0 a bottleneck embedding layer is inserted (signature
// classifiers use 10).
class BackboneNet : public Module {
 public:
  struct Output {
    Tensor logits;
    Tensor embedding;  // defined only when embed_dim > 0
  };

  BackboneNet(ArchId arch, int n_mels, int n_classes, int embed_dim, Rng& rng)
      : arch_(arch), n_mels_(n_mels), n_classes_(n_classes), embed_dim_(embed_dim) {
    switch (arch) {
      case ArchId::resnet34:
        build_resnet(12, {12, 24, 48}, {2, 2, 2}, /*fwse=*/false, rng);
        break;
      case ArchId::lresnet34:
        build_resnet(8, {8, 16, 32}, {1, 1, 1}, /*fwse=*/false, rng);
        break;
      case ArchId::fwseresnet:
        build_resnet(10, {10, 20, 40}, {1, 1, 1}, /*fwse=*/true, rng);
        break;
      case ArchId::ecapatdnn:
        build_ecapa(48, 64, 32, rng);
        break;
    }
    const int pooled = pooled_dim_;
    if (embed_dim_ > 0) {
      embed_ = std::make_unique<Linear>(pooled, embed_dim_, rng);
      head_ = std::make_unique<Linear>(embed_dim_, n_classes_, rng);
    } else {
      head_ = std::make_unique<Linear>(pooled, n_classes_, rng);
    }
  }

  // feats: CMVN log-mel [n_mels, T]
  Output forward(const Tensor& feats) const {
    Tensor pooled = is_ecapa() ? forward_ecapa(feats) : forward_resnet(feats);
    Output out;
    if (embed_dim_ > 0) {
      out.embedding = embed_->forward(pooled);
      out.logits = head_->forward(out.embedding);
    } else {
      out.logits = head_->forward(pooled);
    }
    return out;
  }

  void collect_params(std::vector<Tensor>& out) override {
    if (stem2d_) {
      stem2d_->collect_params(out);
      stem_norm_->collect_params(out);
      for (auto& b : blocks2d_) b->collect_params(out);
    } else {
      stem1d_->collect_params(out);
      stem_norm_->collect_params(out);
      for (auto& b : blocks1d_) b->collect_params(out);
      agg_->collect_params(out);
      pool_->collect_params(out);
    }
    if (embed_) embed_->collect_params(out);
    head_->collect_params(out);
  }

  void describe(std::string& out) const override {
    out += "Backbone(" + to_string(arch_) + ",mels" + std::to_string(n_mels_) + ")[";
    if (stem2d_) {
      stem2d_->describe(out);
      for (auto& b : blocks2d_) b->describe(out);
    } else {
      stem1d_->describe(out);
      for (auto& b : blocks1d_) b->describe(out);
      agg_->describe(out);
      pool_->describe(out);
    }
    if (embed_) embed_->describe(out);
    head_->describe(out);
    out += "];";
  }

  int embed_dim() const { return embed_dim_; }
  int n_classes() const { return n_classes_; }
  ArchId arch() const { return arch_; }

 private:
  bool is_ecapa() const { return arch_ == ArchId::ecapatdnn; }

  void build_resnet(int stem_w, std::vector<int> widths, std::vector<int> blocks, bool fwse, Rng& rng) {
    stem2d_ = std::make_unique<Conv2dLayer>(1, stem_w, 3, 2, rng);
    stem_norm_ = std::make_unique<InstanceNorm>(stem_w);
    int f = detail::conv_out_size(n_mels_, 3, 2, 1);
    int cin = stem_w;
    for (std::size_t s = 0; s < widths.size(); ++s) {
      const int cout = widths[s];
      for (int b = 0; b < blocks[s]; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        if (stride == 2) f = detail::conv_out_size(f, 3, 2, 1);
        blocks2d_.push_back(std::make_unique<ResBlock2d>(cin, cout, stride, fwse ? f : 0, rng));
        cin = cout;
      }
    }
    pooled_dim_ = 2 * cin;  // stats pooling: mean + std per channel
  }

  void build_ecapa(int channels, int agg_channels, int attn_dim, Rng& rng) {
    stem1d_ = std::make_unique<Conv1dLayer>(n_mels_, channels, 5, 1, 1, rng);
    stem_norm_ = std::make_unique<InstanceNorm>(channels);
    blocks1d_.push_back(std::make_unique<SERes1dBlock>(channels, 2, rng));
    blocks1d_.push_back(std::make_unique<SERes1dBlock>(channels, 3, rng));
    agg_ = std::make_unique<Conv1dLayer>(2 * channels, agg_channels, 1, 1, 1, rng);
    pool_ = std::make_unique<AttentiveStatsPool>(agg_channels, attn_dim, rng);
    pooled_dim_ = 2 * agg_channels;
  }

  // Mean + standard deviation over all positions, per channel.
  Tensor forward_resnet(const Tensor& feats) const {
    Tensor x = reshape(feats, {1, feats.dim(0), feats.dim(1)});
    x = act(stem_norm_->forward(stem2d_->forward(x)));
    for (auto& b : blocks2d_) x = b->forward(x);
    Tensor mu = channel_mean(x);
    Tensor var = sub(channel_mean(square(x)), square(mu));
    Tensor sd = sqrt_t(clamp_min_t(var, 1e-8));
    return concat_vec({mu, sd});
  }

  Tensor forward_ecapa(const Tensor& feats) const {
    Tensor x = act(stem_norm_->forward(stem1d_->forward(feats)));
    Tensor b1 = blocks1d_[0]->forward(x);
    Tensor b2 = blocks1d_[1]->forward(b1);
    Tensor cat = concat_channels({b1, b2});
    Tensor agg = act(agg_->forward(cat));
    return pool_->forward(agg);
  }

  ArchId arch_;
  int n_mels_, n_classes_, embed_dim_;
  int pooled_dim_ = 0;

  std::unique_ptr<Conv2dLayer> stem2d_;
  std::unique_ptr<Conv1dLayer> stem1d_;
  std::unique_ptr<InstanceNorm> stem_norm_;
  std::vector<std::unique_ptr<ResBlock2d>> blocks2d_;
  std::vector<std::unique_ptr<SERes1dBlock>> blocks1d_;
  std::unique_ptr<Conv1dLayer> agg_;
  std::unique_ptr<AttentiveStatsPool> pool_;
  std::unique_ptr<Linear> embed_;
  std::unique_ptr<Linear> head_;
};

// ------------------------------ victim model -------------------------------

struct TrainHyper {
  int epochs = 30;
  int batch_size = 16;
  Scalar lr = 2e-3;
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<Scalar> epoch_loss;
  std::vector<Scalar> epoch_val_acc;
  Scalar final_val_acc = 0.0;

  json to_json() const {
    return json{{"epoch_loss", epoch_loss}, {"epoch_val_acc", epoch_val_acc}, {"final_val_acc", final_val_acc}};
  }
};

struct TrainExample {
  std::vector<Scalar> waveform;
  int label = 0;
};

class VictimModel : public GradientModel {
 public:
  VictimModel(ArchId arch, int num_speakers, const FeatureConfig& fc, std::uint64_t seed)
      : arch_(arch), num_speakers_(num_speakers), fc_(fc), seed_(seed), frontend_(fc) {
    if (num_speakers < 2) throw ConfigError("num_speakers must be >= 2");
    Rng rng(derive_seed(seed, "victim/" + to_string(arch)));
    net_ = std::make_unique<BackboneNet>(arch, fc.n_mels, num_speakers, /*embed_dim=*/0, rng);
    net_->set_training(false);
  }

  ArchId arch() const { return arch_; }
  int num_classes() const override { return num_speakers_; }
  const FeatureConfig& feature_config() const { return fc_; }
  std::uint64_t seed() const { return seed_; }
  BackboneNet& net() { return *net_; }
  const TrainHistory& history() const { return history_; }
  TrainHistory& history() { return history_; }

  Tensor features_graph(const Tensor& waveform) const { return cmvn(frontend_.forward(waveform)); }

  Tensor logits_graph(const Tensor& waveform) const override {
    return net_->forward(features_graph(waveform)).logits;
  }

  Tensor logits_from_features(const Tensor& feats) const { return net_->forward(feats).logits; }

  std::uint64_t param_checksum() { return net_->param_checksum(); }
  std::size_t num_params() { return net_->num_params(); }
  std::uint64_t layer_graph_hash() const { return net_->graph_hash(); }

 private:
  ArchId arch_;
  int num_speakers_;
  FeatureConfig fc_;
  std::uint64_t seed_;
  LogMelFrontend frontend_;
  std::unique_ptr<BackboneNet> net_;
  TrainHistory history_;
};

inline std::unique_ptr<VictimModel> build_victim(const std::string& arch_id, int num_speakers,
                                                 const FeatureConfig& fc, std::uint64_t seed) {
  return std::make_unique<VictimModel>(arch_from_string(arch_id), num_speakers, fc, seed);
}

// ------------------------------- training ----------------------------------

namespace detail {

inline Scalar eval_accuracy(VictimModel& model, const std::vector<Tensor>& feats, const std::vector<int>& labels) {
  if (feats.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    Tensor logits = model.logits_from_features(feats[i]);
    if (argmax(logits.data()) == labels[i]) ++correct;
  }
  return static_cast<Scalar>(correct) / static_cast<Scalar>(feats.size());
}

}  // namespace detail

// Trains in place; returns final validation accuracy. epochs == 0 leaves the
// parameters bit-identical.
inline Scalar train_victim(VictimModel& model, const std::vector<TrainExample>& train,
                           const std::vector<TrainExample>& val, const TrainHyper& hp) {
  if (train.empty()) throw DataError("empty training corpus");
  for (const auto& ex : train)
    if (ex.label < 0 || ex.label >= model.num_classes()) throw DataError("train label out of range");
  for (const auto& ex : val)
    if (ex.label < 0 || ex.label >= model.num_classes()) throw DataError("val label out of range");

  // Features are fixed per utterance; compute once.
  auto featurize = [&](const std::vector<TrainExample>& set, std::vector<Tensor>& feats, std::vector<int>& labels) {
    for (const auto& ex : set) {
      Tensor f = model.features_graph(Tensor::from(ex.waveform, {static_cast<int>(ex.waveform.size())}));
      feats.push_back(Tensor::from(f.data(), f.shape()));
      labels.push_back(ex.label);
    }
  };
  std::vector<Tensor> train_feats, val_feats;
  std::vector<int> train_labels, val_labels;
  featurize(train, train_feats, train_labels);
  featurize(val, val_feats, val_labels);

  TrainHistory& hist = model.history();
  hist = TrainHistory{};
  if (hp.epochs == 0) {
    hist.final_val_acc = detail::eval_accuracy(model, val_feats, val_labels);
    return hist.final_val_acc;
  }

  model.net().set_training(true);
  Adam opt(model.net().parameters(), hp.lr);
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(hp.seed, "epoch/" + std::to_string(epoch)));
    shuffle_rng.shuffle(order);
    Scalar epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      const Scalar inv = 1.0 / static_cast<Scalar>(end - start);
      opt.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        Tensor loss = mul_scalar(
            cross_entropy_logits(model.logits_from_features(train_feats[order[i]]), train_labels[order[i]]), inv);
        loss.backward();
        epoch_loss += loss.item();
      }
      opt.step();
    }
    hist.epoch_loss.push_back(epoch_loss / std::ceil(static_cast<Scalar>(order.size()) / hp.batch_size));

    model.net().set_training(false);
    hist.epoch_val_acc.push_back(detail::eval_accuracy(model, val_feats, val_labels));
    model.net().set_training(true);
  }
  model.net().set_training(false);
  hist.final_val_acc = hist.epoch_val_acc.empty() ? 0.0 : hist.epoch_val_acc.back();
  return hist.final_val_acc;
}

// ------------------------------ checkpoints --------------------------------

namespace detail {

inline void write_param_blob(const std::string& path, const std::vector<Scalar>& flat) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DependencyError("cannot write " + path);
  const char magic[8] = {'A', 'D', 'V', 'S', 'I', 'G', 'P', '1'};
  f.write(magic, 8);
  std::uint64_t n = flat.size();
  f.write(reinterpret_cast<const char*>(&n), 8);
  f.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(n * sizeof(Scalar)));
}

inline std::vector<Scalar> read_param_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DependencyError("missing parameter blob: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "ADVSIGP1") throw ParseError("bad parameter blob magic: " + path);
  std::uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), 8);
  std::vector<Scalar> flat(n);
  f.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(n * sizeof(Scalar)));
  if (!f) throw ParseError("truncated parameter blob: " + path);
  return flat;
}

}  // namespace detail

inline json feature_config_to_json(const FeatureConfig& fc) {
  return json{{"sample_rate", fc.sample_rate}, {"n_fft", fc.n_fft}, {"hop", fc.hop}, {"n_mels", fc.n_mels},
              {"log_floor", fc.log_floor}};
}

inline FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig fc;
  fc.sample_rate = j.at("sample_rate").get<int>();
  fc.n_fft = j.at("n_fft").get<int>();
  fc.hop = j.at("hop").get<int>();
  fc.n_mels = j.at("n_mels").get<int>();
  fc.log_floor = j.at("log_floor").get<Scalar>();
  fc.validate();
  return fc;
}

inline void save_victim(VictimModel& model, const std::string& dir) {
  std::filesystem::create_directories(dir);
  detail::write_param_blob(dir + "/params.bin", model.net().state_flat());
  json meta{{"kind", "victim"},
            {"arch_id", to_string(model.arch())},
            {"num_speakers", model.num_classes()},
            {"feature_config", feature_config_to_json(model.feature_config())},
            {"seed", model.seed()},
            {"train_history", model.history().to_json()}};
  std::ofstream f(dir + "/meta.json");
  f << meta.dump(2) << "\n";
}

inline std::unique_ptr<VictimModel> load_victim(const std::string& dir) {
  std::ifstream f(dir + "/meta.json");
  if (!f) throw DependencyError("missing victim metadata: " + dir + "/meta.json");
  json meta;
  try {
    f >> meta;
  } catch (const json::exception& e) {
    throw ParseError("bad victim metadata: " + std::string(e.what()));
  }
  auto model = build_victim(meta.at("arch_id").get<std::string>(), meta.at("num_speakers").get<int>(),
                            feature_config_from_json(meta.at("feature_config")), meta.at("seed").get<std::uint64_t>());
  model->net().load_state_flat(detail::read_param_blob(dir + "/params.bin"));
  if (meta.contains("train_history")) {
    const json& h = meta["train_history"];
    model->history().epoch_loss = h.value("epoch_loss", std::vector<Scalar>{});
    model->history().epoch_val_acc = h.value("epoch_val_acc", std::vector<Scalar>{});
    model->history().final_val_acc = h.value("final_val_acc", 0.0);
  }
  return model;
}

}  // namespace advsig

#endif  // ADVSIG_VICTIM_HPP
