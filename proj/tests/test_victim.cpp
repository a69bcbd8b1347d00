// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>
#include <chrono>
#include <set>

#include "advsig/corpus.hpp"
#include "advsig/victim.hpp"
#include "gradcheck.hpp"

using namespace advsig;
using advsig::testutil::random_vec;

namespace {

FeatureConfig small_features() {
  FeatureConfig fc;
  fc.n_fft = 256;
  fc.hop = 128;
  fc.n_mels = 16;
  return fc;
}

std::vector<Scalar> random_wave(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Scalar> w(n);
  for (auto& x : w) x = rng.uniform(-0.5, 0.5);
  return w;
}

}  // namespace

TEST_CASE("build_victim determinism and identifier validation", "[victim]") {
  FeatureConfig fc = small_features();
  auto a = build_victim("lresnet34", 20, fc, 7);
  auto b = build_victim("lresnet34", 20, fc, 7);
  REQUIRE(a->param_checksum() == b->param_checksum());

  auto c = build_victim("lresnet34", 20, fc, 8);
  REQUIRE(a->param_checksum() != c->param_checksum());

  REQUIRE_THROWS_AS(build_victim("vgg", 20, fc, 7), ConfigError);
  REQUIRE_THROWS_AS(build_victim("resnet34", 1, fc, 7), ConfigError);
}

TEST_CASE("four architectures are pairwise structurally distinct", "[victim]") {
  FeatureConfig fc = small_features();
  std::set<std::size_t> counts;
  std::set<std::uint64_t> hashes;
  std::size_t resnet_params = 0, lresnet_params = 0;
  for (const auto& id : all_arch_ids()) {
    auto m = build_victim(id, 20, fc, 7);
    counts.insert(m->num_params());
    hashes.insert(m->layer_graph_hash());
    if (id == "resnet34") resnet_params = m->num_params();
    if (id == "lresnet34") lresnet_params = m->num_params();
  }
  REQUIRE(counts.size() == 4);
  REQUIRE(hashes.size() == 4);
  REQUIRE(resnet_params > lresnet_params);
}

TEST_CASE("predict: determinism, totality, input validation", "[victim]") {
  FeatureConfig fc = small_features();
  auto m = build_victim("lresnet34", 5, fc, 3);
  auto wave = random_wave(700, 11);

  auto [label1, logits1] = m->predict(wave);
  auto [label2, logits2] = m->predict(wave);
  REQUIRE(label1 == label2);
  REQUIRE(logits1 == logits2);
  REQUIRE(logits1.size() == 5);

  std::vector<Scalar> zeros(700, 0.0);
  auto [zlabel, zlogits] = m->predict(zeros);
  REQUIRE(zlabel >= 0);
  REQUIRE(zlabel < 5);

  auto bad = wave;
  bad[10] = std::numeric_limits<Scalar>::quiet_NaN();
  REQUIRE_THROWS_AS(m->predict(bad), DataError);
  REQUIRE_THROWS_AS(m->input_gradient(wave, 5), DataError);
  REQUIRE_THROWS_AS(m->input_gradient(wave, -1), DataError);
}

TEST_CASE("eval purity: predict and input_gradient leave parameters unchanged", "[victim]") {
  FeatureConfig fc = small_features();
  auto m = build_victim("ecapatdnn", 4, fc, 5);
  auto wave = random_wave(640, 13);
  const auto before = m->param_checksum();
  m->predict(wave);
  m->input_gradient(wave, 2);
  m->predict(wave);
  REQUIRE(m->param_checksum() == before);
}

TEST_CASE("input gradient matches central finite differences", "[victim][gradcheck]") {
  FeatureConfig fc = small_features();
  const std::size_t n = 640;
  auto wave = random_wave(n, 17);

  for (const auto& id : {std::string("lresnet34"), std::string("ecapatdnn")}) {
    auto m = build_victim(id, 4, fc, 9);
    const int label = 1;
    auto analytic = m->input_gradient(wave, label);

    Rng coord_rng(23);
    const Scalar h = 1e-3;
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t i = static_cast<std::size_t>(coord_rng.below(n));
      auto wp = wave, wm = wave;
      wp[i] += h;
      wm[i] -= h;
      auto loss_at = [&](const std::vector<Scalar>& w) {
        Tensor logits = m->logits_graph(Tensor::from(w, {static_cast<int>(w.size())}));
        return cross_entropy_logits(logits, label).item();
      };
      Scalar numeric = (loss_at(wp) - loss_at(wm)) / (2 * h);
      INFO(id << " coord " << i);
      REQUIRE(std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-8) < 1e-2);
    }
  }
}

TEST_CASE("gradient of a constant-output model is zero", "[victim]") {
  // CMVN of a constant feature map plus zeroed stem weights keeps logits
  // constant in the input; simplest true-constant double: zero linear victim
  // is exercised in the attack tests. Here: logits of an untrained model on
  // two inputs differ, but gradient of a constant function must vanish.
  struct ConstantModel : GradientModel {
    Tensor logits_graph(const Tensor& x) const override {
      Tensor z = mul_scalar(sum_all(x), 0.0);
      return concat_vec({z, add_scalar(z, 0.0)});
    }
    int num_classes() const override { return 2; }
  } constant_model;
  auto g = constant_model.input_gradient(random_wave(50, 3), 0);
  for (Scalar v : g) REQUIRE(v == 0.0);
}

TEST_CASE("train_victim: epochs=0 no-op, label validation, single-speaker val accuracy", "[victim][train]") {
  FeatureConfig fc = small_features();

  SECTION("epochs=0 leaves parameters bit-identical") {
    auto m = build_victim("lresnet34", 4, fc, 21);
    std::vector<TrainExample> train{{random_wave(640, 1), 0}, {random_wave(640, 2), 1}};
    std::vector<TrainExample> val{{random_wave(640, 3), 2}};
    const auto before = m->param_checksum();
    TrainHyper hp;
    hp.epochs = 0;
    train_victim(*m, train, val, hp);
    REQUIRE(m->param_checksum() == before);
  }

  SECTION("label out of range is a data error") {
    auto m = build_victim("lresnet34", 2, fc, 21);
    std::vector<TrainExample> train{{random_wave(640, 1), 2}};
    REQUIRE_THROWS_AS(train_victim(*m, train, {}, TrainHyper{}), DataError);
    REQUIRE_THROWS_AS(train_victim(*m, {}, {}, TrainHyper{}), DataError);
  }

  SECTION("single-speaker corpus reaches val accuracy 1.0") {
    auto m = build_victim("lresnet34", 2, fc, 21);
    Corpus c = synth_corpus(1, 6, 0.1, 99);
    std::vector<TrainExample> train, val;
    for (std::size_t i = 0; i < c.size(); ++i)
      (i < 4 ? train : val).push_back({c[i].waveform, c[i].speaker_id});
    TrainHyper hp;
    hp.epochs = 3;
    hp.seed = 1;
    Scalar acc = train_victim(*m, train, val, hp);
    REQUIRE(acc == 1.0);
  }
}

TEST_CASE("victim checkpoint round trip", "[victim]") {
  FeatureConfig fc = small_features();
  auto m = build_victim("fwseresnet", 6, fc, 31);
  auto wave = random_wave(640, 41);
  auto logits_before = m->predict(wave).second;

  const std::string dir = "victim_ckpt_test";
  save_victim(*m, dir);
  auto loaded = load_victim(dir);
  REQUIRE(loaded->param_checksum() == m->param_checksum());
  REQUIRE(loaded->arch() == ArchId::fwseresnet);
  REQUIRE(loaded->num_classes() == 6);
  REQUIRE(loaded->predict(wave).second == logits_before);
  std::filesystem::remove_all(dir);
}

TEST_CASE("trained victim separates synthetic speakers", "[victim][train][slow]") {
  FeatureConfig fc;  // default 512/256/32
  Corpus corpus = synth_corpus(20, 10, 1.0, 4242);
  auto [train_set, test_set] = split_per_speaker(corpus, 0.9, 4242);
  auto [fit_set, val_set] = split_per_speaker(train_set, 0.9, 4343);

  auto to_examples = [](const Corpus& c) {
    std::vector<TrainExample> out;
    for (const auto& u : c) out.push_back({u.waveform, u.speaker_id});
    return out;
  };

  auto m = build_victim("lresnet34", 20, fc, 7);
  TrainHyper hp;
  hp.epochs = 30;
  hp.seed = 7;
  Scalar val_acc = train_victim(*m, to_examples(fit_set), to_examples(val_set), hp);
  REQUIRE(val_acc >= 0.90);

  std::size_t correct = 0;
  for (const auto& u : test_set)
    if (m->classifies_correctly(u.waveform, u.speaker_id)) ++correct;
  REQUIRE(static_cast<Scalar>(correct) / static_cast<Scalar>(test_set.size()) >= 0.90);
}

TEST_CASE("per-architecture pass timing", "[.bench]") {
  FeatureConfig fc;  // default
  auto wave = random_wave(16000, 1);
  for (const auto& id : all_arch_ids()) {
    auto m = build_victim(id, 20, fc, 7);
    auto t0 = std::chrono::steady_clock::now();
    const int reps = 10;
    for (int i = 0; i < reps; ++i) m->input_gradient(wave, 3);
    auto t1 = std::chrono::steady_clock::now();
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / reps;
    WARN(id << ": params=" << m->num_params() << " input_grad_pass=" << us << "us");

    m->net().set_training(true);
    Tensor feats = Tensor::from(m->features_graph(Tensor::from(wave, {16000})).data(), {fc.n_mels, 61});
    t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) {
      Tensor loss = cross_entropy_logits(m->logits_from_features(feats), 3);
      loss.backward();
    }
    t1 = std::chrono::steady_clock::now();
    us = std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / reps;
    WARN(id << ": train_pass(cached feats)=" << us << "us");
  }
}
