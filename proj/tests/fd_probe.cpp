// temporary probe: FD error distribution for victim input gradients
#include <cstdio>

#include "advsig/corpus.hpp"
#include "advsig/victim.hpp"

using namespace advsig;

int main() {
  Corpus c = synth_corpus(1, 1, 1.0, 5);  // 16000 samples, harmonic
  auto wave = c[0].waveform;
  const std::size_t n = wave.size();

  for (Scalar floor : {1e-8, 1e-5, 1e-3}) {
    FeatureConfig fc;  // defaults: 512/256/32
    fc.log_floor = floor;
    std::printf("log_floor=%.0e\n", floor);
    for (const auto& id : all_arch_ids()) {
      auto m = build_victim(id, 4, fc, 9);
      const int label = 1;
      auto analytic = m->input_gradient(wave, label);
      auto loss_at = [&](const std::vector<Scalar>& w) {
        Tensor logits = m->logits_graph(Tensor::from(w, {static_cast<int>(w.size())}));
        return cross_entropy_logits(logits, label).item();
      };
      Rng coord_rng(23);
      Scalar worst = 0;
      const Scalar h = 1e-3;
      for (int trial = 0; trial < 40; ++trial) {
        std::size_t i = static_cast<std::size_t>(coord_rng.below(n));
        auto wp = wave, wm = wave;
        wp[i] += h;
        wm[i] -= h;
        Scalar numeric = (loss_at(wp) - loss_at(wm)) / (2 * h);
        worst = std::max(worst, std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-8));
      }
      std::printf("  %-11s worst rel err (40 coords, h=1e-3): %.3e\n", id.c_str(), worst);
    }
  }
  return 0;
}
