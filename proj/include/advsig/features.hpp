// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_FEATURES_HPP
#define ADVSIG_FEATURES_HPP

#include <cmath>
#include <string>
#include <vector>

#include "advsig/tensor.hpp"

namespace advsig {

// ----------------------------- FFT kernel ---------------------------------

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 FFT, no normalization. sign=-1: forward, sign=+1: inverse direction.
inline void fft_inplace(std::vector<Scalar>& re, std::vector<Scalar>& im, int sign) {
  const std::size_t n = re.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const Scalar ang = static_cast<Scalar>(sign) * 2.0 * M_PI / static_cast<Scalar>(len);
    const Scalar wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      Scalar cr = 1.0, ci = 0.0;
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::size_t a = i + j, b = i + j + len / 2;
        const Scalar vr = re[b] * cr - im[b] * ci;
        const Scalar vi = re[b] * ci + im[b] * cr;
        re[b] = re[a] - vr;
        im[b] = im[a] - vi;
        re[a] += vr;
        im[a] += vi;
        const Scalar ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

inline std::vector<Scalar> hann_window(int n) {
  std::vector<Scalar> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<Scalar>(i) / static_cast<Scalar>(n));
  return w;
}

// ------------------------- STFT power spectrum op --------------------------

inline int stft_num_frames(int n_samples, int n_fft, int hop) {
  if (n_samples < n_fft) return 1;  // single zero-padded frame
  return (n_samples - n_fft) / hop + 1;
}

// x:[N] -> P:[n_fft/2+1, T], P[k,t] = |DFT(window * frame_t)[k]|^2.
// Differentiable with respect to the waveform via the adjoint transform.
inline Tensor stft_power(const Tensor& x, int n_fft, int hop, const std::vector<Scalar>& window) {
  if (x.shape().size() != 1) throw UsageError("stft_power expects 1-D waveform");
  if (!is_pow2(n_fft)) throw ConfigError("n_fft must be a power of two");
  if (hop <= 0 || n_fft < hop) throw ConfigError("require n_fft >= hop > 0");
  const int n = x.dim(0);
  const int t_frames = stft_num_frames(n, n_fft, hop);
  const int n_bins = n_fft / 2 + 1;

  std::vector<Scalar> out(static_cast<std::size_t>(n_bins) * t_frames);
  // Spectra are kept for the backward pass (adjoint needs X_k per frame).
  auto spectra = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(t_frames) * n_bins * 2);
  std::vector<Scalar> re(static_cast<std::size_t>(n_fft)), im(static_cast<std::size_t>(n_fft));
  for (int tf = 0; tf < t_frames; ++tf) {
    const int start = tf * hop;
    for (int i = 0; i < n_fft; ++i) {
      const int xi = start + i;
      re[static_cast<std::size_t>(i)] = (xi < n) ? x.data()[static_cast<std::size_t>(xi)] * window[static_cast<std::size_t>(i)] : 0.0;
      im[static_cast<std::size_t>(i)] = 0.0;
    }
    fft_inplace(re, im, -1);
    for (int k = 0; k < n_bins; ++k) {
      const Scalar rr = re[static_cast<std::size_t>(k)], ii = im[static_cast<std::size_t>(k)];
      out[static_cast<std::size_t>(k) * t_frames + tf] = rr * rr + ii * ii;
      (*spectra)[(static_cast<std::size_t>(tf) * n_bins + k) * 2] = rr;
      (*spectra)[(static_cast<std::size_t>(tf) * n_bins + k) * 2 + 1] = ii;
    }
  }

  auto bwd = [n, n_fft, hop, t_frames, n_bins, window, spectra](TensorImpl& self) {
    auto& px = *self.parents[0];
    if (!px.requires_grad) return;
    px.ensure_grad();
    std::vector<Scalar> re(static_cast<std::size_t>(n_fft)), im(static_cast<std::size_t>(n_fft));
    for (int tf = 0; tf < t_frames; ++tf) {
      std::fill(re.begin(), re.end(), 0.0);
      std::fill(im.begin(), im.end(), 0.0);
      for (int k = 0; k < n_bins; ++k) {
        const Scalar g = self.grad[static_cast<std::size_t>(k) * t_frames + tf];
        re[static_cast<std::size_t>(k)] = g * (*spectra)[(static_cast<std::size_t>(tf) * n_bins + k) * 2];
        im[static_cast<std::size_t>(k)] = g * (*spectra)[(static_cast<std::size_t>(tf) * n_bins + k) * 2 + 1];
      }
      fft_inplace(re, im, +1);
      const int start = tf * hop;
      for (int i = 0; i < n_fft; ++i) {
        const int xi = start + i;
        if (xi < n) px.grad[static_cast<std::size_t>(xi)] += 2.0 * re[static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
      }
    }
  };
  return detail::make_result({n_bins, t_frames}, std::move(out), {x}, bwd);
}

// ----------------------------- mel filterbank ------------------------------

inline Scalar hz_to_mel(Scalar f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline Scalar mel_to_hz(Scalar m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filterbank matrix [n_mels, n_fft/2+1], HTK-style, peak 1.
inline std::vector<Scalar> mel_filterbank(int n_mels, int n_fft, int sample_rate, Scalar f_min = 20.0) {
  const int n_bins = n_fft / 2 + 1;
  const Scalar f_max = static_cast<Scalar>(sample_rate) / 2.0;
  const Scalar m_lo = hz_to_mel(f_min), m_hi = hz_to_mel(f_max);
  std::vector<Scalar> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<std::size_t>(i)] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<Scalar>(i) / static_cast<Scalar>(n_mels + 1));
  std::vector<Scalar> fb(static_cast<std::size_t>(n_mels) * n_bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const Scalar e0 = edges[static_cast<std::size_t>(m)], e1 = edges[static_cast<std::size_t>(m) + 1],
                 e2 = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const Scalar f = static_cast<Scalar>(k) * static_cast<Scalar>(sample_rate) / static_cast<Scalar>(n_fft);
      Scalar w = 0.0;
      if (f >= e0 && f <= e1 && e1 > e0)
        w = (f - e0) / (e1 - e0);
      else if (f > e1 && f <= e2 && e2 > e1)
        w = (e2 - f) / (e2 - e1);
      fb[static_cast<std::size_t>(m) * n_bins + k] = w;
    }
  }
  return fb;
}

// ----------------------------- feature config ------------------------------

struct FeatureConfig {
  int sample_rate = 16000;
  int n_fft = 512;
  int hop = 256;
  int n_mels = 32;
  Scalar log_floor = 1e-8;

  void validate() const {
    if (hop <= 0 || n_fft < hop) throw ConfigError("feature config: require n_fft >= hop > 0");
    if (n_mels < 1) throw ConfigError("feature config: require n_mels >= 1");
    if (!is_pow2(n_fft)) throw ConfigError("feature config: n_fft must be a power of two");
    if (sample_rate <= 0) throw ConfigError("feature config: sample_rate must be positive");
    if (log_floor <= 0) throw ConfigError("feature config: log_floor must be positive");
  }

  bool operator==(const FeatureConfig&) const = default;
};

// Log-mel front-end. Holds the constant window and filterbank; produces a
// [n_mels, T] tensor through which waveform gradients flow.
class LogMelFrontend {
 public:
  explicit LogMelFrontend(const FeatureConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    window_ = hann_window(cfg.n_fft);
    mel_ = Tensor::from(mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate), {cfg.n_mels, cfg.n_fft / 2 + 1});
  }

  const FeatureConfig& config() const { return cfg_; }

  // waveform [N] -> log-mel [n_mels, T]
  Tensor forward(const Tensor& waveform) const {
    Tensor p = stft_power(waveform, cfg_.n_fft, cfg_.hop, window_);
    Tensor m = matmul(mel_, p);
    return log_t(add_scalar(m, cfg_.log_floor));
  }

  int frames_for(int n_samples) const { return stft_num_frames(n_samples, cfg_.n_fft, cfg_.hop); }

 private:
  FeatureConfig cfg_;
  std::vector<Scalar> window_;
  Tensor mel_;
};

}  // namespace advsig

#endif  // ADVSIG_FEATURES_HPP
