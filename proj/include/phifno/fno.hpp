#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phifno/grid.hpp"
#include "phifno/mesh.hpp"
#include "phifno/rng.hpp"
#include "phifno/sample.hpp"
#include "phifno/tensor.hpp"

namespace phifno::fno {

struct FnoHyperparams {
  int n_d = 20;    // hidden channels
  int m = 10;      // retained Fourier modes per axis
  int n_q = 128;   // projection hidden width
  int c_in = 3;    // input channels: f, phi, g
  int pad = 8;     // reflection padding width
  bool pad_per_layer = false;  // pad/crop around each Fourier layer instead
                               // of once around the whole stack
  bool predict_u = false;      // network output is u directly instead of w
};

// Per-channel standardization moments, pooled over the active pixels of the
// training set and frozen into the parameters.
struct ChannelStats {
  std::vector<double> in_mean, in_std;  // c_in entries each
  double out_mean = 0.0;
  double out_std = 1.0;
};

// Scalar offsets of each parameter group inside the flat blob. Spectral
// weights are complex stored real-interleaved, so they occupy 2*n_d^2*m^2
// scalars per layer.
struct ParamLayout {
  int64_t wp = 0, bp = 0;                  // lifting
  std::array<int64_t, 4> wc{}, wb{}, bb{};  // per Fourier layer
  int64_t wq1 = 0, bq1 = 0, wq2 = 0, bq2 = 0;  // projection
  int64_t total = 0;
};

ParamLayout layout_of(const FnoHyperparams& h);

// (c_in+1)*n_d + 4*(2*n_d^2*m^2 + n_d^2 + n_d) + (n_d+2)*n_q + 1
int64_t param_count(const FnoHyperparams& h);

struct FnoParams {
  FnoHyperparams hyper;
  ChannelStats stats;
  std::vector<double> blob;  // layout_of(hyper) order
};

// Seeded initialization: spectral weights uniform on [0, 1/n_d^2) per real
// component, affine weights and biases uniform on +-1/sqrt(fan_in).
FnoParams init_params(const FnoHyperparams& h, Rng& rng);

// Moments pooled over the masked pixels of every sample; the output channel
// uses w (or the reconstructed u when predict_u). Throws on a channel whose
// pooled variance vanishes.
ChannelStats compute_channel_stats(const std::vector<Sample>& train,
                                   const std::vector<mesh::PixelMasks>& masks,
                                   bool predict_u);

// The parameter blob split into op-shaped tensors. With a tape they are
// differentiable leaves; with nullptr they are plain constants.
struct ParamLeaves {
  ad::Tensor wp, bp;
  std::array<ad::Tensor, 4> wc, wb, bb;
  ad::Tensor wq1, bq1, wq2, bq2;
};

ParamLeaves make_leaves(const FnoParams& p, ad::Tape* tape);

// Leaf gradients concatenated back into blob order after backward().
std::vector<double> gather_grads(ad::Tape& tape, const ParamLeaves& leaves);

// (x - mean)/std per input channel on a [b, c_in, nx, ny] stack, and the
// inverse affine on the [b, 1, nx, ny] output channel.
ad::Tensor standardize(const ad::Tensor& x, const ChannelStats& stats);
ad::Tensor unstandardize(const ad::Tensor& y, const ChannelStats& stats);

// gelu(spectral_conv(x, wc, m) + pointwise_affine(x, wb, bb))
ad::Tensor fourier_layer(const ad::Tensor& x, const ad::Tensor& wc,
                         const ad::Tensor& wb, const ad::Tensor& bb, int m);

// Full network on a standardizable [b, c_in, nx, ny] stack; returns the
// unstandardized [b, 1, nx, ny] prediction (w by default, u if predict_u).
ad::Tensor fno_forward(const FnoHyperparams& h, const ChannelStats& stats,
                       const ParamLeaves& leaves, const ad::Tensor& x);

// Single-instance convenience without a tape.
FieldGrid fno_forward(const FnoParams& p, const FieldGrid& f_h,
                      const FieldGrid& phi_h, const FieldGrid& g_h);

// Stacks (f, phi, g) of each sample into one [n, c_in, nx, ny] value block.
std::vector<double> stack_inputs(const std::vector<const Sample*>& batch);

// JSON header line (format version, hyperparams, stats, parameter
// manifest) followed by the little-endian 64-bit blob.
void save_checkpoint(const FnoParams& p, const std::string& path);
FnoParams load_checkpoint(const std::string& path);

}  // namespace phifno::fno
