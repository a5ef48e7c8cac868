#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/modules.h"
#include "core/rng.h"
#include "motion/motion.h"

namespace t3m::codec {

constexpr int64_t kLatentDim = 64;  // d_z
constexpr int64_t kWindow = 4;      // temporal window C (two stride-2 stages)

struct Codebook {
    nn::Tensor entries;          // [size, d_z]
    std::vector<int64_t> usage;  // per-entry assignment count, reset per epoch

    void init(Rng& rng, int64_t size, int64_t dz);
    int64_t size() const { return entries.dim(0); }
    int64_t dim() const { return entries.dim(1); }
    void reset_usage() { usage.assign(static_cast<size_t>(size()), 0); }
};

// exhaustively-checkable nearest neighbour; ties break to the lowest index
std::vector<int64_t> nearest_entries(const nn::Tensor& rows, const nn::Tensor& entries);

struct Quantized {
    std::vector<int64_t> tokens;  // row-major over (batch, step)
    nn::Tensor zq;       // same layout as the latent; forward = snapped entries,
                         // backward = identity into the encoder output
    nn::Tensor zq_rows;  // [rows, d_z] gathered entries, differentiable into the codebook
    nn::Tensor e_rows;   // [rows, d_z] encoder output rows
};

// latent e: [d_z, tau] or [N, d_z, tau]
Quantized quantize(const nn::Tensor& e, Codebook& cb, bool count_usage = false);

// L = mse(a, a_hat) + alpha*mean||sg[e] - zq||^2 + lambda*mean||e - sg[zq]||^2
nn::Tensor vq_loss(const nn::Tensor& a, const nn::Tensor& a_hat,
                   const nn::Tensor& e_rows, const nn::Tensor& zq_rows,
                   double alpha = 1.0, double lambda = 0.25);

struct VqEncoderConfig {
    int64_t residual_layers = 3;
    int64_t kernel = 3, stride = 1, pad = 1;
    int64_t down_kernel = 4, down_stride = 2, down_pad = 1;
    int64_t downsample_count = 2;
    int64_t channel_width = 64;

    void validate() const;  // 2^downsample_count == kWindow
};

// conv(3,1,1)+BN+LeakyReLU twice with a skip (1x1 projection when the channel
// count changes)
struct ResLayer {
    nn::Conv1d c1, c2, proj;
    nn::BatchNorm1d b1, b2;

    void init(Rng& rng, int64_t in_ch, int64_t out_ch, const VqEncoderConfig& cfg);
    nn::Tensor forward(const nn::Tensor& x);
    void state(const std::string& prefix, std::vector<nn::NamedParam>& out);
    void set_training(bool on);
};

// One motion stream (body or hand): encoder, decoder mirror, codebook.
struct VqStream {
    ResLayer enc_res[3];
    nn::Conv1d enc_down[2];
    nn::BatchNorm1d enc_down_bn[2];
    nn::Linear enc_fc;  // width -> d_z per latent step

    nn::Linear dec_fc;  // d_z -> width
    ResLayer dec_res[3];
    nn::ConvTranspose1d dec_up[2];
    nn::BatchNorm1d dec_up_bn[2];
    nn::Conv1d dec_out;

    Codebook codebook;
    int64_t io_channels = 0;

    void init(Rng& rng, int64_t io_ch, int64_t vocab, const VqEncoderConfig& cfg);
    // [C,T] or [N,C,T], T divisible by kWindow -> latent [d_z,T/4] / [N,d_z,T/4]
    nn::Tensor encode(const nn::Tensor& x);
    // latent layout -> [C,T] / [N,C,T] with T = tau*kWindow
    nn::Tensor decode(const nn::Tensor& zq);
    void state(const std::string& prefix, std::vector<nn::NamedParam>& out);
    void set_training(bool on);
};

// Discrete code pair sequence for one motion clip.
struct TokenSeq {
    std::vector<int64_t> body;
    std::vector<int64_t> hand;

    int64_t len() const;  // tau; throws if streams disagree
};

struct VqCodec {
    VqStream body, hand;
    VqEncoderConfig cfg;

    void init(Rng& rng, int64_t vocab_body, int64_t vocab_hand, const VqEncoderConfig& cfg);
    // ground-truth motion window -> token pair sequence (no gradients)
    TokenSeq encode_tokens(const motion::MotionSequence& m, int64_t t0, int64_t len);
    // token pair -> (body [63,T], hand [90,T]); streams must agree on tau
    std::pair<nn::Tensor, nn::Tensor> decode_tokens(const TokenSeq& tokens);
    void state(std::vector<nn::NamedParam>& out);
    void set_training(bool on);
    void freeze();
};

struct CodecTrainConfig {
    int64_t vocab_body = 256, vocab_hand = 256;
    double alpha = 1.0, lambda = 0.25;
    int64_t epochs = 20, batch = 16;
    double lr = 1e-4;
    int64_t seq_len = 88;  // crop length; clamped to the data and to a multiple of C
    uint64_t seed = 0;
};

struct CodecTrainStats {
    std::vector<double> recon_curve;   // per epoch
    std::vector<double> commit_curve;  // per epoch
    int64_t steps = 0;
};

// Joint training of both streams with Adam(0.9, 0.999). Dead codebook entries
// (zero usage over an epoch) are reseeded to encoder outputs from the last
// batch. Non-finite loss restores the last end-of-epoch snapshot and throws
// DivergenceError.
CodecTrainStats train_vqvae(VqCodec& codec, const std::vector<const motion::MotionSequence*>& motions,
                            const CodecTrainConfig& cfg);

}  // namespace t3m::codec
