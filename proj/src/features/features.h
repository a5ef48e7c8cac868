#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/modules.h"
#include "core/rng.h"
#include "core/tensor.h"
#include "motion/synth.h"

namespace t3m::feat {

constexpr int64_t kSpeechDim = 768;
constexpr int64_t kContextDim = 512;

// Per-frame speech embedding after compression/alignment.
// Invariant: steps.dim(0) == round(duration_s * fps), width exactly 768.
struct SpeechFeatureSeq {
    nn::Tensor steps;  // [L_seq, 768]
    int fps = 30;
    double duration_s = 0.0;

    int64_t len() const { return steps.dim(0); }
    void validate() const;
};

enum class ContextSource { video_provider, text_provider, style_provider, random, zero };

struct ContextVector {
    std::vector<float> values;  // 512
    ContextSource source = ContextSource::zero;

    nn::Tensor row() const;  // [1, 512] f64 tensor
};

// Feature file: magic "T3MF", u32 version=1, u32 rows, u32 cols,
// f32 payload row-major, little-endian.
struct FeatureMatrix {
    int64_t rows = 0, cols = 0;
    std::vector<float> values;
};
void write_feature_file(const std::string& path, int64_t rows, int64_t cols, const float* data);
FeatureMatrix read_feature_file(const std::string& path);

struct ProviderSpec {
    enum class Kind { synthetic_audio, external_file };
    Kind kind = Kind::synthetic_audio;
    std::string path;  // external_file only
};

// Raw speech features [F_a x T_a]. The synthetic provider computes log-energy
// (channel 0) plus log band energies of the sample's pseudo-audio; the file
// provider loads a T3MF matrix verbatim and validates the channel count.
nn::Tensor speech_embed(const motion::SynthSample& sample, const ProviderSpec& provider);

ContextVector context_from_style(const motion::SynthStyle& style);
ContextVector context_from_file(const std::string& path);
// 512 i.i.d. Gaussian draws, mean -0.04, variance 0.12
ContextVector random_context(uint64_t seed);
ContextVector zero_context();
void write_context_file(const std::string& path, const ContextVector& ctx);

// Compression/alignment network: three conv+residual blocks (ReLU) with a
// searched stride schedule, linear interpolation to the exact target length,
// then a two-layer MLP up to width 768.
struct CompressionNet {
    nn::Conv1d conv[3];
    nn::Conv1d skip[3];  // 1x1 strided shortcut where shape changes
    nn::Linear mlp_hidden, mlp_out;
    std::vector<int64_t> strides;
    int64_t in_channels = 0, channels = 0;

    void init(Rng& rng, int64_t in_ch, int64_t channels, std::vector<int64_t> strides);
    // pick three strides from {1..4} landing the conv stack as close to
    // target_len as possible (preferring >=)
    static std::vector<int64_t> choose_strides(int64_t t_in, int64_t target_len);
    static int64_t conv_len(int64_t t, int64_t stride) { return (t - 1) / stride + 1; }

    // raw [F_a, T_a] -> SpeechFeatureSeq of exactly target_len rows
    SpeechFeatureSeq compress_align(const nn::Tensor& raw, int64_t target_len, int fps) const;
    void state(const std::string& prefix, std::vector<nn::NamedParam>& out);
};

}  // namespace t3m::feat
