#include "features/features.h"

#include <cmath>

#include "core/binio.h"

namespace t3m::feat {

void SpeechFeatureSeq::validate() const {
    if (!steps.defined() || steps.rank() != 2 || steps.dim(1) != kSpeechDim)
        throw DataError("speech feature sequence must be [L_seq, 768]");
    const int64_t expect = std::llround(duration_s * fps);
    if (steps.dim(0) != expect)
        throw DataError("speech feature length " + std::to_string(steps.dim(0)) +
                        " != round(duration*fps) = " + std::to_string(expect));
}

nn::Tensor ContextVector::row() const {
    if (values.size() != kContextDim) throw DataError("context vector width must be 512");
    nn::Tensor t = nn::Tensor::zeros({1, kContextDim});
    for (int64_t i = 0; i < kContextDim; ++i) (*t.data)[i] = static_cast<double>(values[static_cast<size_t>(i)]);
    return t;
}

void write_feature_file(const std::string& path, int64_t rows, int64_t cols, const float* data) {
    if (rows < 1 || cols < 1) throw DataError("feature file dims must be positive");
    io::Writer w(path);
    w.bytes("T3MF", 4);
    w.u32(1);
    w.u32(static_cast<uint32_t>(rows));
    w.u32(static_cast<uint32_t>(cols));
    w.f32s(data, static_cast<size_t>(rows * cols));
    w.close();
}

FeatureMatrix read_feature_file(const std::string& path) {
    io::Reader r(path);
    r.expect_magic("T3MF");
    const uint32_t version = r.u32();
    if (version != 1)
        throw DataError(path + ": unsupported feature file version " + std::to_string(version) +
                        " at byte offset 4");
    FeatureMatrix m;
    m.rows = r.u32();
    m.cols = r.u32();
    if (m.rows < 1 || m.cols < 1) throw DataError(path + ": zero dims at byte offset 8");
    m.values.resize(static_cast<size_t>(m.rows * m.cols));
    r.f32s(m.values.data(), m.values.size());
    r.expect_eof();
    return m;
}

nn::Tensor speech_embed(const motion::SynthSample& sample, const ProviderSpec& provider) {
    using motion::kAudioChannels;
    if (provider.kind == ProviderSpec::Kind::external_file) {
        FeatureMatrix m = read_feature_file(provider.path);
        if (m.rows != kAudioChannels)
            throw DataError(provider.path + ": expected " + std::to_string(kAudioChannels) +
                            " feature channels, got " + std::to_string(m.rows));
        nn::Tensor out = nn::Tensor::zeros({m.rows, m.cols});
        for (size_t i = 0; i < m.values.size(); ++i) (*out.data)[i] = static_cast<double>(m.values[i]);
        return out;
    }
    const int64_t steps = sample.audio_steps;
    if (steps < 1) throw DataError("speech_embed: sample has no audio steps");
    nn::Tensor out = nn::Tensor::zeros({kAudioChannels, steps});
    for (int64_t s = 0; s < steps; ++s) {
        double total = 0.0;
        for (int64_t c = 0; c < kAudioChannels; ++c)
            total += static_cast<double>(sample.audio_feat[static_cast<size_t>(c * steps + s)]);
        (*out.data)[s] = std::log1p(total);  // channel 0: log total energy
        for (int64_t c = 1; c < kAudioChannels; ++c)
            (*out.data)[c * steps + s] =
                std::log1p(static_cast<double>(sample.audio_feat[static_cast<size_t>(c * steps + s)]));
    }
    return out;
}

ContextVector context_from_style(const motion::SynthStyle& style) {
    return {motion::style_context(style), ContextSource::style_provider};
}

ContextVector context_from_file(const std::string& path) {
    FeatureMatrix m = read_feature_file(path);
    if (m.rows != 1 || m.cols != kContextDim)
        throw DataError(path + ": context file must be 1x512, got " + std::to_string(m.rows) + "x" +
                        std::to_string(m.cols));
    return {std::move(m.values), ContextSource::video_provider};
}

ContextVector random_context(uint64_t seed) {
    Rng rng(mix_seed(seed, "random-context"));
    const double stddev = std::sqrt(0.12);
    ContextVector ctx;
    ctx.source = ContextSource::random;
    ctx.values.resize(kContextDim);
    for (float& v : ctx.values) v = static_cast<float>(rng.normal(-0.04, stddev));
    return ctx;
}

ContextVector zero_context() {
    ContextVector ctx;
    ctx.source = ContextSource::zero;
    ctx.values.assign(kContextDim, 0.0f);
    return ctx;
}

void write_context_file(const std::string& path, const ContextVector& ctx) {
    if (ctx.values.size() != kContextDim) throw DataError("context vector width must be 512");
    write_feature_file(path, 1, kContextDim, ctx.values.data());
}

std::vector<int64_t> CompressionNet::choose_strides(int64_t t_in, int64_t target_len) {
    if (t_in < 1 || target_len < 1) throw DataError("choose_strides: lengths must be positive");
    std::vector<int64_t> best = {1, 1, 1};
    int64_t best_len = -1;
    auto better = [&](int64_t len, int64_t prod, int64_t best_prod) {
        if (best_len < 0) return true;
        const int64_t d = std::abs(len - target_len), bd = std::abs(best_len - target_len);
        if (d != bd) return d < bd;
        const bool ge = len >= target_len, bge = best_len >= target_len;
        if (ge != bge) return ge;
        return prod < best_prod;
    };
    for (int64_t s1 = 1; s1 <= 4; ++s1)
        for (int64_t s2 = 1; s2 <= 4; ++s2)
            for (int64_t s3 = 1; s3 <= 4; ++s3) {
                const int64_t len = conv_len(conv_len(conv_len(t_in, s1), s2), s3);
                const int64_t bprod = best[0] * best[1] * best[2];
                if (better(len, s1 * s2 * s3, bprod)) {
                    best = {s1, s2, s3};
                    best_len = len;
                }
            }
    return best;
}

void CompressionNet::init(Rng& rng, int64_t in_ch, int64_t ch, std::vector<int64_t> strides_) {
    if (strides_.size() != 3) throw DataError("compression net needs exactly 3 strides");
    in_channels = in_ch;
    channels = ch;
    strides = std::move(strides_);
    for (int i = 0; i < 3; ++i) {
        const int64_t ci = i == 0 ? in_ch : ch;
        conv[i].init(rng, ci, ch, 3, strides[static_cast<size_t>(i)], 1);
        if (ci != ch || strides[static_cast<size_t>(i)] != 1)
            skip[i].init(rng, ci, ch, 1, strides[static_cast<size_t>(i)], 0);
    }
    mlp_hidden.init(rng, ch, 2 * ch);
    mlp_out.init(rng, 2 * ch, kSpeechDim);
}

SpeechFeatureSeq CompressionNet::compress_align(const nn::Tensor& raw, int64_t target_len, int fps) const {
    if (raw.rank() != 2 || raw.dim(0) != in_channels)
        throw DataError("compress_align: expected [" + std::to_string(in_channels) + ",T_a] input, got " +
                        raw.shape_str());
    if (raw.dim(1) < target_len)
        throw UsageError("compress_align: input has " + std::to_string(raw.dim(1)) + " steps, target " +
                         std::to_string(target_len) + " (upsampling is out of contract)");
    nn::Tensor h = raw;
    for (int i = 0; i < 3; ++i) {
        nn::Tensor branch = conv[i].forward(h);
        nn::Tensor shortcut = skip[i].w.defined() ? skip[i].forward(h) : h;
        h = nn::relu(nn::add(branch, shortcut));
    }
    h = nn::interp_cols(h, target_len);
    nn::Tensor rows = nn::transpose2d(h);  // [target_len, channels]
    nn::Tensor out = mlp_out.forward(nn::relu(mlp_hidden.forward(rows)));
    SpeechFeatureSeq seq;
    seq.steps = out;
    seq.fps = fps;
    seq.duration_s = static_cast<double>(target_len) / fps;
    return seq;
}

void CompressionNet::state(const std::string& prefix, std::vector<nn::NamedParam>& out) {
    for (int i = 0; i < 3; ++i) {
        conv[i].state(prefix + ".conv" + std::to_string(i), out);
        if (skip[i].w.defined()) skip[i].state(prefix + ".skip" + std::to_string(i), out);
    }
    mlp_hidden.state(prefix + ".mlp_hidden", out);
    mlp_out.state(prefix + ".mlp_out", out);
}

}  // namespace t3m::feat
