#include "motion/synth.h"

#include <cmath>
#include <cstring>

#include "core/rng.h"

namespace t3m::motion {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kMeanBeatGap = 0.8;
constexpr double kMinBeatGap = 0.45;
constexpr uint64_t kContextBaseSeed = 0x73747963747874ull;
constexpr uint64_t kFaceWeightSeed = 0xface5eedull;

uint64_t style_identity(const SynthStyle& s) {
    switch (s.style_id) {
        case StyleId::calm:
            return fnv1a("calm");
        case StyleId::excited:
            return fnv1a("excited");
        case StyleId::custom: {
            uint64_t a, b;
            std::memcpy(&a, &s.amplitude_scale, 8);
            std::memcpy(&b, &s.beat_lock, 8);
            return mix_seed(fnv1a("custom"), a ^ (b * 0x9e3779b97f4a7c15ull));
        }
    }
    return 0;
}

}  // namespace

std::string SynthStyle::name() const {
    switch (style_id) {
        case StyleId::calm:
            return "calm";
        case StyleId::excited:
            return "excited";
        case StyleId::custom: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "custom:%.6g:%.6g", amplitude_scale, beat_lock);
            return buf;
        }
    }
    return "calm";
}

SynthStyle style_from_name(const std::string& name, uint64_t seed) {
    if (name == "calm") return SynthStyle::calm(seed);
    if (name == "excited") return SynthStyle::excited(seed);
    if (name.rfind("custom:", 0) == 0) {
        double amp = 1.0, lock = 1.0;
        if (std::sscanf(name.c_str(), "custom:%lf:%lf", &amp, &lock) != 2)
            throw DataError("unparseable style name: " + name);
        return SynthStyle::custom(amp, lock, seed);
    }
    throw DataError("unknown style: " + name);
}

std::vector<float> style_context(const SynthStyle& style) {
    // fixed unit-norm base per style identity
    Rng base_rng(mix_seed(kContextBaseSeed, style_identity(style)));
    std::vector<double> base(kContextDim);
    double norm2 = 0.0;
    for (double& v : base) {
        v = base_rng.normal();
        norm2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm2);

    // per-sample jitter, norm <= 0.05
    Rng jr(mix_seed(style.seed, "ctx-jitter"));
    std::vector<double> jit(kContextDim);
    double jnorm2 = 0.0;
    for (double& v : jit) {
        v = jr.normal();
        jnorm2 += v * v;
    }
    const double jscale = (0.05 * jr.uniform()) / std::sqrt(jnorm2);

    std::vector<float> out(kContextDim);
    for (int64_t i = 0; i < kContextDim; ++i)
        out[static_cast<size_t>(i)] = static_cast<float>(base[static_cast<size_t>(i)] * inv +
                                                         jit[static_cast<size_t>(i)] * jscale);
    return out;
}

SynthSample synth_sample(const SynthStyle& style, double duration_s, int fps) {
    if (duration_s < 1.0) throw UsageError("synth_sample: duration must be >= 1 s");
    if (fps < 10) throw UsageError("synth_sample: fps must be >= 10");
    if (style.amplitude_scale <= 0.0) throw UsageError("synth_sample: amplitude_scale must be > 0");
    if (style.beat_lock < 0.0 || style.beat_lock > 1.0)
        throw UsageError("synth_sample: beat_lock must be in [0,1]");

    const int64_t frames = std::llround(duration_s * fps);
    const int64_t steps = std::llround(duration_s * kAudioStepsPerSecond);

    SynthSample out;
    out.audio_steps = steps;
    out.audio_feat.assign(static_cast<size_t>(kAudioChannels * steps), 0.0f);
    out.motion = MotionSequence::zeros(frames, static_cast<uint32_t>(fps));
    out.context = style_context(style);

    // beat times: exponential gaps, mean 0.8 s, redrawn below the minimum so
    // stroke/hold windows never overlap
    Rng rb(mix_seed(style.seed, "beats"));
    double t = 0.0;
    while (true) {
        double gap = 0.0;
        do {
            gap = -kMeanBeatGap * std::log(1.0 - rb.uniform());
        } while (gap < kMinBeatGap);
        t += gap;
        if (t >= duration_s) break;
        const int64_t b = std::llround(t * fps);
        const int64_t sb = std::llround(t * kAudioStepsPerSecond);
        if (b < 2 || b > frames - 3 || sb < 1 || sb > steps - 2) continue;
        out.beats.push_back(t);
    }

    // pseudo-audio: slow per-band floor + white noise + raised-cosine bursts
    Rng ra(mix_seed(style.seed, "audio"));
    auto& af = out.audio_feat;
    for (int64_t c = 0; c < kAudioChannels; ++c) {
        const double fc = ra.uniform(0.1, 0.4);
        const double ph = ra.uniform(0.0, kTwoPi);
        for (int64_t s = 0; s < steps; ++s) {
            const double slow = 0.03 * (1.0 + std::sin(kTwoPi * fc * s / kAudioStepsPerSecond + ph)) / 2.0;
            const double noise = 0.01 * std::abs(ra.normal());
            af[static_cast<size_t>(c * steps + s)] = static_cast<float>(0.05 + slow + noise);
        }
    }
    for (double bt : out.beats) {
        const int64_t sb = std::llround(bt * kAudioStepsPerSecond);
        for (int64_t c = 0; c < kAudioChannels; ++c) {
            const double amp = ra.uniform(0.4, 0.9);
            for (int64_t ds = -5; ds <= 5; ++ds) {
                const int64_t s = sb + ds;
                if (s < 0 || s >= steps) continue;
                const double w = 0.5 * (1.0 + std::cos(3.14159265358979323846 * ds / 6.0));
                af[static_cast<size_t>(c * steps + s)] += static_cast<float>(amp * w);
            }
        }
    }

    // activity envelope: stroke one frame before the beat, 3-frame hold after
    std::vector<double> activity(static_cast<size_t>(frames), 1.0);
    for (double bt : out.beats) {
        const int64_t b = std::llround(bt * fps);
        activity[static_cast<size_t>(b - 1)] += style.beat_lock;
        for (int64_t d = 0; d <= 2; ++d) {
            double& a = activity[static_cast<size_t>(b + d)];
            a = std::max(0.0, a - style.beat_lock);
        }
    }
    std::vector<double> phase(static_cast<size_t>(frames), 0.0);
    for (int64_t f = 1; f < frames; ++f)
        phase[static_cast<size_t>(f)] = phase[static_cast<size_t>(f - 1)] + activity[static_cast<size_t>(f)] / fps;

    // body and hand: per-joint oscillators over the warped phase; values are
    // exactly linear in amplitude_scale
    Rng rm(mix_seed(style.seed, "motion"));
    auto fill_stream = [&](int64_t offset, int64_t count, double amp_lo, double amp_hi) {
        for (int64_t j = 0; j < count; ++j) {
            const double aj = rm.uniform(amp_lo, amp_hi);
            const double fj = rm.uniform(0.4, 1.2);
            const double pj = rm.uniform(0.0, kTwoPi);
            for (int64_t f = 0; f < frames; ++f) {
                const double v = style.amplitude_scale * aj *
                                 std::sin(kTwoPi * fj * phase[static_cast<size_t>(f)] + pj);
                out.motion.row(f)[offset + j] = static_cast<float>(v);
            }
        }
    };
    fill_stream(MotionSequence::kBodyOff, MotionSequence::kBody, 0.25, 0.50);
    fill_stream(MotionSequence::kHandOff, MotionSequence::kHand, 0.50, 0.90);

    // face: squashed audio band energies resampled to frame rate (style
    // independent, so the face stage learns a single audio->face mapping)
    std::vector<double> band_frame(static_cast<size_t>(kAudioChannels * frames), 0.0);
    for (int64_t f = 0; f < frames; ++f) {
        const int64_t s0 = f * steps / frames;
        const int64_t s1 = std::max(s0 + 1, (f + 1) * steps / frames);
        for (int64_t c = 0; c < kAudioChannels; ++c) {
            double acc = 0.0;
            for (int64_t s = s0; s < s1 && s < steps; ++s) acc += af[static_cast<size_t>(c * steps + s)];
            band_frame[static_cast<size_t>(c * frames + f)] = acc / static_cast<double>(s1 - s0);
        }
    }
    Rng rf(kFaceWeightSeed);  // fixed across samples
    double jaw_w[3] = {0.30, 0.08, 0.05};
    std::vector<double> expr_w(MotionSequence::kExpr);
    for (double& w : expr_w) w = rf.uniform(0.2, 0.8);
    for (int64_t f = 0; f < frames; ++f) {
        double total = 0.0;
        for (int64_t c = 0; c < kAudioChannels; ++c) total += band_frame[static_cast<size_t>(c * frames + f)];
        const double env = total / (1.0 + total);
        float* row = out.motion.row(f);
        for (int64_t j = 0; j < MotionSequence::kJaw; ++j)
            row[MotionSequence::kJawOff + j] = static_cast<float>(jaw_w[j] * env);
        for (int64_t k = 0; k < MotionSequence::kExpr; ++k) {
            const double e = band_frame[static_cast<size_t>((k % kAudioChannels) * frames + f)];
            row[MotionSequence::kExprOff + k] = static_cast<float>(expr_w[static_cast<size_t>(k)] * e / (1.0 + e));
        }
    }
    return out;
}

}  // namespace t3m::motion
