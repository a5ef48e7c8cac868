#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motion/motion.h"

namespace t3m::motion {

constexpr int64_t kAudioChannels = 16;
constexpr int64_t kAudioStepsPerSecond = 100;
constexpr int64_t kContextDim = 512;

enum class StyleId { calm, excited, custom };

struct SynthStyle {
    StyleId style_id = StyleId::calm;
    double amplitude_scale = 1.0;
    double beat_lock = 1.0;
    uint64_t seed = 0;

    static SynthStyle calm(uint64_t seed = 0) { return {StyleId::calm, 1.0, 1.0, seed}; }
    static SynthStyle excited(uint64_t seed = 0) { return {StyleId::excited, 2.5, 1.0, seed}; }
    static SynthStyle custom(double amplitude, double lock, uint64_t seed = 0) {
        return {StyleId::custom, amplitude, lock, seed};
    }

    std::string name() const;
    SynthStyle with_seed(uint64_t s) const {
        SynthStyle c = *this;
        c.seed = s;
        return c;
    }
};

SynthStyle style_from_name(const std::string& name, uint64_t seed = 0);

// Training triplet: pseudo-audio band energies, motion, context, beat times.
struct SynthSample {
    std::vector<float> audio_feat;  // kAudioChannels x audio_steps, channel-major
    int64_t audio_steps = 0;
    MotionSequence motion;
    std::vector<float> context;  // kContextDim
    std::vector<double> beats;   // seconds, strictly increasing
};

// Fixed per-style unit-norm context embedding plus small seeded jitter
// (norm <= 0.05). The style provider in feature-providers returns exactly
// this vector, which is the shared-latent convention the fusion stage trains
// against.
std::vector<float> style_context(const SynthStyle& style);

// Procedural sample generator. Pseudo-audio is band noise with raised-cosine
// energy bursts at Poisson-spaced beats (mean gap 0.8 s, redrawn below
// 0.45 s). Motion is per-joint oscillation driven through a time-warp whose
// activity spikes one frame before each beat (the stroke) and drops for the
// three frames after it (the hold), scaled by beat_lock; body+hand values are
// linear in amplitude_scale. Face channels are squashed functions of the
// audio band energies. Deterministic per (style, seed, duration, fps).
SynthSample synth_sample(const SynthStyle& style, double duration_s, int fps);

}  // namespace t3m::motion
