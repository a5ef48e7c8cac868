#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.h"

namespace t3m::motion {

// Per-frame holistic pose parameters. Row layout matches the on-disk format:
// jaw(3) | expression(100) | body(63) | hand(90), angles in radians.
struct MotionSequence {
    static constexpr int64_t kJaw = 3;
    static constexpr int64_t kExpr = 100;
    static constexpr int64_t kBody = 63;
    static constexpr int64_t kHand = 90;
    static constexpr int64_t kRow = kJaw + kExpr + kBody + kHand;  // 256
    static constexpr int64_t kJawOff = 0;
    static constexpr int64_t kExprOff = kJaw;
    static constexpr int64_t kBodyOff = kJaw + kExpr;
    static constexpr int64_t kHandOff = kJaw + kExpr + kBody;

    uint32_t fps = 30;
    int64_t frames = 0;
    std::vector<float> values;  // frames x kRow, row-major

    static MotionSequence zeros(int64_t frames, uint32_t fps);
    void validate() const;

    float* row(int64_t t) { return values.data() + t * kRow; }
    const float* row(int64_t t) const { return values.data() + t * kRow; }
    double duration_s() const { return static_cast<double>(frames) / fps; }
};

// Shared-shape / camera / translation parameters; carried through file I/O
// untouched and never consumed by training.
struct PGTParams {
    std::vector<float> beta = std::vector<float>(300, 0.0f);
    std::vector<float> theta_c = std::vector<float>(3, 0.0f);
    std::vector<float> epsilon = std::vector<float>(3, 0.0f);
};

// channel-major [count, len] slice of a motion stream (e.g. body -> [63,T])
nn::Tensor slice_ct(const MotionSequence& m, int64_t offset, int64_t count, int64_t t0, int64_t len);
// write a [count, len] channel-major tensor back into the stream slice
void store_ct(MotionSequence& m, const nn::Tensor& src, int64_t offset, int64_t t0);

// mean absolute frame-to-frame delta over the body+hand slices, per frame
// (index t holds |frame t - frame t-1|, so entry 0 is 0)
std::vector<double> motion_speed(const MotionSequence& m);
// mean of motion_speed over the hand slice only
double mean_hand_speed(const MotionSequence& m);

// Motion file: magic "T3MM", u32 version=1, u32 fps, u32 T, 300 f32 beta,
// 3 f32 theta_c, 3 f32 epsilon, then T x 256 f32 frames, little-endian.
void write_motion(const std::string& path, const MotionSequence& m, const PGTParams& pgt);
void read_motion(const std::string& path, MotionSequence& m, PGTParams& pgt);

}  // namespace t3m::motion
