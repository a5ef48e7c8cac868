#include "motion/motion.h"

#include <cmath>

#include "core/binio.h"

namespace t3m::motion {

MotionSequence MotionSequence::zeros(int64_t frames, uint32_t fps) {
    if (frames < 1) throw DataError("motion sequence needs at least 1 frame");
    if (fps == 0) throw DataError("motion fps must be positive");
    MotionSequence m;
    m.fps = fps;
    m.frames = frames;
    m.values.assign(static_cast<size_t>(frames * kRow), 0.0f);
    return m;
}

void MotionSequence::validate() const {
    if (frames < 1) throw DataError("motion sequence needs at least 1 frame");
    if (fps == 0) throw DataError("motion fps must be positive");
    if (values.size() != static_cast<size_t>(frames * kRow))
        throw DataError("motion buffer holds " + std::to_string(values.size()) + " values, expected " +
                        std::to_string(frames * kRow));
}

nn::Tensor slice_ct(const MotionSequence& m, int64_t offset, int64_t count, int64_t t0, int64_t len) {
    if (t0 < 0 || len < 1 || t0 + len > m.frames)
        throw DataError("motion slice [" + std::to_string(t0) + "," + std::to_string(t0 + len) +
                        ") out of " + std::to_string(m.frames) + " frames");
    nn::Tensor out = nn::Tensor::zeros({count, len});
    for (int64_t c = 0; c < count; ++c)
        for (int64_t t = 0; t < len; ++t)
            (*out.data)[c * len + t] = static_cast<double>(m.row(t0 + t)[offset + c]);
    return out;
}

void store_ct(MotionSequence& m, const nn::Tensor& src, int64_t offset, int64_t t0) {
    const int64_t count = src.dim(0), len = src.dim(1);
    if (t0 + len > m.frames)
        throw DataError("motion store past end of sequence");
    for (int64_t c = 0; c < count; ++c)
        for (int64_t t = 0; t < len; ++t)
            m.row(t0 + t)[offset + c] = static_cast<float>((*src.data)[c * len + t]);
}

std::vector<double> motion_speed(const MotionSequence& m) {
    std::vector<double> speed(static_cast<size_t>(m.frames), 0.0);
    const int64_t n_dims = MotionSequence::kBody + MotionSequence::kHand;
    for (int64_t t = 1; t < m.frames; ++t) {
        const float* a = m.row(t - 1) + MotionSequence::kBodyOff;
        const float* b = m.row(t) + MotionSequence::kBodyOff;
        double s = 0.0;
        for (int64_t c = 0; c < n_dims; ++c) s += std::abs(static_cast<double>(b[c]) - a[c]);
        speed[static_cast<size_t>(t)] = s / static_cast<double>(n_dims);
    }
    return speed;
}

double mean_hand_speed(const MotionSequence& m) {
    if (m.frames < 2) return 0.0;
    double total = 0.0;
    for (int64_t t = 1; t < m.frames; ++t) {
        const float* a = m.row(t - 1) + MotionSequence::kHandOff;
        const float* b = m.row(t) + MotionSequence::kHandOff;
        double s = 0.0;
        for (int64_t c = 0; c < MotionSequence::kHand; ++c) s += std::abs(static_cast<double>(b[c]) - a[c]);
        total += s / static_cast<double>(MotionSequence::kHand);
    }
    return total / static_cast<double>(m.frames - 1);
}

void write_motion(const std::string& path, const MotionSequence& m, const PGTParams& pgt) {
    m.validate();
    if (pgt.beta.size() != 300 || pgt.theta_c.size() != 3 || pgt.epsilon.size() != 3)
        throw DataError("pgt parameter sizes must be 300/3/3");
    io::Writer w(path);
    w.bytes("T3MM", 4);
    w.u32(1);
    w.u32(m.fps);
    w.u32(static_cast<uint32_t>(m.frames));
    w.f32s(pgt.beta.data(), 300);
    w.f32s(pgt.theta_c.data(), 3);
    w.f32s(pgt.epsilon.data(), 3);
    w.f32s(m.values.data(), m.values.size());
    w.close();
}

void read_motion(const std::string& path, MotionSequence& m, PGTParams& pgt) {
    io::Reader r(path);
    r.expect_magic("T3MM");
    const uint32_t version = r.u32();
    if (version != 1)
        throw DataError(path + ": unsupported motion file version " + std::to_string(version) +
                        " at byte offset 4");
    const uint32_t fps = r.u32();
    const uint32_t frames = r.u32();
    if (fps == 0 || frames == 0)
        throw DataError(path + ": zero fps or frame count at byte offset 8");
    MotionSequence out;
    out.fps = fps;
    out.frames = frames;
    PGTParams p;
    r.f32s(p.beta.data(), 300);
    r.f32s(p.theta_c.data(), 3);
    r.f32s(p.epsilon.data(), 3);
    out.values.resize(static_cast<size_t>(out.frames) * MotionSequence::kRow);
    r.f32s(out.values.data(), out.values.size());
    r.expect_eof();
    m = std::move(out);
    pgt = std::move(p);
}

}  // namespace t3m::motion
