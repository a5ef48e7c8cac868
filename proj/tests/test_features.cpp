#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/ops.h"
#include "features/features.h"
#include "gradcheck.h"

using namespace t3m;
using namespace t3m::feat;

namespace {

std::string temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() / (std::string("t3m_feat_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("synthetic speech features: shape, zero case, beat alignment") {
    motion::SynthSample s = motion::synth_sample(motion::SynthStyle::excited(808), 2.0, 30);
    CHECK(s.audio_steps == 200);  // 2 s at 100 steps/s

    nn::Tensor raw = speech_embed(s, ProviderSpec{});
    CHECK(raw.shape == std::vector<int64_t>{16, 200});

    // silent pseudo-audio -> zero-energy channels
    motion::SynthSample silent = s;
    std::fill(silent.audio_feat.begin(), silent.audio_feat.end(), 0.0f);
    nn::Tensor z = speech_embed(silent, ProviderSpec{});
    for (double v : *z.data) CHECK(v == 0.0);

    // energy-channel peaks coincide with beats within +-1 step
    REQUIRE(!s.beats.empty());
    const int64_t steps = raw.dim(1);
    for (double bt : s.beats) {
        const int64_t sb = std::llround(bt * 100);
        bool peak_near = false;
        for (int64_t d = -1; d <= 1 && !peak_near; ++d) {
            const int64_t t = sb + d;
            if (t < 1 || t + 1 >= steps) continue;
            const double e0 = (*raw.data)[t - 1], e1 = (*raw.data)[t], e2 = (*raw.data)[t + 1];
            if (e1 >= e0 && e1 >= e2) peak_near = true;
        }
        CHECK(peak_near);
    }
}

TEST_CASE("external_file speech provider loads verbatim and validates shape") {
    const std::string dir = temp_dir("extfile");
    std::vector<float> vals(16 * 50);
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(i) * 0.25f;
    write_feature_file(dir + "/f.t3mf", 16, 50, vals.data());

    motion::SynthSample dummy;
    ProviderSpec p;
    p.kind = ProviderSpec::Kind::external_file;
    p.path = dir + "/f.t3mf";
    nn::Tensor t = speech_embed(dummy, p);
    CHECK(t.shape == std::vector<int64_t>{16, 50});
    CHECK((*t.data)[17] == doctest::Approx(17 * 0.25));

    write_feature_file(dir + "/bad.t3mf", 8, 50, vals.data());
    p.path = dir + "/bad.t3mf";
    CHECK_THROWS_AS(speech_embed(dummy, p), DataError);
}

TEST_CASE("feature file round-trip and corruption errors") {
    const std::string dir = temp_dir("t3mf");
    std::vector<float> vals = {1.5f, -2.25f, 0.0f, 42.0f, -0.125f, 7.0f};
    write_feature_file(dir + "/m.t3mf", 2, 3, vals.data());
    FeatureMatrix m = read_feature_file(dir + "/m.t3mf");
    CHECK(m.rows == 2);
    CHECK(m.cols == 3);
    CHECK(m.values == vals);

    std::filesystem::resize_file(dir + "/m.t3mf", 18);
    CHECK_THROWS_WITH_AS(read_feature_file(dir + "/m.t3mf"), doctest::Contains("truncated"), DataError);
}

TEST_CASE("context providers") {
    using motion::SynthStyle;

    // calm vs excited bases nearly orthogonal
    ContextVector calm = context_from_style(SynthStyle::calm(1));
    ContextVector excited = context_from_style(SynthStyle::excited(1));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < calm.values.size(); ++i) {
        dot += static_cast<double>(calm.values[i]) * excited.values[i];
        na += static_cast<double>(calm.values[i]) * calm.values[i];
        nb += static_cast<double>(excited.values[i]) * excited.values[i];
    }
    CHECK(std::abs(dot) / std::sqrt(na * nb) < 0.2);
    CHECK(calm.source == ContextSource::style_provider);

    // determinism and per-seed jitter
    ContextVector again = context_from_style(SynthStyle::calm(1));
    CHECK(calm.values == again.values);
    ContextVector other = context_from_style(SynthStyle::calm(2));
    CHECK(calm.values != other.values);
    double jit = 0.0;
    for (size_t i = 0; i < calm.values.size(); ++i) {
        const double d = static_cast<double>(calm.values[i]) - other.values[i];
        jit += d * d;
    }
    CHECK(std::sqrt(jit) <= 0.1 + 1e-6);  // two jitters of norm <= 0.05 each

    // matches the generator's stored context (shared latent convention)
    motion::SynthSample s = motion::synth_sample(SynthStyle::calm(1), 1.0, 16);
    CHECK(s.context == calm.values);

    // file round-trip
    const std::string dir = temp_dir("ctx");
    write_context_file(dir + "/c.t3mf", calm);
    ContextVector loaded = context_from_file(dir + "/c.t3mf");
    CHECK(loaded.values == calm.values);

    std::vector<float> wrong(256, 0.0f);
    write_feature_file(dir + "/w.t3mf", 1, 256, wrong.data());
    CHECK_THROWS_AS(context_from_file(dir + "/w.t3mf"), DataError);
}

TEST_CASE("random_context statistics and determinism") {
    ContextVector a = random_context(99);
    ContextVector b = random_context(99);
    CHECK(a.values == b.values);
    CHECK(a.source == ContextSource::random);

    // law of large numbers over many draws
    double sum = 0.0, sum2 = 0.0;
    const int64_t n_vectors = 200;  // 200*512 > 1e5 draws
    for (int64_t s = 0; s < n_vectors; ++s) {
        ContextVector c = random_context(static_cast<uint64_t>(s));
        for (float v : c.values) {
            sum += v;
            sum2 += static_cast<double>(v) * v;
        }
    }
    const double n = static_cast<double>(n_vectors * 512);
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - (-0.04)) < 0.01);
    CHECK(std::abs(var - 0.12) < 0.01);
}

TEST_CASE("zero_context") {
    ContextVector z1 = zero_context();
    ContextVector z2 = zero_context();
    CHECK(z1.values == z2.values);
    CHECK(z1.source == ContextSource::zero);
    double norm = 0.0;
    for (float v : z1.values) norm += static_cast<double>(v) * v;
    CHECK(norm == 0.0);
}

TEST_CASE("compression net: stride search and exact output length") {
    // 2 s at 100 steps/s compressed to 30 fps -> 60 rows of width 768
    CHECK(CompressionNet::choose_strides(200, 60) == std::vector<int64_t>{1, 1, 3});

    Rng rng(5150);
    CompressionNet net;
    net.init(rng, 16, 32, CompressionNet::choose_strides(200, 60));
    nn::Tensor raw = nn::Tensor::zeros({16, 200});
    for (double& v : *raw.data) v = rng.normal();
    SpeechFeatureSeq seq = net.compress_align(raw, 60, 30);
    CHECK(seq.steps.shape == std::vector<int64_t>{60, 768});
    seq.validate();

    // deterministic under frozen weights
    SpeechFeatureSeq seq2 = net.compress_align(raw, 60, 30);
    CHECK(*seq.steps.data == *seq2.steps.data);

    // upsampling out of contract
    CHECK_THROWS_AS(net.compress_align(raw, 300, 100), UsageError);

    // width is 768 regardless of input channel count
    CompressionNet net8;
    net8.init(rng, 8, 16, {2, 1, 1});
    nn::Tensor raw8 = nn::Tensor::zeros({8, 64});
    CHECK(net8.compress_align(raw8, 16, 16).steps.dim(1) == 768);
}

TEST_CASE("interp_cols values and gradient") {
    nn::Tensor x = nn::Tensor::from({1, 3}, {0.0, 1.0, 4.0});
    nn::Tensor y = nn::interp_cols(x, 5);
    CHECK((*y.data)[0] == doctest::Approx(0.0));
    CHECK((*y.data)[1] == doctest::Approx(0.5));
    CHECK((*y.data)[2] == doctest::Approx(1.0));
    CHECK((*y.data)[3] == doctest::Approx(2.5));
    CHECK((*y.data)[4] == doctest::Approx(4.0));

    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const int64_t c = 1 + static_cast<int64_t>(rng.uniform_int(3));
        const int64_t t = 2 + static_cast<int64_t>(rng.uniform_int(6));
        const int64_t to = 1 + static_cast<int64_t>(rng.uniform_int(8));
        nn::Tensor in = nn::Tensor::zeros({c, t}, true);
        for (double& v : *in.data) v = rng.normal();
        nn::Tensor w = nn::Tensor::zeros({c, to});
        for (double& v : *w.data) v = rng.normal();
        auto res = gradcheck::check({&in}, [&] { return nn::mean_all(nn::mul(nn::interp_cols(in, to), w)); });
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("speech feature length formula holds for whole frame counts") {
    Rng rng(77);
    CompressionNet net;
    net.init(rng, 16, 16, {2, 2, 1});
    for (int fps : {10, 16, 30}) {
        for (double dur : {1.0, 2.0, 3.0}) {
            const int64_t ta = std::llround(dur * 100);
            const int64_t lseq = std::llround(dur * fps);
            nn::Tensor raw = nn::Tensor::zeros({16, ta});
            SpeechFeatureSeq seq = net.compress_align(raw, lseq, fps);
            CHECK(seq.len() == lseq);
            seq.validate();
        }
    }
}
