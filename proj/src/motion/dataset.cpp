#include "motion/dataset.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "core/rng.h"
#include "features/features.h"

namespace t3m::motion {

namespace fs = std::filesystem;

std::string DatasetRecord::stem() const {
    const auto pos = motion_path.rfind(".t3mm");
    return pos == std::string::npos ? motion_path : motion_path.substr(0, pos);
}

std::vector<size_t> Dataset::split_indices(const std::string& split) const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].split == split) idx.push_back(i);
    return idx;
}

uint64_t sample_seed(uint64_t master_seed, int64_t index) {
    return mix_seed(master_seed, 0x5a5a0000ull + static_cast<uint64_t>(index));
}

static void write_sample_files(const std::string& dir, const DatasetRecord& rec, const SynthSample& s) {
    PGTParams pgt;
    Rng pr(mix_seed(rec.seed, "pgt"));
    for (float& v : pgt.beta) v = static_cast<float>(pr.normal(0.0, 0.1));
    for (float& v : pgt.theta_c) v = static_cast<float>(pr.normal(0.0, 0.1));
    for (float& v : pgt.epsilon) v = static_cast<float>(pr.normal(0.0, 0.1));
    write_motion(dir + "/" + rec.motion_path, s.motion, pgt);

    const std::string stem = dir + "/" + rec.stem();
    feat::write_feature_file(stem + ".audio.t3mf", kAudioChannels, s.audio_steps, s.audio_feat.data());
    feat::write_feature_file(stem + ".ctx.t3mf", 1, kContextDim, s.context.data());
    if (s.beats.empty()) {
        const float none = -1.0f;  // sentinel row; T3MF cannot encode zero columns
        feat::write_feature_file(stem + ".beats.t3mf", 1, 1, &none);
    } else {
        std::vector<float> b(s.beats.begin(), s.beats.end());
        feat::write_feature_file(stem + ".beats.t3mf", 1, static_cast<int64_t>(b.size()), b.data());
    }
}

Dataset make_dataset(const DatasetSpec& spec, const std::string& dir, int threads) {
    if (spec.n_samples < 2) throw UsageError("make_dataset: need at least 2 samples");
    if (spec.styles.empty()) throw UsageError("make_dataset: style list is empty");
    if (std::abs(spec.train_frac + spec.val_frac - 1.0) > 1e-9)
        throw UsageError("make_dataset: split fractions must sum to 1");

    fs::create_directories(dir);
    const int64_t n_train = std::llround(spec.train_frac * static_cast<double>(spec.n_samples));

    Dataset ds;
    ds.dir = dir;
    for (int64_t i = 0; i < spec.n_samples; ++i) {
        DatasetRecord rec;
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%05lld.t3mm", static_cast<long long>(i));
        rec.motion_path = name;
        rec.style_name = spec.styles[static_cast<size_t>(i) % spec.styles.size()].name();
        rec.duration_s = spec.duration_s;
        rec.seed = sample_seed(spec.master_seed, i);
        rec.split = i < n_train ? "train" : "val";
        ds.records.push_back(std::move(rec));
    }

    const int n_workers = std::max(1, threads);
    std::vector<std::thread> workers;
    std::vector<std::string> worker_error(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (size_t i = static_cast<size_t>(w); i < ds.records.size(); i += static_cast<size_t>(n_workers)) {
                    const DatasetRecord& rec = ds.records[i];
                    const SynthStyle style =
                        spec.styles[i % spec.styles.size()].with_seed(rec.seed);
                    write_sample_files(dir, rec, synth_sample(style, spec.duration_s, spec.fps));
                }
            } catch (const std::exception& e) {
                worker_error[static_cast<size_t>(w)] = e.what();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (const std::string& err : worker_error)
        if (!err.empty()) throw DataError("dataset generation failed: " + err);

    std::ofstream mf(dir + "/manifest.txt");
    if (!mf) throw DataError("cannot write " + dir + "/manifest.txt");
    mf << "# t3m dataset manifest v1\n";
    mf << "# master_seed " << spec.master_seed << " n " << spec.n_samples
       << " fps " << spec.fps << "\n";
    mf << "# path style duration_s seed split\n";
    char line[256];
    for (const DatasetRecord& rec : ds.records) {
        std::snprintf(line, sizeof(line), "%s %s %.9g %llu %s\n", rec.motion_path.c_str(),
                      rec.style_name.c_str(), rec.duration_s,
                      static_cast<unsigned long long>(rec.seed), rec.split.c_str());
        mf << line;
    }
    mf.close();
    if (!mf) throw DataError("write failed for " + dir + "/manifest.txt");
    return ds;
}

Dataset load_manifest(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.txt");
    if (!mf) throw DataError("cannot open " + dir + "/manifest.txt (run gen-data first)");
    Dataset ds;
    ds.dir = dir;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        DatasetRecord rec;
        unsigned long long seed = 0;
        if (!(ss >> rec.motion_path >> rec.style_name >> rec.duration_s >> seed >> rec.split))
            throw DataError(dir + "/manifest.txt: unparseable record: " + line);
        rec.seed = seed;
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.empty()) throw DataError(dir + "/manifest.txt: no records");
    return ds;
}

SynthSample load_sample(const Dataset& ds, size_t index) {
    if (index >= ds.records.size()) throw DataError("load_sample: index out of range");
    const DatasetRecord& rec = ds.records[index];
    const std::string stem = ds.dir + "/" + rec.stem();

    SynthSample s;
    PGTParams pgt;
    read_motion(ds.dir + "/" + rec.motion_path, s.motion, pgt);

    feat::FeatureMatrix audio = feat::read_feature_file(stem + ".audio.t3mf");
    if (audio.rows != kAudioChannels)
        throw DataError(stem + ".audio.t3mf: expected " + std::to_string(kAudioChannels) + " channels");
    s.audio_feat = std::move(audio.values);
    s.audio_steps = audio.cols;

    feat::FeatureMatrix ctx = feat::read_feature_file(stem + ".ctx.t3mf");
    if (ctx.rows != 1 || ctx.cols != kContextDim)
        throw DataError(stem + ".ctx.t3mf: expected 1x512 context");
    s.context = std::move(ctx.values);

    feat::FeatureMatrix beats = feat::read_feature_file(stem + ".beats.t3mf");
    for (float b : beats.values)
        if (b >= 0.0f) s.beats.push_back(static_cast<double>(b));
    return s;
}

}  // namespace t3m::motion
