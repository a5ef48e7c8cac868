#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motion/synth.h"

namespace t3m::motion {

struct DatasetRecord {
    std::string motion_path;  // relative to the dataset dir
    std::string style_name;
    double duration_s = 0.0;
    uint64_t seed = 0;
    std::string split;  // "train" | "val"

    std::string stem() const;  // motion_path without the .t3mm suffix
};

struct Dataset {
    std::string dir;
    std::vector<DatasetRecord> records;

    std::vector<size_t> split_indices(const std::string& split) const;
};

struct DatasetSpec {
    int64_t n_samples = 0;
    std::vector<SynthStyle> styles;  // cycled over samples
    double train_frac = 0.8, val_frac = 0.2;
    double duration_s = 3.0;
    int fps = 30;
    uint64_t master_seed = 0;
};

// Generates every sample deterministically (per-sample seed derived from the
// master seed), writes motion/audio/context/beats files plus manifest.txt.
// Samples may be generated by up to `threads` workers; output is identical
// regardless of thread count.
Dataset make_dataset(const DatasetSpec& spec, const std::string& dir, int threads = 1);

Dataset load_manifest(const std::string& dir);
SynthSample load_sample(const Dataset& ds, size_t index);

uint64_t sample_seed(uint64_t master_seed, int64_t index);

}  // namespace t3m::motion
