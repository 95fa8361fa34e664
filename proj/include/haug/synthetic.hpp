#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "haug/dataset.hpp"

namespace haug {

// colored-geometric-shapes dataset: class identity = (shape, color family),
// so some class pairs differ only in hue and defeat grayscale-invariant
// features by construction
struct SyntheticClass {
    int id;
    std::string shape;
    std::string family;  // "warm" or "cool"
};

struct SyntheticManifest {
    int n = 0;
    int classes = 0;
    int hw = 32;
    uint64_t seed = 0;
    std::vector<SyntheticClass> class_table;
    // same shape, different color family: inseparable for an ideal
    // grayscale-invariant feature
    std::vector<std::pair<int, int>> color_critical_pairs;
};

// writes the dataset to `path` and the manifest to `path + ".manifest.json"`;
// labels are exactly balanced when classes divides n
SyntheticManifest generate_synthetic(int n, int classes, uint64_t seed, const std::string& path,
                                     int hw = 32);

// manifest recomputed from the generation rules alone (no file access)
SyntheticManifest synthetic_manifest(int n, int classes, uint64_t seed, int hw = 32);

Image render_synthetic_image(int class_id, int classes, uint64_t seed, uint64_t index, int hw);

}  // namespace haug
