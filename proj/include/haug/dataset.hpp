#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haug/image.hpp"

namespace haug {

// CIFAR-compatible binary record: label byte + 3*H*W channel-planar bytes
struct Dataset {
    std::vector<Image> images;
    std::vector<uint8_t> labels;
    int hw = 32;

    size_t size() const { return images.size(); }
    int n_classes() const;
};

Dataset load_dataset(const std::string& path, int expected_hw);
void save_dataset(const Dataset& ds, const std::string& path);

}  // namespace haug
