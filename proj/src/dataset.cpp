#include "haug/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace haug {

int Dataset::n_classes() const {
    int mx = -1;
    for (uint8_t l : labels) mx = std::max(mx, static_cast<int>(l));
    return mx + 1;
}

Dataset load_dataset(const std::string& path, int expected_hw) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset file " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff file_len = in.tellg();
    in.seekg(0);

    const size_t record = 1 + 3 * static_cast<size_t>(expected_hw) * expected_hw;
    if (file_len <= 0 || static_cast<size_t>(file_len) % record != 0) {
        throw std::runtime_error("dataset " + path + ": length " + std::to_string(file_len) +
                                 " is not a multiple of the record size " + std::to_string(record) +
                                 " for " + std::to_string(expected_hw) + "x" +
                                 std::to_string(expected_hw) + " images");
    }
    const size_t count = static_cast<size_t>(file_len) / record;

    Dataset ds;
    ds.hw = expected_hw;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    std::vector<unsigned char> buf(record);
    const int hw2 = expected_hw * expected_hw;
    for (size_t r = 0; r < count; ++r) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record));
        if (!in) {
            throw std::runtime_error("dataset " + path + ": truncated read at record " +
                                     std::to_string(r) + " (expected " + std::to_string(record) +
                                     " bytes)");
        }
        ds.labels.push_back(buf[0]);
        Image img(expected_hw, expected_hw);
        for (int c = 0; c < 3; ++c) {
            const unsigned char* plane = buf.data() + 1 + static_cast<size_t>(c) * hw2;
            for (int y = 0; y < expected_hw; ++y)
                for (int x = 0; x < expected_hw; ++x)
                    img.at(y, x, c) = static_cast<float>(plane[y * expected_hw + x]) / 255.0f;
        }
        ds.images.push_back(std::move(img));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset file " + path);
    const int hw = ds.hw;
    const int hw2 = hw * hw;
    std::vector<unsigned char> buf(1 + 3 * static_cast<size_t>(hw2));
    for (size_t r = 0; r < ds.images.size(); ++r) {
        const Image& img = ds.images[r];
        if (img.height != hw || img.width != hw)
            throw std::invalid_argument("save_dataset: image resolution mismatch");
        buf[0] = ds.labels[r];
        for (int c = 0; c < 3; ++c) {
            unsigned char* plane = buf.data() + 1 + static_cast<size_t>(c) * hw2;
            for (int y = 0; y < hw; ++y)
                for (int x = 0; x < hw; ++x) {
                    const float v = img.at(y, x, c);
                    plane[y * hw + x] =
                        static_cast<unsigned char>(std::lround(std::min(1.0f, std::max(0.0f, v)) * 255.0f));
                }
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw std::runtime_error("short write to dataset file " + path);
}

}  // namespace haug
