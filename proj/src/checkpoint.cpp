#include "haug/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace haug {

uint32_t crc32(const uint8_t* data, size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > buf.size())
            throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = static_cast<uint32_t>(buf[pos]) | (static_cast<uint32_t>(buf[pos + 1]) << 8) |
                     (static_cast<uint32_t>(buf[pos + 2]) << 16) |
                     (static_cast<uint32_t>(buf[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        const uint64_t lo = u32(what);
        const uint64_t hi = u32(what);
        return lo | (hi << 32);
    }
    float f32(const char* what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace

void append_tensor(std::vector<uint8_t>& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape()) put_u32(out, static_cast<uint32_t>(d));
    for (scalar v : t.data()) put_f32(out, static_cast<float>(v));
}

void write_checkpoint(const std::string& path, uint64_t digest,
                      const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), {'H', 'A', 'U', 'G'});
    put_u32(buf, kCheckpointVersion);
    put_u64(buf, digest);
    put_u32(buf, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) append_tensor(buf, name, tensor);
    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write to checkpoint " + path);
}

Tensor* CheckpointData::find(const std::string& name) {
    for (auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 4 + 4 + 8 + 4 + 4) throw std::runtime_error("checkpoint too short: " + path);
    const uint32_t stored_crc = static_cast<uint32_t>(buf[buf.size() - 4]) |
                                (static_cast<uint32_t>(buf[buf.size() - 3]) << 8) |
                                (static_cast<uint32_t>(buf[buf.size() - 2]) << 16) |
                                (static_cast<uint32_t>(buf[buf.size() - 1]) << 24);
    const uint32_t actual_crc = crc32(buf.data(), buf.size() - 4);
    if (stored_crc != actual_crc) {
        throw std::runtime_error("checkpoint CRC mismatch in " + path + " (stored " +
                                 std::to_string(stored_crc) + ", computed " +
                                 std::to_string(actual_crc) + ")");
    }

    Reader r{buf};
    r.need(4, "magic");
    if (std::memcmp(buf.data(), "HAUG", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    r.pos = 4;

    CheckpointData data;
    data.version = r.u32("version");
    if (data.version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(data.version) +
                                 " in " + path + " (expected " + std::to_string(kCheckpointVersion) +
                                 ")");
    }
    data.digest = r.u64("digest");
    const uint32_t count = r.u32("tensor count");
    data.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.u32("name length");
        r.need(name_len, "name");
        std::string name(reinterpret_cast<const char*>(buf.data() + r.pos), name_len);
        r.pos += name_len;
        const uint32_t rank = r.u32("rank");
        std::vector<int> shape(rank);
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(r.u32("extent"));
            numel *= static_cast<size_t>(shape[d]);
        }
        std::vector<scalar> vals(numel);
        for (size_t v = 0; v < numel; ++v) vals[v] = static_cast<scalar>(r.f32("tensor data"));
        data.tensors.emplace_back(std::move(name), Tensor::from_data(shape, std::move(vals)));
    }
    return data;
}

}  // namespace haug
