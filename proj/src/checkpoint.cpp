#include "wact/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace wact {

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(os, bits);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

} // namespace

void Checkpoint::put(const std::string& name, Tensor t) {
    for (auto& e : entries) {
        if (e.first == name) {
            e.second = std::move(t);
            return;
        }
    }
    entries.emplace_back(name, std::move(t));
}

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.first == name) return &e.second;
    return nullptr;
}

const Tensor& Checkpoint::require(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) throw IoError("checkpoint: missing tensor '" + name + "'");
    return *t;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    os.write("WACT", 4);
    write_u32(os, kCheckpointVersion);
    write_u64(os, ckpt.entries.size());
    for (const auto& [name, t] : ckpt.entries) {
        write_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(os, t.ndim());
        for (std::size_t d : t.shape()) write_u64(os, d);
        for (double v : t.data()) write_f64(os, v);
    }
    if (!os) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "WACT", 4) != 0) {
        throw IoError("checkpoint: bad magic in '" + path + "'");
    }
    std::uint32_t version = read_u32(is);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    }
    std::uint64_t count = read_u64(is);
    Checkpoint ckpt;
    ckpt.entries.reserve(count);
    for (std::uint64_t e = 0; e < count; ++e) {
        std::uint64_t name_len = read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!is) throw IoError("checkpoint: truncated name");
        std::uint64_t ndim = read_u64(is);
        std::vector<std::size_t> shape(ndim);
        std::size_t total = 1;
        for (std::uint64_t i = 0; i < ndim; ++i) {
            shape[i] = static_cast<std::size_t>(read_u64(is));
            total *= shape[i];
        }
        std::vector<double> data(total);
        for (std::size_t i = 0; i < total; ++i) data[i] = read_f64(is);
        ckpt.entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return ckpt;
}

} // namespace wact
