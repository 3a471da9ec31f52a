#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wact/tensor.hpp"

namespace wact {

// On-disk tensor bundle. Layout (all integers little-endian):
//   magic "WACT" | version u32 | entry count u64 |
//   per entry: name length u64, UTF-8 name, ndim u64, dims u64 each,
//              raw f64 payload.
// Entries keep insertion order; round-trips are bit-identical.
struct Checkpoint {
    std::vector<std::pair<std::string, Tensor>> entries;

    void put(const std::string& name, Tensor t);
    const Tensor* find(const std::string& name) const;
    const Tensor& require(const std::string& name) const; // IoError if absent
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace wact
