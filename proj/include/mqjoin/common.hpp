#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mqjoin {

using RelId = uint32_t;

/** Set of relations, bitset over relation ids. Supports up to 256 relations. */
struct RelSet {
    static constexpr size_t kWords = 4;
    std::array<uint64_t, kWords> bits{};

    static RelSet of(std::initializer_list<RelId> ids) {
        RelSet s;
        for (RelId id : ids) s.add(id);
        return s;
    }
    void add(RelId id) { bits[id >> 6] |= uint64_t{1} << (id & 63); }
    void remove(RelId id) { bits[id >> 6] &= ~(uint64_t{1} << (id & 63)); }
    bool contains(RelId id) const { return (bits[id >> 6] >> (id & 63)) & 1; }
    bool empty() const {
        for (auto w : bits)
            if (w) return false;
        return true;
    }
    size_t count() const {
        size_t n = 0;
        for (auto w : bits) n += static_cast<size_t>(__builtin_popcountll(w));
        return n;
    }
    bool intersects(const RelSet& o) const {
        for (size_t i = 0; i < kWords; ++i)
            if (bits[i] & o.bits[i]) return true;
        return false;
    }
    bool contains_all(const RelSet& o) const {
        for (size_t i = 0; i < kWords; ++i)
            if ((o.bits[i] & ~bits[i]) != 0) return false;
        return true;
    }
    bool is_proper_subset_of(const RelSet& o) const {
        return o.contains_all(*this) && !(*this == o);
    }
    RelSet unite(const RelSet& o) const {
        RelSet r;
        for (size_t i = 0; i < kWords; ++i) r.bits[i] = bits[i] | o.bits[i];
        return r;
    }
    bool operator==(const RelSet& o) const { return bits == o.bits; }
    bool operator<(const RelSet& o) const {
        for (size_t i = kWords; i-- > 0;)
            if (bits[i] != o.bits[i]) return bits[i] < o.bits[i];
        return false;
    }
    /** Member ids in ascending order. */
    std::vector<RelId> members() const {
        std::vector<RelId> out;
        for (size_t w = 0; w < kWords; ++w) {
            uint64_t v = bits[w];
            while (v) {
                unsigned b = static_cast<unsigned>(__builtin_ctzll(v));
                out.push_back(static_cast<RelId>(w * 64 + b));
                v &= v - 1;
            }
        }
        return out;
    }
};

/** Attribute reference: relation id plus attribute index within that relation. */
struct AttrRef {
    RelId rel = 0;
    uint32_t attr = 0;
    bool operator==(const AttrRef& o) const { return rel == o.rel && attr == o.attr; }
    bool operator<(const AttrRef& o) const {
        return rel != o.rel ? rel < o.rel : attr < o.attr;
    }
};

/* 64-bit FNV-1a. Fixed offset basis acts as the hash seed so that partition
 * routing is stable across runs and platforms. */
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}
inline uint64_t fnv1a64(const std::string& s, uint64_t h = 14695981039346656037ull) {
    return fnv1a64(s.data(), s.size(), h);
}

/** Input validation failure (bad workload, trace, or plan). CLI exit code 1. */
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/** Internal consistency failure (builder or solver bug). CLI exit code 2. */
class InternalError : public std::runtime_error {
  public:
    explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mqjoin
