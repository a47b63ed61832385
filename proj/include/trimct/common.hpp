#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace trimct {

// Base error for library failures. The CLI maps subtypes to exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or unparseable configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// A pipeline stage failed mid-run (CLI exit code 3).
class StageError : public Error {
public:
    explicit StageError(const std::string& what) : Error(what) {}
};

// ---- content hashing ------------------------------------------------------

// FNV-1a 64-bit. Used for config hashes and run-manifest content digests;
// these only need to detect nondeterminism, not resist adversaries.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(uint64_t v);

// ---- file io --------------------------------------------------------------

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const void* data, size_t len);
std::string read_file_text(const std::filesystem::path& path);
void write_file_text(const std::filesystem::path& path, const std::string& text);
std::string file_digest(const std::filesystem::path& path);

// ---- little-endian scalar io ----------------------------------------------

// All binary artifacts are little-endian regardless of host order.
void put_u32_le(std::vector<uint8_t>& out, uint32_t v);
void put_u64_le(std::vector<uint8_t>& out, uint64_t v);
void put_f32_le(std::vector<uint8_t>& out, float v);
uint32_t get_u32_le(const uint8_t* p);
uint64_t get_u64_le(const uint8_t* p);
float get_f32_le(const uint8_t* p);

// ---- deterministic parallelism ---------------------------------------------

// Runs fn(i) for i in [0, n). Work is split into contiguous index blocks, one
// per worker; every index is processed by exactly one thread, so as long as
// fn(i) writes only to slot i results are identical for any thread count.
// Cross-index reductions must be done by the caller, in index order.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

// Block variant: fn(begin, end) over disjoint ranges covering [0, n).
void parallel_for_blocks(size_t n, const std::function<void(size_t, size_t)>& fn);

int worker_count();

}  // namespace trimct
