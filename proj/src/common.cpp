#include "trimct/common.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>

namespace trimct {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for reading: " + path.string());
    in.seekg(0, std::ios::end);
    const auto len = static_cast<size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> bytes(len);
    if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(len));
    if (!in) throw Error("short read: " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const void* data, size_t len) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out) throw Error("short write: " + path.string());
}

std::string read_file_text(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_file_text(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, text.data(), text.size());
}

std::string file_digest(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_u64_le(std::vector<uint8_t>& out, uint64_t v) {
    put_u32_le(out, static_cast<uint32_t>(v & 0xffffffffull));
    put_u32_le(out, static_cast<uint32_t>(v >> 32));
}

void put_f32_le(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32_le(out, bits);
}

uint32_t get_u32_le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64_le(const uint8_t* p) {
    return static_cast<uint64_t>(get_u32_le(p)) | (static_cast<uint64_t>(get_u32_le(p + 4)) << 32);
}

float get_f32_le(const uint8_t* p) {
    uint32_t bits = get_u32_le(p);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

int worker_count() {
    static const int n = [] {
        if (const char* env = std::getenv("TRIMCT_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return std::min(v, 64);
        }
        unsigned hc = std::thread::hardware_concurrency();
        return static_cast<int>(std::clamp(hc, 1u, 8u));
    }();
    return n;
}

namespace {
thread_local bool in_parallel_region = false;
}

void parallel_for_blocks(size_t n, const std::function<void(size_t, size_t)>& fn) {
    if (n == 0) return;
    const size_t workers = std::min<size_t>(static_cast<size_t>(worker_count()), n);
    // Nested regions run inline; the outer region already owns the workers.
    if (workers <= 1 || in_parallel_region) {
        fn(0, n);
        return;
    }
    const size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (size_t w = 1; w < workers; ++w) {
        const size_t lo = w * chunk;
        const size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&fn, lo, hi] {
            in_parallel_region = true;
            fn(lo, hi);
            in_parallel_region = false;
        });
    }
    in_parallel_region = true;
    fn(0, std::min(n, chunk));
    in_parallel_region = false;
    for (auto& t : threads) t.join();
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    parallel_for_blocks(n, [&fn](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) fn(i);
    });
}

}  // namespace trimct
