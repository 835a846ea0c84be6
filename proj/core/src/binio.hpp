#pragma once

// Internal little-endian binary IO helpers for checkpoint/model files.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eraser::detail {

inline void write_bytes(std::ofstream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ofstream& out, uint32_t x) { write_bytes(out, &x, 4); }
inline void write_u64(std::ofstream& out, uint64_t x) { write_bytes(out, &x, 8); }
inline void write_f64(std::ofstream& out, double x) { write_bytes(out, &x, 8); }

inline void write_f64s(std::ofstream& out, const std::vector<double>& v) {
    write_bytes(out, v.data(), v.size() * 8);
}

inline void read_bytes(std::ifstream& in, void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("binary file truncated");
}

inline uint32_t read_u32(std::ifstream& in) {
    uint32_t x;
    read_bytes(in, &x, 4);
    return x;
}

inline uint64_t read_u64(std::ifstream& in) {
    uint64_t x;
    read_bytes(in, &x, 8);
    return x;
}

inline double read_f64(std::ifstream& in) {
    double x;
    read_bytes(in, &x, 8);
    return x;
}

inline void read_f64s(std::ifstream& in, std::vector<double>& v) {
    read_bytes(in, v.data(), v.size() * 8);
}

inline void write_magic(std::ofstream& out, const char (&m)[9]) { write_bytes(out, m, 8); }

inline void expect_magic(std::ifstream& in, const char (&m)[9], const std::string& what) {
    char buf[8];
    read_bytes(in, buf, 8);
    if (std::memcmp(buf, m, 8) != 0) throw std::runtime_error("bad magic in " + what);
}

}  // namespace eraser::detail
