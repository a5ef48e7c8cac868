#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "core/error.h"

// Little-endian binary file helpers. All on-disk formats in this project are
// little-endian by definition; bytes are assembled explicitly so the code is
// endianness-agnostic.
namespace t3m::io {

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open " + path + " for writing");
    }

    void u32(uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        raw(b, 4);
    }

    void u64(uint64_t v) {
        u32(static_cast<uint32_t>(v));
        u32(static_cast<uint32_t>(v >> 32));
    }

    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }

    void f32s(const float* vs, size_t n) {
        for (size_t i = 0; i < n; ++i) f32(vs[i]);
    }

    void bytes(const char* s, size_t n) { raw(reinterpret_cast<const unsigned char*>(s), n); }

    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw DataError("write failed for " + path_);
    }

private:
    void raw(const unsigned char* p, size_t n) {
        out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) throw DataError("write failed for " + path_);
        offset_ += n;
    }

    std::string path_;
    std::ofstream out_;
    uint64_t offset_ = 0;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError("cannot open " + path);
    }

    uint32_t u32() {
        unsigned char b[4];
        raw(b, 4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }

    uint64_t u64() {
        const uint64_t lo = u32();
        return lo | (static_cast<uint64_t>(u32()) << 32);
    }

    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    void f32s(float* vs, size_t n) {
        for (size_t i = 0; i < n; ++i) vs[i] = f32();
    }

    std::string str(uint32_t max_len = 4096) {
        const uint32_t n = u32();
        if (n > max_len) throw DataError(path_ + ": string length " + std::to_string(n) +
                                         " at byte offset " + std::to_string(offset_ - 4) + " is implausible");
        std::string s(n, '\0');
        raw(reinterpret_cast<unsigned char*>(s.data()), n);
        return s;
    }

    void expect_magic(const char* magic) {
        char got[5] = {0, 0, 0, 0, 0};
        raw(reinterpret_cast<unsigned char*>(got), 4);
        if (std::memcmp(got, magic, 4) != 0)
            throw DataError(path_ + ": bad magic at byte offset 0 (expected \"" + std::string(magic) + "\")");
    }

    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (!in_.eof())
            throw DataError(path_ + ": trailing bytes at offset " + std::to_string(offset_));
    }

    uint64_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

private:
    void raw(unsigned char* p, size_t n) {
        in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n)
            throw DataError(path_ + ": truncated at byte offset " +
                            std::to_string(offset_ + static_cast<uint64_t>(in_.gcount())));
        offset_ += n;
    }

    std::string path_;
    std::ifstream in_;
    uint64_t offset_ = 0;
};

}  // namespace t3m::io
