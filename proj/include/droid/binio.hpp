#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "droid/errors.hpp"

// Little-endian binary encoding shared by the model and matrix containers.

namespace droid::binio {

class Writer {
public:
    void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(uint32_t v) { raw(&v, sizeof v); }
    void u64(uint64_t v) { raw(&v, sizeof v); }
    void i32(int32_t v) { raw(&v, sizeof v); }
    void i64(int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(std::string_view s) {
        u32(static_cast<uint32_t>(s.size()));
        buf_.append(s.data(), s.size());
    }
    void magic(const char (&m)[5]) { buf_.append(m, 4); }
    const std::string& bytes() const { return buf_; }

private:
    void raw(const void* p, size_t n) {
        static_assert(std::endian::native == std::endian::little,
                      "container format assumes a little-endian host");
        buf_.append(reinterpret_cast<const char*>(p), n);
    }
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data, std::string what = "container")
        : data_(data), what_(std::move(what)) {}

    uint8_t u8() { return static_cast<uint8_t>(take(1)[0]); }
    uint32_t u32() { return scalar<uint32_t>(); }
    uint64_t u64() { return scalar<uint64_t>(); }
    int32_t i32() { return scalar<int32_t>(); }
    int64_t i64() { return scalar<int64_t>(); }
    double f64() { return scalar<double>(); }
    std::string str() {
        uint32_t len = u32();
        auto s = take(len);
        return std::string(s);
    }
    void expect_magic(const char (&m)[5]) {
        auto got = take(4);
        if (std::memcmp(got.data(), m, 4) != 0)
            throw ValidationError(what_ + ": bad magic bytes (foreign or corrupt file)");
    }
    bool at_end() const { return pos_ == data_.size(); }
    void expect_end() {
        if (!at_end()) throw ValidationError(what_ + ": trailing bytes");
    }

private:
    std::string_view take(size_t n) {
        if (pos_ + n > data_.size())
            throw ValidationError(what_ + ": truncated (wanted " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(pos_) + ")");
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename T>
    T scalar() {
        auto s = take(sizeof(T));
        T v;
        std::memcpy(&v, s.data(), sizeof(T));
        return v;
    }
    std::string_view data_;
    size_t pos_ = 0;
    std::string what_;
};

std::string read_binary_file(const std::string& path);
void write_binary_file(const std::string& path, std::string_view bytes);

} // namespace droid::binio
