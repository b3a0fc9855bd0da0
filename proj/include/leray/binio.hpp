#pragma once

// Little-endian binary records with a trailing FNV-1a checksum.

#include "leray/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace leray::binio {

static_assert(std::endian::native == std::endian::little, "binary layout assumes little-endian");

inline std::uint64_t fnv1a(const char* p, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(p[i]);
        h *= 1099511628211ull;
    }
    return h;
}

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const char* c = static_cast<const char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * 8);
    }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }
    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot write " + path);
        os.write(buf_.data(), std::streamsize(buf_.size()));
        const std::uint64_t h = fnv1a(buf_.data(), buf_.size());
        os.write(reinterpret_cast<const char*>(&h), 8);
        if (!os) throw IoError("write failed: " + path);
    }

private:
    std::vector<char> buf_;
};

class Reader {
public:
    // Throws IntegrityError when the file is truncated or the checksum fails.
    explicit Reader(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot read " + path);
        buf_.assign(std::istreambuf_iterator<char>(is), {});
        if (buf_.size() < 8) throw IntegrityError(path + ": truncated");
        std::uint64_t h;
        std::memcpy(&h, buf_.data() + buf_.size() - 8, 8);
        buf_.resize(buf_.size() - 8);
        if (h != fnv1a(buf_.data(), buf_.size())) throw IntegrityError(path + ": checksum mismatch");
        path_ = path;
    }
    void raw(void* p, std::size_t n) {
        if (pos_ + n > buf_.size()) throw IntegrityError(path_ + ": truncated record");
        std::memcpy(p, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    double f64() {
        double v;
        raw(&v, 8);
        return v;
    }
    std::vector<double> f64s() {
        const std::uint64_t n = u64();
        if (n > (buf_.size() - pos_) / 8) throw IntegrityError(path_ + ": bad array length");
        std::vector<double> v(n);
        raw(v.data(), n * 8);
        return v;
    }
    std::string str() {
        const std::uint64_t n = u64();
        if (n > buf_.size() - pos_) throw IntegrityError(path_ + ": bad string length");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    std::string path_;
};

}  // namespace leray::binio
