#include "droid/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "droid/errors.hpp"

namespace droid::digest {

namespace {

std::string to_hex(const unsigned char* bytes, size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (size_t i = 0; i < len; ++i) {
        out[2 * i] = digits[bytes[i] >> 4];
        out[2 * i + 1] = digits[bytes[i] & 0x0F];
    }
    return out;
}

struct Sha256Ctx {
    EVP_MD_CTX* ctx;
    Sha256Ctx() : ctx(EVP_MD_CTX_new()) {
        if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
            throw IoError("sha256: failed to initialize digest context");
    }
    ~Sha256Ctx() { EVP_MD_CTX_free(ctx); }
    void update(const void* data, size_t len) {
        if (EVP_DigestUpdate(ctx, data, len) != 1)
            throw IoError("sha256: digest update failed");
    }
    std::string finish() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, md.data(), &len) != 1)
            throw IoError("sha256: digest finalize failed");
        return to_hex(md.data(), len);
    }
};

} // namespace

std::string sha256_hex(std::string_view data) {
    Sha256Ctx c;
    c.update(data.data(), data.size());
    return c.finish();
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for digest: " + path);
    Sha256Ctx c;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        std::streamsize got = in.gcount();
        if (got > 0) c.update(buf.data(), static_cast<size_t>(got));
    }
    return c.finish();
}

} // namespace droid::digest
