#include "distrace/digest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace distrace {

namespace {

std::string to_hex(const unsigned char* bytes, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out(n * 2, '0');
    for (size_t i = 0; i < n; ++i) {
        out[2 * i] = digits[bytes[i] >> 4];
        out[2 * i + 1] = digits[bytes[i] & 0xf];
    }
    return out;
}

void sha256_raw(std::string_view data, unsigned char out[32]) {
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out, &len, EVP_sha256(), nullptr) != 1 || len != 32)
        throw std::runtime_error("sha256 digest failed");
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    unsigned char md[32];
    sha256_raw(data, md);
    return to_hex(md, 32);
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

uint64_t sha256_prefix64(std::string_view data) {
    unsigned char md[32];
    sha256_raw(data, md);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | md[i];
    return v;
}

}  // namespace distrace
