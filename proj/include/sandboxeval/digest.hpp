#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include <openssl/evp.h>

namespace sandboxeval {

/// Incremental SHA-256 over libcrypto's EVP interface.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::span<const std::byte> data);
    Sha256& update(std::string_view text);

    /// Lowercase hex digest. The object may not be updated afterwards.
    std::string hex_digest();

private:
    EVP_MD_CTX* ctx_;
};

std::string sha256_hex(std::string_view data);

std::string to_hex(std::span<const std::byte> data);

/// Random lowercase hex token with `bytes` bytes of entropy.
std::string random_token(std::size_t bytes = 16);

}  // namespace sandboxeval
