#include "sandboxeval/digest.hpp"

#include <array>
#include <random>
#include <stdexcept>

namespace sandboxeval {

Sha256::Sha256() : ctx_(EVP_MD_CTX_new())
{
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx_);
        throw std::runtime_error("sha256: digest initialisation failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(ctx_); }

Sha256& Sha256::update(std::span<const std::byte> data)
{
    if (!data.empty()) EVP_DigestUpdate(ctx_, data.data(), data.size());
    return *this;
}

Sha256& Sha256::update(std::string_view text) { return update(std::as_bytes(std::span(text.data(), text.size()))); }

std::string Sha256::hex_digest()
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, out.data(), &len);
    return to_hex(std::as_bytes(std::span(out.data(), len)));
}

std::string sha256_hex(std::string_view data)
{
    Sha256 h;
    h.update(data);
    return h.hex_digest();
}

std::string to_hex(std::span<const std::byte> data)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        auto v = std::to_integer<unsigned>(b);
        out.push_back(kDigits[v >> 4]);
        out.push_back(kDigits[v & 0xf]);
    }
    return out;
}

std::string random_token(std::size_t bytes)
{
    std::random_device rd;
    std::string raw(bytes, '\0');
    for (auto& c : raw) c = static_cast<char>(rd() & 0xff);
    return to_hex(std::as_bytes(std::span(raw.data(), raw.size())));
}

}  // namespace sandboxeval
