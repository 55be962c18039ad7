#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "daqcnn/error.hpp"

namespace daqcnn {

/// Incremental SHA-256 over byte ranges, rendered as lowercase hex.
class sha256 {
 public:
  sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw error(errc::io_error, "cannot initialise SHA-256");
  }

  sha256& update(std::span<const std::byte> bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
    return *this;
  }

  sha256& update(std::string_view text) { return update(std::as_bytes(std::span(text))); }

  template <typename T>
  sha256& update_pod(const T& value) {
    return update(std::as_bytes(std::span(&value, 1)));
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string result;
    result.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
      result.push_back(digits[out[i] >> 4]);
      result.push_back(digits[out[i] & 0xf]);
    }
    return result;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view text) { return sha256{}.update(text).hex(); }

}  // namespace daqcnn
