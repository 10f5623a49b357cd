#include "sybilwall/signing.hpp"

#include <sodium.h>

#include <array>
#include <bit>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

namespace sybilwall {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Bytes& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

// 32 seed bytes for node `id`, expanded from four derived words.
std::array<unsigned char, 32> node_seed(std::uint64_t master, NodeId id) {
  std::array<unsigned char, 32> out{};
  for (std::uint64_t w = 0; w < 4; ++w) {
    const std::uint64_t v = derive_seed({master, tag(Stream::keys), id, w});
    for (int b = 0; b < 8; ++b) out[w * 8 + b] = static_cast<unsigned char>(v >> (8 * b));
  }
  return out;
}

class Ed25519Scheme final : public SignatureScheme {
 public:
  explicit Ed25519Scheme(std::uint64_t seed) : seed_(seed) { ensure_sodium(); }

  std::string name() const override { return "ed25519"; }

  Bytes sign(NodeId signer, const Bytes& message) const override {
    const Keys& k = keys(signer);
    Bytes sig(crypto_sign_BYTES);
    unsigned long long len = 0;
    if (crypto_sign_detached(sig.data(), &len, message.data(), message.size(), k.secret.data()) != 0) {
      throw std::runtime_error("ed25519 signing failed");
    }
    sig.resize(len);
    return sig;
  }

  bool verify(NodeId signer, const Bytes& message, const Bytes& signature) const override {
    if (signature.size() != crypto_sign_BYTES) return false;
    const Keys& k = keys(signer);
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                       k.pub.data()) == 0;
  }

 private:
  struct Keys {
    std::array<unsigned char, crypto_sign_PUBLICKEYBYTES> pub{};
    std::array<unsigned char, crypto_sign_SECRETKEYBYTES> secret{};
  };

  const Keys& keys(NodeId id) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(id);
    if (it == cache_.end()) {
      Keys k;
      const auto s = node_seed(seed_, id);
      crypto_sign_seed_keypair(k.pub.data(), k.secret.data(), s.data());
      it = cache_.emplace(id, k).first;
    }
    return it->second;
  }

  std::uint64_t seed_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<NodeId, Keys> cache_;
};

class MacScheme final : public SignatureScheme {
 public:
  explicit MacScheme(std::uint64_t seed) : seed_(seed) { ensure_sodium(); }

  std::string name() const override { return "mac"; }

  Bytes sign(NodeId signer, const Bytes& message) const override {
    const auto key = node_seed(seed_, signer);
    Bytes tag(crypto_generichash_BYTES);
    crypto_generichash(tag.data(), tag.size(), message.data(), message.size(), key.data(), key.size());
    return tag;
  }

  bool verify(NodeId signer, const Bytes& message, const Bytes& signature) const override {
    if (signature.size() != crypto_generichash_BYTES) return false;
    const Bytes expected = sign(signer, message);
    return sodium_memcmp(expected.data(), signature.data(), expected.size()) == 0;
  }

 private:
  std::uint64_t seed_;
};

}  // namespace

Bytes canonical_bytes(const ParamVector& history, std::uint32_t round, NodeId origin) {
  Bytes out;
  out.reserve(history.size() * 8 + 8);
  for (double v : history) put_f64(out, v);
  put_u32(out, round);
  put_u32(out, origin);
  return out;
}

std::unique_ptr<SignatureScheme> make_ed25519_scheme(std::uint64_t seed) {
  return std::make_unique<Ed25519Scheme>(seed);
}

std::unique_ptr<SignatureScheme> make_mac_scheme(std::uint64_t seed) {
  return std::make_unique<MacScheme>(seed);
}

std::unique_ptr<SignatureScheme> make_signature_scheme(const std::string& name, std::uint64_t seed) {
  if (name == "ed25519") return make_ed25519_scheme(seed);
  if (name == "mac") return make_mac_scheme(seed);
  throw InvalidInput("unknown signature scheme '" + name + "' (expected ed25519 or mac)");
}

}  // namespace sybilwall
