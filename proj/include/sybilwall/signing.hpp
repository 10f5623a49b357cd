#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sybilwall/param_vector.hpp"
#include "sybilwall/topology.hpp"

namespace sybilwall {

using Bytes = std::vector<std::uint8_t>;

// Little-endian f64 values, then u32 round, then u32 origin.
Bytes canonical_bytes(const ParamVector& history, std::uint32_t round, NodeId origin);

/// Per-node signing keys derived from one master seed. verify() only needs
/// the origin id because every node can look up every public key.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;
  virtual std::string name() const = 0;
  virtual Bytes sign(NodeId signer, const Bytes& message) const = 0;
  virtual bool verify(NodeId signer, const Bytes& message, const Bytes& signature) const = 0;
};

// libsodium Ed25519 with keypairs from crypto_sign_seed_keypair. Keys are
// generated lazily and cached; safe to share across threads.
std::unique_ptr<SignatureScheme> make_ed25519_scheme(std::uint64_t seed);

// Keyed BLAKE2b tags. Not asymmetric; a fast stand-in for large sweeps.
std::unique_ptr<SignatureScheme> make_mac_scheme(std::uint64_t seed);

// "ed25519" or "mac"; throws InvalidInput otherwise.
std::unique_ptr<SignatureScheme> make_signature_scheme(const std::string& name, std::uint64_t seed);

}  // namespace sybilwall
