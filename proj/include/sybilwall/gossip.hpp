#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "sybilwall/param_vector.hpp"
#include "sybilwall/rng.hpp"
#include "sybilwall/signing.hpp"
#include "sybilwall/topology.hpp"

namespace sybilwall {

/// A model history signed by its originator. Immutable once built so that
/// records and messages can share it.
struct SignedHistory {
  NodeId origin = 0;
  std::uint32_t round = 0;
  ParamVector history;
  Bytes signature;
};

using SignedHistoryPtr = std::shared_ptr<const SignedHistory>;

SignedHistoryPtr sign_history(const SignatureScheme& scheme, NodeId origin, std::uint32_t round,
                              ParamVector history);
bool verify_history(const SignatureScheme& scheme, const SignedHistory& h);

struct HistoryRecord {
  SignedHistoryPtr content;
  std::uint32_t distance = 0;  // hops from the originator; 0 only for self
  NodeId forwarder = 0;

  NodeId origin() const { return content->origin; }
  std::uint32_t round() const { return content->round; }
  const ParamVector& history() const { return content->history; }
};

enum class DbChange { inserted, updated, ignored };

/// One record per origin, iterated in origin order. An optional capacity
/// evicts the stalest record (lowest round, then lowest origin).
class HistoryDB {
 public:
  HistoryDB() = default;
  explicit HistoryDB(std::optional<std::size_t> capacity) : capacity_(capacity) {}

  std::size_t size() const noexcept { return records_.size(); }
  std::optional<std::size_t> capacity() const noexcept { return capacity_; }
  const HistoryRecord* find(NodeId origin) const;
  const std::map<NodeId, HistoryRecord>& records() const noexcept { return records_; }

  DbChange apply(const HistoryRecord& incoming);

 private:
  std::optional<std::size_t> capacity_;
  std::map<NodeId, HistoryRecord> records_;
};

DbChange update_db(HistoryDB& db, const HistoryRecord& incoming);

// Records a node may gossip to `neighbor`: not originated by self or the
// neighbour and not forwarded by the neighbour. Ordered by origin.
std::vector<HistoryRecord> filter_db(const HistoryDB& db, NodeId self, NodeId neighbor);

// Weighted draw with weight lambda * exp(-lambda * d); none for empty input.
std::optional<HistoryRecord> select_gossip(const std::vector<HistoryRecord>& filtered, double lambda,
                                           Rng& rng);

struct RoundMessage {
  SignedHistoryPtr own;
  SignedHistoryPtr gossiped;  // may be null
  std::uint32_t gossip_distance = 0;
};

// Reuses an already signed own block; the gossiped block keeps the
// originator's signature.
RoundMessage compose_message(SignedHistoryPtr own, const std::optional<HistoryRecord>& selected);
RoundMessage compose_message(const SignatureScheme& scheme, NodeId self, const ParamVector& history,
                             std::uint32_t round, const std::optional<HistoryRecord>& selected);

// [own block | u8 flag | gossiped block | u32 distance], little-endian. The
// gossiped block and distance are present only when flag is 1.
Bytes encode_message(const RoundMessage& msg);
RoundMessage decode_message(const Bytes& bytes);

struct ReceiveResult {
  std::optional<ParamVector> trained_model;
  DbChange own_change = DbChange::ignored;
  std::optional<DbChange> gossip_change;
};

// Verifies both blocks, infers the sender's trained model when its previous
// round is already known, then stores both records. Records originating from
// `self` are never stored. Throws MessageRejected.
ReceiveResult receive_message(const RoundMessage& msg, NodeId self, HistoryDB& db,
                              const SignatureScheme& scheme);

// h^T - h^{T-1} when the rounds are consecutive and origins match.
std::optional<ParamVector> infer_trained_model(const SignedHistory& previous, const SignedHistory& latest);

// For each neighbour, the trained model reconstructed from its two latest
// histories, or none when they are not consecutive.
std::map<NodeId, std::optional<ParamVector>> recover_after_downtime(
    const std::map<NodeId, std::vector<SignedHistoryPtr>>& received);

inline double gossip_weight(std::uint32_t distance, double lambda) {
  return lambda * std::exp(-lambda * static_cast<double>(distance));
}

}  // namespace sybilwall
