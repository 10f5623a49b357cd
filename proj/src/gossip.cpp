#include "sybilwall/gossip.hpp"

#include <bit>
#include <string>

#include "sybilwall/errors.hpp"

namespace sybilwall {

SignedHistoryPtr sign_history(const SignatureScheme& scheme, NodeId origin, std::uint32_t round,
                              ParamVector history) {
  auto h = std::make_shared<SignedHistory>();
  h->origin = origin;
  h->round = round;
  h->history = std::move(history);
  h->signature = scheme.sign(origin, canonical_bytes(h->history, round, origin));
  return h;
}

bool verify_history(const SignatureScheme& scheme, const SignedHistory& h) {
  return scheme.verify(h.origin, canonical_bytes(h.history, h.round, h.origin), h.signature);
}

const HistoryRecord* HistoryDB::find(NodeId origin) const {
  const auto it = records_.find(origin);
  return it == records_.end() ? nullptr : &it->second;
}

DbChange HistoryDB::apply(const HistoryRecord& incoming) {
  if (!incoming.content) throw InvalidInput("update_db: record without content");
  auto it = records_.find(incoming.origin());
  if (it != records_.end()) {
    if (incoming.round() <= it->second.round()) return DbChange::ignored;
    it->second = incoming;
    return DbChange::updated;
  }
  if (capacity_ && *capacity_ == 0) return DbChange::ignored;
  if (capacity_ && records_.size() >= *capacity_) {
    auto stalest = records_.begin();
    for (auto r = records_.begin(); r != records_.end(); ++r) {
      if (r->second.round() < stalest->second.round()) stalest = r;
    }
    records_.erase(stalest);
  }
  records_.emplace(incoming.origin(), incoming);
  return DbChange::inserted;
}

DbChange update_db(HistoryDB& db, const HistoryRecord& incoming) { return db.apply(incoming); }

std::vector<HistoryRecord> filter_db(const HistoryDB& db, NodeId self, NodeId neighbor) {
  std::vector<HistoryRecord> out;
  for (const auto& [origin, rec] : db.records()) {
    if (origin == self || origin == neighbor || rec.forwarder == neighbor) continue;
    out.push_back(rec);
  }
  return out;
}

std::optional<HistoryRecord> select_gossip(const std::vector<HistoryRecord>& filtered, double lambda,
                                           Rng& rng) {
  if (!(lambda > 0.0)) throw InvalidInput("select_gossip: lambda must be > 0");
  if (filtered.empty()) return std::nullopt;
  std::vector<double> cumulative;
  cumulative.reserve(filtered.size());
  double total = 0.0;
  for (const auto& r : filtered) {
    total += gossip_weight(r.distance, lambda);
    cumulative.push_back(total);
  }
  const double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    if (u < cumulative[i]) return filtered[i];
  }
  return filtered.back();
}

RoundMessage compose_message(SignedHistoryPtr own, const std::optional<HistoryRecord>& selected) {
  if (!own) throw InvalidInput("compose_message: missing own block");
  RoundMessage msg;
  msg.own = std::move(own);
  if (selected) {
    msg.gossiped = selected->content;
    msg.gossip_distance = selected->distance + 1;
  }
  return msg;
}

RoundMessage compose_message(const SignatureScheme& scheme, NodeId self, const ParamVector& history,
                             std::uint32_t round, const std::optional<HistoryRecord>& selected) {
  return compose_message(sign_history(scheme, self, round, history), selected);
}

namespace {

template <typename T>
void put(Bytes& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_block(Bytes& out, const SignedHistory& h) {
  put<std::uint32_t>(out, h.origin);
  put<std::uint32_t>(out, h.round);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.history.size()));
  for (double v : h.history) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (h.signature.size() > 0xffff) throw InvalidInput("encode_message: signature too long");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(h.signature.size()));
  out.insert(out.end(), h.signature.begin(), h.signature.end());
}

class Reader {
 public:
  explicit Reader(const Bytes& b) : bytes_(b) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw ParseError(std::string("truncated message: ") + what, pos_);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const Bytes& bytes_;
  std::size_t pos_ = 0;
};

SignedHistoryPtr get_block(Reader& r) {
  auto h = std::make_shared<SignedHistory>();
  h->origin = r.get<std::uint32_t>("origin");
  h->round = r.get<std::uint32_t>("round");
  const auto len = r.get<std::uint32_t>("vector length");
  r.need(static_cast<std::size_t>(len) * 8, "history values");
  std::vector<double> values(len);
  for (auto& v : values) v = std::bit_cast<double>(r.get<std::uint64_t>("value"));
  h->history = ParamVector(std::move(values));
  const auto sig_len = r.get<std::uint16_t>("signature length");
  r.need(sig_len, "signature");
  h->signature.assign(r.cursor(), r.cursor() + sig_len);
  r.skip(sig_len);
  return h;
}

}  // namespace

Bytes encode_message(const RoundMessage& msg) {
  if (!msg.own) throw InvalidInput("encode_message: missing own block");
  Bytes out;
  put_block(out, *msg.own);
  out.push_back(msg.gossiped ? 1 : 0);
  if (msg.gossiped) {
    put_block(out, *msg.gossiped);
    put<std::uint32_t>(out, msg.gossip_distance);
  }
  return out;
}

RoundMessage decode_message(const Bytes& bytes) {
  Reader r(bytes);
  RoundMessage msg;
  msg.own = get_block(r);
  const auto flag = r.get<std::uint8_t>("gossip flag");
  if (flag > 1) throw ParseError("invalid gossip flag " + std::to_string(flag), r.pos() - 1);
  if (flag == 1) {
    msg.gossiped = get_block(r);
    msg.gossip_distance = r.get<std::uint32_t>("gossip distance");
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after message", r.pos());
  return msg;
}

std::optional<ParamVector> infer_trained_model(const SignedHistory& previous, const SignedHistory& latest) {
  if (previous.origin != latest.origin || previous.round + 1 != latest.round) return std::nullopt;
  require_same_size(previous.history, latest.history, "infer_trained_model");
  return latest.history - previous.history;
}

ReceiveResult receive_message(const RoundMessage& msg, NodeId self, HistoryDB& db,
                              const SignatureScheme& scheme) {
  if (!msg.own) throw MessageRejected("message without own block");
  const NodeId sender = msg.own->origin;
  if (!verify_history(scheme, *msg.own)) {
    throw MessageRejected("bad signature on own block from node " + std::to_string(sender));
  }
  if (msg.gossiped) {
    if (!verify_history(scheme, *msg.gossiped)) {
      throw MessageRejected("bad signature on gossiped block (origin " +
                            std::to_string(msg.gossiped->origin) + ") from node " + std::to_string(sender));
    }
    if (msg.gossip_distance < 2) {
      throw MessageRejected("gossip distance " + std::to_string(msg.gossip_distance) + " from node " +
                            std::to_string(sender) + " is below 2");
    }
  }
  const HistoryRecord* known = db.find(sender);
  if (known && known->round() > msg.own->round) {
    throw MessageRejected("round regression from node " + std::to_string(sender) + ": " +
                          std::to_string(msg.own->round) + " after " + std::to_string(known->round()));
  }

  ReceiveResult result;
  if (known) result.trained_model = infer_trained_model(*known->content, *msg.own);
  if (sender != self) result.own_change = update_db(db, HistoryRecord{msg.own, 1, sender});
  if (msg.gossiped && msg.gossiped->origin != self) {
    result.gossip_change = update_db(db, HistoryRecord{msg.gossiped, msg.gossip_distance, sender});
  }
  return result;
}

std::map<NodeId, std::optional<ParamVector>> recover_after_downtime(
    const std::map<NodeId, std::vector<SignedHistoryPtr>>& received) {
  std::map<NodeId, std::optional<ParamVector>> out;
  for (const auto& [id, list] : received) {
    const SignedHistory* latest = nullptr;
    const SignedHistory* previous = nullptr;
    for (const auto& h : list) {
      if (!h || h->origin != id) continue;
      if (!latest || h->round > latest->round) {
        previous = latest;
        latest = h.get();
      } else if (h->round < latest->round && (!previous || h->round > previous->round)) {
        previous = h.get();
      }
    }
    out[id] = latest && previous ? infer_trained_model(*previous, *latest) : std::nullopt;
  }
  return out;
}

}  // namespace sybilwall
