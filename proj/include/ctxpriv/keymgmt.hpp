#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <sodium.h>

#include "ctxpriv/error.hpp"
#include "ctxpriv/netsim.hpp"
#include "ctxpriv/rng.hpp"
#include "ctxpriv/transcript.hpp"
#include "ctxpriv/wire.hpp"

// Two-bank key predistribution, per-pair permuted key orderings, plaintext
// index announcements and the AF-relayed source-to-source bootstrap.
namespace ctxpriv::keymgmt {

using wire::Bytes;

inline constexpr std::size_t kKeyBytes = 16;
using Key = std::array<std::uint8_t, kKeyBytes>;
using KeyId = std::uint32_t;

struct KeyEntry {
  KeyId id = 0;
  Key key{};
  friend bool operator==(const KeyEntry&, const KeyEntry&) = default;
};

using KeyBank = std::vector<KeyEntry>;

struct KeyPool {
  KeyBank bank_af;  // source <-> AF traffic
  KeyBank bank_ss;  // source <-> source traffic, never given to the AF

  std::size_t total() const noexcept { return bank_af.size() + bank_ss.size(); }
  friend bool operator==(const KeyPool&, const KeyPool&) = default;
};

// `total` distinct random keys with sequential ids; the first `af_count` form
// the AF bank and the rest the source-source bank.
inline KeyPool generate_pool(std::size_t total, std::size_t af_count, SimRng& rng) {
  if (af_count < 1 || af_count >= total) {
    throw Error(Errc::invalid_split, "need 1 <= k_af < K, got k_af=" + std::to_string(af_count) +
                                         " K=" + std::to_string(total));
  }
  std::set<Key> seen;
  KeyPool pool;
  for (std::size_t i = 0; i < total; ++i) {
    KeyEntry entry{static_cast<KeyId>(i), {}};
    do {
      rng.fill_bytes(entry.key);
    } while (!seen.insert(entry.key).second);
    (i < af_count ? pool.bank_af : pool.bank_ss).push_back(entry);
  }
  return pool;
}

// Ordering of a key bank private to one (owner, peer) pair; `order[i]` is the
// bank slot used for the 1-based announced index i + 1.
struct PairPermutation {
  NodeId owner;
  NodeId peer;
  std::vector<std::uint32_t> order;

  std::uint32_t slot_for(std::uint32_t r_c) const {
    if (r_c < 1 || r_c > order.size()) {
      throw Error(Errc::out_of_range, "key index " + std::to_string(r_c) + " outside [1, " +
                                          std::to_string(order.size()) + "]");
    }
    return order[r_c - 1];
  }

  std::vector<std::uint32_t> inverse() const {
    std::vector<std::uint32_t> inv(order.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) inv[order[i]] = i;
    return inv;
  }

  friend bool operator==(const PairPermutation&, const PairPermutation&) = default;
};

inline bool is_permutation_of_size(std::span<const std::uint32_t> order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (std::uint32_t v : order) {
    if (v >= n || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

inline PairPermutation permute_bank_for_pair(std::size_t bank_size, NodeId owner, NodeId peer, SimRng& rng) {
  if (bank_size == 0) throw Error(Errc::invalid_argument, "cannot permute an empty bank");
  PairPermutation perm{owner, peer, std::vector<std::uint32_t>(bank_size)};
  for (std::uint32_t i = 0; i < bank_size; ++i) perm.order[i] = i;
  rng.shuffle(std::span<std::uint32_t>(perm.order));
  return perm;
}

// ---- wire: key index announcement ------------------------------------------

// 8 bytes: sender id (u32 LE), R_c (u32 LE). Sent in the clear.
struct KeyIndexAnnouncement {
  NodeId sender;
  std::uint32_t r_c = 0;

  Bytes encode() const {
    Bytes out;
    wire::put_u32(out, sender.index);
    wire::put_u32(out, r_c);
    return out;
  }

  static KeyIndexAnnouncement decode(std::span<const std::uint8_t> in) {
    if (in.size() != 8) throw Error(Errc::protocol, "announcement must be 8 bytes");
    return {NodeId{wire::get_u32(in, 0)}, wire::get_u32(in, 4)};
  }

  friend bool operator==(const KeyIndexAnnouncement&, const KeyIndexAnnouncement&) = default;
};

// ---- cipher suites ----------------------------------------------------------

class CipherSuite {
 public:
  virtual ~CipherSuite() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t nonce_size() const = 0;
  virtual std::size_t tag_size() const = 0;

  // Returns ciphertext || tag.
  virtual Bytes seal(const Key& key, std::span<const std::uint8_t> nonce, std::span<const std::uint8_t> plaintext,
                     std::span<const std::uint8_t> associated) const = 0;

  // Throws Errc::authentication_failure when the tag does not verify.
  virtual Bytes open(const Key& key, std::span<const std::uint8_t> nonce, std::span<const std::uint8_t> sealed,
                     std::span<const std::uint8_t> associated) const = 0;
};

// ChaCha20-Poly1305 (IETF) from libsodium, keyed by a BLAKE2b expansion of
// the 128-bit pool key.
class ChaChaPolySuite final : public CipherSuite {
 public:
  ChaChaPolySuite() {
    if (sodium_init() < 0) throw Error(Errc::invalid_argument, "libsodium failed to initialise");
  }

  std::string_view name() const override { return "chacha20poly1305-ietf"; }
  std::size_t nonce_size() const override { return crypto_aead_chacha20poly1305_ietf_NPUBBYTES; }
  std::size_t tag_size() const override { return crypto_aead_chacha20poly1305_ietf_ABYTES; }

  Bytes seal(const Key& key, std::span<const std::uint8_t> nonce, std::span<const std::uint8_t> plaintext,
             std::span<const std::uint8_t> associated) const override {
    check_nonce(nonce);
    const auto subkey = expand(key);
    Bytes out(plaintext.size() + tag_size());
    unsigned long long out_len = 0;
    crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(), plaintext.size(),
                                              associated.data(), associated.size(), nullptr, nonce.data(),
                                              subkey.data());
    out.resize(out_len);
    return out;
  }

  Bytes open(const Key& key, std::span<const std::uint8_t> nonce, std::span<const std::uint8_t> sealed,
             std::span<const std::uint8_t> associated) const override {
    check_nonce(nonce);
    if (sealed.size() < tag_size()) throw Error(Errc::authentication_failure, "sealed payload shorter than tag");
    const auto subkey = expand(key);
    Bytes out(sealed.size() - tag_size());
    unsigned long long out_len = 0;
    if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, sealed.data(), sealed.size(),
                                                  associated.data(), associated.size(), nonce.data(),
                                                  subkey.data()) != 0) {
      throw Error(Errc::authentication_failure, "tag mismatch");
    }
    out.resize(out_len);
    return out;
  }

 private:
  void check_nonce(std::span<const std::uint8_t> nonce) const {
    if (nonce.size() != nonce_size()) throw Error(Errc::invalid_argument, "bad nonce length");
  }

  static std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_KEYBYTES> expand(const Key& key) {
    static constexpr std::string_view context = "ctxpriv/aead/v1";
    std::array<std::uint8_t, crypto_aead_chacha20poly1305_ietf_KEYBYTES> subkey{};
    crypto_generichash(subkey.data(), subkey.size(), reinterpret_cast<const unsigned char*>(context.data()),
                       context.size(), key.data(), key.size());
    return subkey;
  }
};

inline const CipherSuite& default_suite() {
  static const ChaChaPolySuite suite;
  return suite;
}

inline Bytes seal(const Key& key, std::span<const std::uint8_t> nonce, std::span<const std::uint8_t> plaintext,
                  std::span<const std::uint8_t> associated, const CipherSuite& suite = default_suite()) {
  return suite.seal(key, nonce, plaintext, associated);
}

inline Bytes open(const Key& key, std::span<const std::uint8_t> nonce, std::span<const std::uint8_t> sealed,
                  std::span<const std::uint8_t> associated, const CipherSuite& suite = default_suite()) {
  return suite.open(key, nonce, sealed, associated);
}

// ---- wire: sealed frame -----------------------------------------------------

inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kTagBytes = 16;
inline constexpr std::size_t kFrameHeaderBytes = 8 + kNonceBytes;

// sender (u32 LE) | receiver (u32 LE) | nonce (12) | ciphertext | tag (16).
// The 20 header bytes are the associated data, so every bit is authenticated.
struct SealedFrame {
  NodeId sender;
  NodeId receiver;
  std::array<std::uint8_t, kNonceBytes> nonce{};
  Bytes ciphertext;
  std::array<std::uint8_t, kTagBytes> tag{};

  Bytes header() const {
    Bytes out;
    wire::put_u32(out, sender.index);
    wire::put_u32(out, receiver.index);
    out.insert(out.end(), nonce.begin(), nonce.end());
    return out;
  }

  Bytes encode() const {
    Bytes out = header();
    out.insert(out.end(), ciphertext.begin(), ciphertext.end());
    out.insert(out.end(), tag.begin(), tag.end());
    return out;
  }

  static SealedFrame decode(std::span<const std::uint8_t> in) {
    if (in.size() < kFrameHeaderBytes + kTagBytes) throw Error(Errc::protocol, "sealed frame too short");
    SealedFrame f;
    f.sender = NodeId{wire::get_u32(in, 0)};
    f.receiver = NodeId{wire::get_u32(in, 4)};
    std::copy_n(in.begin() + 8, kNonceBytes, f.nonce.begin());
    f.ciphertext.assign(in.begin() + kFrameHeaderBytes, in.end() - kTagBytes);
    std::copy_n(in.end() - kTagBytes, kTagBytes, f.tag.begin());
    return f;
  }
};

inline std::array<std::uint8_t, kNonceBytes> make_nonce(NodeId sender, NodeId receiver, std::uint32_t counter) {
  Bytes raw;
  wire::put_u32(raw, sender.index);
  wire::put_u32(raw, receiver.index);
  wire::put_u32(raw, counter);
  std::array<std::uint8_t, kNonceBytes> nonce{};
  std::copy(raw.begin(), raw.end(), nonce.begin());
  return nonce;
}

inline SealedFrame seal_frame(const Key& key, NodeId sender, NodeId receiver, std::uint32_t counter,
                              std::span<const std::uint8_t> plaintext, const CipherSuite& suite = default_suite()) {
  if (suite.nonce_size() != kNonceBytes || suite.tag_size() != kTagBytes) {
    throw Error(Errc::invalid_argument, "frame layout needs a 12-byte nonce and 16-byte tag");
  }
  SealedFrame f;
  f.sender = sender;
  f.receiver = receiver;
  f.nonce = make_nonce(sender, receiver, counter);
  const Bytes ad = f.header();
  Bytes sealed = suite.seal(key, f.nonce, plaintext, ad);
  f.ciphertext.assign(sealed.begin(), sealed.end() - kTagBytes);
  std::copy(sealed.end() - kTagBytes, sealed.end(), f.tag.begin());
  return f;
}

inline Bytes open_frame(const Key& key, const SealedFrame& f, const CipherSuite& suite = default_suite()) {
  Bytes sealed = f.ciphertext;
  sealed.insert(sealed.end(), f.tag.begin(), f.tag.end());
  return suite.open(key, f.nonce, sealed, f.header());
}

// ---- node state -------------------------------------------------------------

struct SessionKey {
  KeyIndexAnnouncement announcement;
  Key key{};
};

struct SourceKeyState {
  NodeId id;
  NodeId af;
  KeyBank bank_af;
  KeyBank bank_ss;
  PairPermutation af_order;                            // shared with the AF
  std::optional<PairPermutation> own_ss_order;         // peers use it when sending here
  std::map<NodeId, PairPermutation> peer_ss_orders;    // learned from each peer
  std::uint32_t nonce_counter = 0;
};

struct AggregatorKeyState {
  NodeId id;
  KeyBank bank_af;
  std::map<NodeId, PairPermutation> source_orders;
  std::uint32_t nonce_counter = 0;

  std::vector<KeyId> held_key_ids() const {
    std::vector<KeyId> ids;
    for (const auto& k : bank_af) ids.push_back(k.id);
    return ids;
  }
};

struct KeyDistribution {
  AggregatorKeyState af;
  std::vector<SourceKeyState> sources;

  SourceKeyState& source(NodeId id) {
    for (auto& s : sources) {
      if (s.id == id) return s;
    }
    throw Error(Errc::unknown_source, "node " + std::to_string(id.index) + " is not a source of this AF");
  }
};

// Gives every source both banks and the AF only the AF bank, then registers a
// fresh permutation of the AF bank at both ends of every source-AF pair.
inline KeyDistribution predistribute(const KeyPool& pool, NodeId af, std::span<const NodeId> sources, SimRng& rng,
                                     Transcript* transcript = nullptr) {
  KeyDistribution dist;
  dist.af.id = af;
  dist.af.bank_af = pool.bank_af;
  for (NodeId s : sources) {
    if (s == af) throw Error(Errc::configuration, "AF must differ from its sources");
    SimRng pair_rng = rng.fork("pair:" + std::to_string(s.index) + ":" + std::to_string(af.index));
    auto perm = permute_bank_for_pair(pool.bank_af.size(), s, af, pair_rng);
    dist.af.source_orders.emplace(s, perm);
    dist.sources.push_back(SourceKeyState{s, af, pool.bank_af, pool.bank_ss, std::move(perm), std::nullopt, {}, 0});
  }
  if (transcript) transcript->event("keymgmt:predistribute");
  return dist;
}

// Draws R_c uniformly in [1, |bank_af|] and returns the pair's key for it.
inline SessionKey select_session_key(const SourceKeyState& source, SimRng& rng) {
  const auto r_c = static_cast<std::uint32_t>(rng.uniform_between(1, source.af_order.order.size()));
  return {{source.id, r_c}, source.bank_af[source.af_order.slot_for(r_c)].key};
}

inline Key af_resolve_key(const AggregatorKeyState& af, NodeId source, const KeyIndexAnnouncement& announcement) {
  const auto it = af.source_orders.find(source);
  if (it == af.source_orders.end()) {
    throw Error(Errc::unknown_source, "AF holds no ordering for node " + std::to_string(source.index));
  }
  return af.bank_af[it->second.slot_for(announcement.r_c)].key;
}

// AF -> source direction over the same pair ordering.
inline SessionKey af_select_key(const AggregatorKeyState& af, NodeId source, SimRng& rng) {
  const auto it = af.source_orders.find(source);
  if (it == af.source_orders.end()) {
    throw Error(Errc::unknown_source, "AF holds no ordering for node " + std::to_string(source.index));
  }
  const auto r_c = static_cast<std::uint32_t>(rng.uniform_between(1, it->second.order.size()));
  return {{af.id, r_c}, af.bank_af[it->second.slot_for(r_c)].key};
}

inline Key source_resolve_af_key(const SourceKeyState& source, const KeyIndexAnnouncement& announcement) {
  if (announcement.sender != source.af) {
    throw Error(Errc::unknown_source, "announcement not from this source's AF");
  }
  return source.bank_af[source.af_order.slot_for(announcement.r_c)].key;
}

// Keys an observer could associate with `announcement` on the victim's AF
// pair. Without the pair ordering every AF-bank key stays possible.
inline std::vector<KeyId> eavesdropper_candidates(const SourceKeyState& observer, NodeId victim,
                                                  const KeyIndexAnnouncement& announcement) {
  if (observer.id == victim) return {observer.bank_af[observer.af_order.slot_for(announcement.r_c)].id};
  std::vector<KeyId> all;
  for (const auto& k : observer.bank_af) all.push_back(k.id);
  return all;
}

// Sender side of the source-source schedule: messages to `receiver` use the
// receiver's ordering of bank_ss.
inline SessionKey select_ss_key(const SourceKeyState& sender, NodeId receiver, SimRng& rng) {
  const auto it = sender.peer_ss_orders.find(receiver);
  if (it == sender.peer_ss_orders.end()) {
    throw Error(Errc::protocol, "no source-source schedule towards node " + std::to_string(receiver.index));
  }
  const auto r_c = static_cast<std::uint32_t>(rng.uniform_between(1, it->second.order.size()));
  return {{sender.id, r_c}, sender.bank_ss[it->second.slot_for(r_c)].key};
}

inline Key resolve_ss_key(const SourceKeyState& receiver, const KeyIndexAnnouncement& announcement) {
  if (!receiver.own_ss_order) throw Error(Errc::protocol, "receiver has no source-source ordering yet");
  if (!receiver.peer_ss_orders.contains(announcement.sender)) {
    throw Error(Errc::unknown_source, "no channel with node " + std::to_string(announcement.sender.index));
  }
  return receiver.bank_ss[receiver.own_ss_order->slot_for(announcement.r_c)].key;
}

// Schedule (bank_ss slot order) for traffic sender -> receiver as each side
// sees it; after a successful bootstrap both views are identical.
inline std::vector<std::uint32_t> ss_schedule_sender_view(const SourceKeyState& sender, NodeId receiver) {
  const auto it = sender.peer_ss_orders.find(receiver);
  if (it == sender.peer_ss_orders.end()) throw Error(Errc::protocol, "no schedule towards receiver");
  return it->second.order;
}

inline std::vector<std::uint32_t> ss_schedule_receiver_view(const SourceKeyState& receiver) {
  if (!receiver.own_ss_order) throw Error(Errc::protocol, "receiver has no ordering");
  return receiver.own_ss_order->order;
}

// ---- AF relay ---------------------------------------------------------------

// Called on every frame the AF forwards, as raw wire bytes. Returning false
// drops the frame.
using RelayHook = std::function<bool(Bytes& wire)>;

// A source-to-source message relayed through the AF: an inner frame sealed
// under a bank_ss key (opaque to the AF) carried inside outer frames sealed
// under the source-AF pair keys.
struct RelayedMessage {
  KeyIndexAnnouncement inner_announcement;
  SealedFrame inner;
};

inline Bytes encode_relayed(const RelayedMessage& m) {
  Bytes out = m.inner_announcement.encode();
  const Bytes inner = m.inner.encode();
  out.insert(out.end(), inner.begin(), inner.end());
  return out;
}

inline RelayedMessage decode_relayed(std::span<const std::uint8_t> in) {
  if (in.size() < 8) throw Error(Errc::protocol, "relayed message too short");
  return {KeyIndexAnnouncement::decode(in.subspan(0, 8)), SealedFrame::decode(in.subspan(8))};
}

// Outer hop frame plus the plaintext index that selects its key.
struct HopFrame {
  KeyIndexAnnouncement announcement;
  Bytes wire;
};

// Carries `inner` from `from` to `to` through the AF. Returns the payload the
// receiving source recovers from the outer layer.
inline RelayedMessage relay_via_af(SourceKeyState& from, AggregatorKeyState& af, const SourceKeyState& to,
                                   const RelayedMessage& inner, SimRng& rng, const RelayHook& hook,
                                   Transcript* transcript, std::string_view kind,
                                   const CipherSuite& suite = default_suite()) {
  const Bytes payload = encode_relayed(inner);

  // source -> AF
  const SessionKey up = select_session_key(from, rng);
  const SealedFrame up_frame = seal_frame(up.key, from.id, af.id, from.nonce_counter++, payload, suite);
  HopFrame hop1{up.announcement, up_frame.encode()};
  if (transcript) {
    transcript->frame({std::string(kind) + ":uplink", from.id, af.id, up.announcement.r_c, wire::hex(hop1.wire), {}});
  }

  // AF opens the outer layer, re-seals for the receiver.
  const Key up_key = af_resolve_key(af, hop1.announcement.sender, hop1.announcement);
  const Bytes relayed = open_frame(up_key, SealedFrame::decode(hop1.wire), suite);
  const SessionKey down = af_select_key(af, to.id, rng);
  const SealedFrame down_frame = seal_frame(down.key, af.id, to.id, af.nonce_counter++, relayed, suite);
  HopFrame hop2{down.announcement, down_frame.encode()};
  if (hook && !hook(hop2.wire)) {
    throw Error(Errc::protocol, std::string(kind) + " frame for node " + std::to_string(to.id.index) +
                                    " never arrived");
  }
  if (transcript) {
    transcript->frame({std::string(kind) + ":downlink", af.id, to.id, down.announcement.r_c, wire::hex(hop2.wire), {}});
  }

  // Receiver opens the outer layer; tampering surfaces here.
  const Key down_key = source_resolve_af_key(to, hop2.announcement);
  SealedFrame received;
  try {
    received = SealedFrame::decode(hop2.wire);
  } catch (const Error&) {
    throw Error(Errc::authentication_failure, "relayed frame malformed");
  }
  return decode_relayed(open_frame(down_key, received, suite));
}

inline Bytes encode_order(std::span<const std::uint32_t> order) {
  Bytes out;
  wire::put_u32(out, static_cast<std::uint32_t>(order.size()));
  for (std::uint32_t v : order) wire::put_u32(out, v);
  return out;
}

inline std::vector<std::uint32_t> decode_order(std::span<const std::uint8_t> in) {
  const std::uint32_t n = wire::get_u32(in, 0);
  if (in.size() != 4 + 4 * static_cast<std::size_t>(n)) throw Error(Errc::protocol, "permutation length mismatch");
  std::vector<std::uint32_t> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = wire::get_u32(in, 4 + 4 * i);
  return order;
}

struct ChannelOptions {
  RelayHook hook;
  // Forces each source's ordering to the identity (for tests).
  bool identity_orders = false;
};

// Each source draws its ordering of bank_ss and sends it to the other via the
// AF. The ordering travels sealed under a bank_ss key (index announced in the
// clear against the unpermuted bank) inside the AF hop frames.
inline void establish_ss_channel(SourceKeyState& s1, SourceKeyState& s2, AggregatorKeyState& af, SimRng& rng,
                                 const ChannelOptions& options = {}, Transcript* transcript = nullptr,
                                 const CipherSuite& suite = default_suite()) {
  if (s1.af != af.id || s2.af != af.id) throw Error(Errc::protocol, "sources are not attached to this AF");
  if (s1.bank_ss.empty() || s1.bank_ss != s2.bank_ss) throw Error(Errc::protocol, "sources disagree on bank_ss");

  auto send_order = [&](SourceKeyState& from, SourceKeyState& to) {
    SimRng own_rng = rng.fork("ss-order:" + std::to_string(from.id.index) + ">" + std::to_string(to.id.index));
    PairPermutation own = options.identity_orders
                              ? PairPermutation{from.id, to.id, {}}
                              : permute_bank_for_pair(from.bank_ss.size(), from.id, to.id, own_rng);
    if (options.identity_orders) {
      own.order.resize(from.bank_ss.size());
      for (std::uint32_t i = 0; i < own.order.size(); ++i) own.order[i] = i;
    }
    from.own_ss_order = own;

    const auto index = static_cast<std::uint32_t>(rng.uniform_between(1, from.bank_ss.size()));
    const RelayedMessage inner{{from.id, index},
                               seal_frame(from.bank_ss[index - 1].key, from.id, to.id, from.nonce_counter++,
                                          encode_order(own.order), suite)};
    const RelayedMessage got = relay_via_af(from, af, to, inner, rng, options.hook, transcript, "ss-order", suite);

    if (got.inner_announcement.r_c < 1 || got.inner_announcement.r_c > to.bank_ss.size()) {
      throw Error(Errc::out_of_range, "bootstrap key index out of range");
    }
    const Bytes plain = open_frame(to.bank_ss[got.inner_announcement.r_c - 1].key, got.inner, suite);
    auto order = decode_order(plain);
    if (!is_permutation_of_size(order, to.bank_ss.size())) throw Error(Errc::protocol, "peer sent a non-permutation");
    to.peer_ss_orders[from.id] = PairPermutation{from.id, to.id, std::move(order)};
  };

  send_order(s1, s2);
  send_order(s2, s1);
  if (transcript) transcript->event("keymgmt:ss-channel");
}

}  // namespace ctxpriv::keymgmt
