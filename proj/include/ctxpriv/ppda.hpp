#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctxpriv/error.hpp"
#include "ctxpriv/field.hpp"
#include "ctxpriv/keymgmt.hpp"
#include "ctxpriv/rng.hpp"
#include "ctxpriv/transcript.hpp"
#include "ctxpriv/wire.hpp"

// Polynomial-perturbation aggregation. Every participant i owns a public seed
// s_i; a producer with private value v and random coefficients R_1..R_d sends
// participant i the share v + R_1 s_i + ... + R_d s_i^d. Summing the shares a
// node receives gives F_i = D + (sum R_1) s_i + ..., and the aggregator solves
// the Vandermonde system in (D, sum R_1, ...) for D = sum of private values.
namespace ctxpriv::ppda {

struct SeedAssignment {
  std::vector<FieldElem> seeds;  // seeds[i] belongs to participant i

  std::size_t size() const noexcept { return seeds.size(); }
};

inline void validate_seeds(const Field& field, const SeedAssignment& seeds) {
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::uint64_t v = seeds.seeds[i].value % field.modulus();
    if (v == 0) throw Error(Errc::invalid_seed, "seed of participant " + std::to_string(i) + " is zero");
    if (!seen.insert(v).second) {
      throw Error(Errc::invalid_seed, "seed of participant " + std::to_string(i) + " is duplicated");
    }
  }
}

// Distinct non-zero seeds drawn uniformly from [1, p), redrawn on collision.
inline SeedAssignment draw_seeds(const Field& field, std::size_t count, SimRng& rng) {
  if (count >= field.modulus()) throw Error(Errc::invalid_argument, "more participants than non-zero field elements");
  SeedAssignment out;
  std::set<std::uint64_t> seen;
  while (out.seeds.size() < count) {
    const std::uint64_t s = rng.uniform_between(1, field.modulus() - 1);
    if (seen.insert(s).second) out.seeds.push_back({s});
  }
  return out;
}

struct RandomCoeffs {
  std::vector<FieldElem> r;  // r[0] = R_1, r[1] = R_2, ...
};

inline RandomCoeffs draw_coeffs(const Field& field, std::size_t degree, SimRng& rng) {
  RandomCoeffs c;
  for (std::size_t i = 0; i < degree; ++i) c.r.push_back({rng.uniform(field.modulus())});
  return c;
}

// v + R_1 s + R_2 s^2 + ... by Horner's rule.
inline FieldElem mask(const Field& field, FieldElem value, const RandomCoeffs& coeffs, FieldElem seed) {
  FieldElem acc{0};
  for (auto it = coeffs.r.rbegin(); it != coeffs.r.rend(); ++it) acc = field.mul(field.add(acc, *it), seed);
  return field.add(acc, field.elem(value.value));
}

struct Share {
  std::size_t producer = 0;
  std::size_t evaluated_at = 0;
  FieldElem value;
  friend bool operator==(const Share&, const Share&) = default;
};

// One share per participant; share i is evaluated at participant i's seed.
inline std::vector<Share> gen_shares(const Field& field, std::size_t producer, FieldElem value,
                                     const SeedAssignment& seeds, const RandomCoeffs& coeffs) {
  validate_seeds(field, seeds);
  if (producer >= seeds.size()) throw Error(Errc::invalid_argument, "producer is not a participant");
  std::vector<Share> out;
  out.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out.push_back({producer, i, mask(field, value, coeffs, seeds.seeds[i])});
  }
  return out;
}

struct NodeAggregate {
  std::size_t participant = 0;
  FieldElem f;
  friend bool operator==(const NodeAggregate&, const NodeAggregate&) = default;
};

inline NodeAggregate node_aggregate(const Field& field, const Share& own, std::span<const Share> received) {
  NodeAggregate out{own.evaluated_at, field.elem(own.value.value)};
  for (const Share& s : received) {
    if (s.evaluated_at != own.evaluated_at) {
      throw Error(Errc::mixed_seed, "share from participant " + std::to_string(s.producer) +
                                        " was evaluated at participant " + std::to_string(s.evaluated_at) +
                                        "'s seed, expected " + std::to_string(own.evaluated_at));
    }
    out.f = field.add(out.f, s.value);
  }
  return out;
}

// Solves rows [1, s_i, s_i^2, ...] . (D, ...) = F_i by Gauss-Jordan
// elimination over the field and returns D.
inline FieldElem solve_aggregate(const Field& field, const SeedAssignment& seeds,
                                 std::span<const NodeAggregate> aggregates) {
  const std::size_t n = seeds.size();
  if (n == 0 || aggregates.size() != n) {
    throw Error(Errc::invalid_argument, "need exactly one aggregate per seed");
  }
  validate_seeds(field, seeds);
  std::vector<std::vector<FieldElem>> m(n, std::vector<FieldElem>(n + 1));
  std::vector<char> filled(n, 0);
  for (const auto& agg : aggregates) {
    if (agg.participant >= n || filled[agg.participant]) {
      throw Error(Errc::invalid_argument, "aggregate for unknown or repeated participant");
    }
    filled[agg.participant] = 1;
    auto& row = m[agg.participant];
    FieldElem power{1};
    for (std::size_t c = 0; c < n; ++c) {
      row[c] = power;
      power = field.mul(power, seeds.seeds[agg.participant]);
    }
    row[n] = field.elem(agg.f.value);
  }

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    while (pivot < n && m[pivot][col].value == 0) ++pivot;
    if (pivot == n) throw Error(Errc::singular_system, "seed matrix is singular");
    std::swap(m[pivot], m[col]);
    const FieldElem inv = field.inv(m[col][col]);
    for (auto& v : m[col]) v = field.mul(v, inv);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col || m[r][col].value == 0) continue;
      const FieldElem factor = m[r][col];
      for (std::size_t c = col; c <= n; ++c) m[r][c] = field.sub(m[r][c], field.mul(factor, m[col][c]));
    }
  }
  return m[0][n];
}

inline FieldElem recover_pair_sum(const Field& field, FieldElem total, FieldElem own_value) {
  return field.sub(field.elem(total.value), field.elem(own_value.value));
}

// ---- three-party protocol ---------------------------------------------------

inline constexpr std::size_t kAggregator = 0;
inline constexpr std::size_t kSource1 = 1;
inline constexpr std::size_t kSource2 = 2;

struct AggregationResult {
  FieldElem total;     // D = x + y + z
  FieldElem pair_sum;  // x + y
};

// What a producer actually used, kept so share identities can be audited.
struct ProducerRecord {
  std::size_t participant = 0;
  FieldElem value;
  RandomCoeffs coeffs;
  std::vector<Share> shares;
};

struct SppdaRound {
  AggregationResult result;
  SeedAssignment seeds;
  std::array<NodeAggregate, 3> aggregates{};
  std::array<ProducerRecord, 3> producers{};
  keymgmt::AggregatorKeyState af_state;
  std::vector<keymgmt::KeyId> ss_bank_ids;
};

struct SppdaOptions {
  std::uint64_t modulus = kDefaultModulus;
  NodeId af{0u};
  NodeId s1{1u};
  NodeId s2{2u};
  std::size_t pool_size = 256;
  std::size_t af_bank_size = 128;
  const keymgmt::KeyPool* pool = nullptr;  // shared predistributed pool, else one is drawn
  keymgmt::RelayHook hook;
  std::optional<SeedAssignment> fixed_seeds;
  std::optional<std::array<RandomCoeffs, 3>> fixed_coeffs;  // indexed A, S1, S2
  Transcript* transcript = nullptr;
};

namespace detail {

inline wire::Bytes encode_share(const Share& s) {
  wire::Bytes out;
  wire::put_u32(out, static_cast<std::uint32_t>(s.producer));
  wire::put_u32(out, static_cast<std::uint32_t>(s.evaluated_at));
  wire::put_u64(out, s.value.value);
  return out;
}

inline Share decode_share(std::span<const std::uint8_t> in) {
  if (in.size() != 16) throw Error(Errc::protocol, "share payload must be 16 bytes");
  return {wire::get_u32(in, 0), wire::get_u32(in, 4), {wire::get_u64(in, 8)}};
}

}  // namespace detail

// Full round between aggregator A (dummy/own value z) and sources S1 (x) and
// S2 (y): key setup, seed broadcast, share exchange over the keyed channels,
// per-node sums, and the aggregator's solve.
inline SppdaRound run_sppda(FieldElem x, FieldElem y, FieldElem z, SimRng& rng, const SppdaOptions& opt = {}) {
  namespace km = keymgmt;
  const Field field(opt.modulus);
  Transcript* log = opt.transcript;

  SimRng key_rng = rng.fork("keys");
  const km::KeyPool pool = opt.pool ? *opt.pool : km::generate_pool(opt.pool_size, opt.af_bank_size, key_rng);
  const std::array<NodeId, 2> sources{opt.s1, opt.s2};
  km::KeyDistribution keys = km::predistribute(pool, opt.af, sources, key_rng, log);
  km::SourceKeyState& st1 = keys.source(opt.s1);
  km::SourceKeyState& st2 = keys.source(opt.s2);
  km::establish_ss_channel(st1, st2, keys.af, key_rng, {opt.hook, false}, log);

  SppdaRound round;
  SimRng seed_rng = rng.fork("seeds");
  round.seeds = opt.fixed_seeds ? *opt.fixed_seeds : draw_seeds(field, 3, seed_rng);
  validate_seeds(field, round.seeds);
  if (round.seeds.size() != 3) throw Error(Errc::invalid_seed, "three-party round needs three seeds");
  if (log) log->event("ppda:seeds");

  const std::array<FieldElem, 3> values{field.elem(z.value), field.elem(x.value), field.elem(y.value)};
  for (std::size_t p = 0; p < 3; ++p) {
    SimRng coeff_rng = rng.fork("coeffs:" + std::to_string(p));
    RandomCoeffs coeffs = opt.fixed_coeffs ? (*opt.fixed_coeffs)[p] : draw_coeffs(field, 2, coeff_rng);
    auto shares = gen_shares(field, p, values[p], round.seeds, coeffs);
    round.producers[p] = {p, values[p], std::move(coeffs), std::move(shares)};
  }
  if (log) log->event("ppda:shares");

  SimRng wire_rng = rng.fork("wire");
  const std::array<NodeId, 3> node_of{opt.af, opt.s1, opt.s2};
  auto log_frame = [&](std::string kind, NodeId from, NodeId to, std::uint32_t r_c, const km::SealedFrame& f) {
    if (log) log->frame({std::move(kind), from, to, r_c, wire::hex(f.encode()), {}});
  };

  // received[i] holds shares delivered to participant i.
  std::array<std::vector<Share>, 3> received;

  // A -> S1, A -> S2 under AF->source pair keys.
  for (std::size_t to : {kSource1, kSource2}) {
    km::SourceKeyState& dst = keys.source(node_of[to]);
    const auto key = km::af_select_key(keys.af, dst.id, wire_rng);
    const auto frame = km::seal_frame(key.key, keys.af.id, dst.id, keys.af.nonce_counter++,
                                      detail::encode_share(round.producers[kAggregator].shares[to]));
    log_frame("share", keys.af.id, dst.id, key.announcement.r_c, frame);
    const auto plain = km::open_frame(km::source_resolve_af_key(dst, key.announcement), frame);
    received[to].push_back(detail::decode_share(plain));
  }

  // S -> A under source->AF pair keys.
  for (std::size_t from : {kSource1, kSource2}) {
    km::SourceKeyState& src = keys.source(node_of[from]);
    const auto key = km::select_session_key(src, wire_rng);
    const auto frame = km::seal_frame(key.key, src.id, keys.af.id, src.nonce_counter++,
                                      detail::encode_share(round.producers[from].shares[kAggregator]));
    log_frame("share", src.id, keys.af.id, key.announcement.r_c, frame);
    const auto plain = km::open_frame(km::af_resolve_key(keys.af, src.id, key.announcement), frame);
    received[kAggregator].push_back(detail::decode_share(plain));
  }

  // S1 <-> S2 under the source-source schedule, relayed by the AF.
  for (auto [from, to] : {std::pair{kSource1, kSource2}, std::pair{kSource2, kSource1}}) {
    km::SourceKeyState& src = keys.source(node_of[from]);
    km::SourceKeyState& dst = keys.source(node_of[to]);
    const auto key = km::select_ss_key(src, dst.id, wire_rng);
    const km::RelayedMessage inner{
        key.announcement,
        km::seal_frame(key.key, src.id, dst.id, src.nonce_counter++, detail::encode_share(round.producers[from].shares[to]))};
    const auto got = km::relay_via_af(src, keys.af, dst, inner, wire_rng, opt.hook, log, "share");
    const auto plain = km::open_frame(km::resolve_ss_key(dst, got.inner_announcement), got.inner);
    received[to].push_back(detail::decode_share(plain));
  }

  for (std::size_t p = 0; p < 3; ++p) {
    round.aggregates[p] = node_aggregate(field, round.producers[p].shares[p], received[p]);
  }
  if (log) log->event("ppda:aggregate");

  // F_S1, F_S2 -> A.
  std::array<NodeAggregate, 3> at_af{round.aggregates[kAggregator], {}, {}};
  for (std::size_t from : {kSource1, kSource2}) {
    km::SourceKeyState& src = keys.source(node_of[from]);
    const auto key = km::select_session_key(src, wire_rng);
    wire::Bytes payload;
    wire::put_u32(payload, static_cast<std::uint32_t>(from));
    wire::put_u64(payload, round.aggregates[from].f.value);
    const auto frame = km::seal_frame(key.key, src.id, keys.af.id, src.nonce_counter++, payload);
    log_frame("aggregate", src.id, keys.af.id, key.announcement.r_c, frame);
    const auto plain = km::open_frame(km::af_resolve_key(keys.af, src.id, key.announcement), frame);
    at_af[from] = {wire::get_u32(plain, 0), {wire::get_u64(plain, 4)}};
  }

  const FieldElem total = solve_aggregate(field, round.seeds, at_af);
  round.result = {total, recover_pair_sum(field, total, values[kAggregator])};
  if (log) log->event("ppda:solve");

  round.af_state = keys.af;
  for (const auto& k : pool.bank_ss) round.ss_bank_ids.push_back(k.id);
  return round;
}

// ---- n-party baseline -------------------------------------------------------

// Every participant masks its value with a degree n-1 polynomial, sends one
// share to each other participant, and the per-node sums are solved as an
// n x n system. Share traffic is O(n^2).
inline FieldElem run_cpda(const Field& field, std::span<const FieldElem> values, const SeedAssignment& seeds,
                          SimRng& rng) {
  const std::size_t n = values.size();
  if (n < 3) throw Error(Errc::invalid_argument, "CPDA needs at least three participants");
  if (seeds.size() != n) throw Error(Errc::invalid_seed, "one seed per participant required");
  validate_seeds(field, seeds);

  std::vector<std::vector<Share>> inbox(n);
  for (std::size_t p = 0; p < n; ++p) {
    const RandomCoeffs coeffs = draw_coeffs(field, n - 1, rng);
    for (Share& s : gen_shares(field, p, values[p], seeds, coeffs)) inbox[s.evaluated_at].push_back(s);
  }
  std::vector<NodeAggregate> sums;
  sums.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = std::find_if(inbox[i].begin(), inbox[i].end(), [&](const Share& s) { return s.producer == i; });
    std::vector<Share> others;
    for (const Share& s : inbox[i]) {
      if (s.producer != i) others.push_back(s);
    }
    sums.push_back(node_aggregate(field, *own, others));
  }
  return solve_aggregate(field, seeds, sums);
}

inline FieldElem run_cpda(const Field& field, std::span<const FieldElem> values, SimRng& rng) {
  if (values.size() < 3) throw Error(Errc::invalid_argument, "CPDA needs at least three participants");
  const SeedAssignment seeds = draw_seeds(field, values.size(), rng);
  return run_cpda(field, values, seeds, rng);
}

}  // namespace ctxpriv::ppda
