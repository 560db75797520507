#include "lab/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace lab {

Ballot make_ballot(int64_t round, ServerId proposer, int cluster_size) {
  if (round < 0 || proposer < 0 || proposer >= cluster_size)
    throw std::invalid_argument("make_ballot: bad round/proposer");
  return round * cluster_size + proposer;
}

int64_t ballot_round(Ballot b, int cluster_size) {
  if (b < 0) return -1;
  return b / cluster_size;
}

ServerId ballot_proposer(Ballot b, int cluster_size) {
  if (b < 0) return -1;
  return static_cast<ServerId>(b % cluster_size);
}

Ballot ballot_succ(Ballot b, ServerId proposer, int cluster_size) {
  if (proposer < 0 || proposer >= cluster_size)
    throw std::invalid_argument("ballot_succ: proposer not in cluster");
  int64_t round = (b < 0) ? 0 : ballot_round(b, cluster_size);
  Ballot cand = make_ballot(round, proposer, cluster_size);
  while (cand <= b) cand += cluster_size;
  return cand;
}

bool is_noval(const Value& v) { return std::holds_alternative<NoVal>(v); }
bool is_noop(const Value& v) { return std::holds_alternative<Noop>(v); }

bool is_read(const Value& v) {
  const auto* c = std::get_if<Command>(&v);
  return c && c->kind == OpKind::Read;
}

bool is_write(const Value& v) {
  const auto* c = std::get_if<Command>(&v);
  return c && c->kind == OpKind::Write;
}

std::string value_repr(const Value& v) {
  if (is_noval(v)) return "_";
  if (is_noop(v)) return "noop";
  const auto& c = std::get<Command>(v);
  std::string s = c.kind == OpKind::Read ? "r(" : "w(";
  s += c.key;
  if (!c.payload.empty()) {
    s += "=";
    s += c.payload;
  }
  s += ")";
  return s;
}

std::strong_ordering compare_entries(const Entry& a, const Entry& b, int cluster_size) {
  if (a.bal != b.bal) return a.bal <=> b.bal;
  ServerId pa = ballot_proposer(a.bal, cluster_size);
  ServerId pb = ballot_proposer(b.bal, cluster_size);
  if (pa != pb) return pa <=> pb;
  Canon ca, cb;
  canon_value(ca, a.val);
  canon_value(cb, b.val);
  int cmp = ca.bytes().compare(cb.bytes());
  if (cmp < 0) return std::strong_ordering::less;
  if (cmp > 0) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

QuorumSystem QuorumSystem::majority(int n) {
  QuorumSystem q;
  q.n = n;
  q.f = (n - 1) / 2;
  return q;
}

bool QuorumSystem::is_quorum(const std::set<ServerId>& s) const {
  for (ServerId id : s)
    if (!contains(id)) throw std::invalid_argument("is_quorum: unknown server id");
  if (explicit_quorums.empty()) return static_cast<int>(s.size()) >= f + 1;
  for (const auto& q : explicit_quorums) {
    if (std::includes(s.begin(), s.end(), q.begin(), q.end())) return true;
  }
  return false;
}

const char* payload_kind(const Payload& p) {
  switch (p.index()) {
    case 0: return "prepare";
    case 1: return "prepareOK";
    case 2: return "accept";
    case 3: return "acceptOK";
    case 4: return "requestVote";
    case 5: return "requestVoteOK";
    case 6: return "append";
    case 7: return "appendOK";
    case 8: return "localRead";
    case 9: return "readReply";
    case 10: return "grantLease";
  }
  return "?";
}

void Canon::i64(int64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void Canon::str(const std::string& s) {
  i64(static_cast<int64_t>(s.size()));
  buf_.append(s);
}

void canon_value(Canon& c, const Value& v) {
  c.u8(static_cast<uint8_t>(v.index()));
  if (const auto* cmd = std::get_if<Command>(&v)) {
    c.u8(static_cast<uint8_t>(cmd->kind));
    c.str(cmd->key);
    c.str(cmd->payload);
  }
}

void canon_entry(Canon& c, const Entry& e) {
  c.i64(e.bal);
  c.i64(e.term);
  canon_value(c, e.val);
}

namespace {

void canon_entries(Canon& c, const std::vector<Entry>& log) {
  c.i64(static_cast<int64_t>(log.size()));
  for (const auto& e : log) canon_entry(c, e);
}

void canon_bools(Canon& c, const std::vector<bool>& v) {
  c.i64(static_cast<int64_t>(v.size()));
  for (bool b : v) c.boolean(b);
}

void canon_ids(Canon& c, const std::vector<ServerId>& v) {
  c.i64(static_cast<int64_t>(v.size()));
  for (ServerId s : v) c.i64(s);
}

}  // namespace

void canon_payload(Canon& c, const Payload& p) {
  c.u8(static_cast<uint8_t>(p.index()));
  std::visit(
      [&c](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PrepareMsg>) {
          c.i64(m.group);
          c.i64(m.bal);
        } else if constexpr (std::is_same_v<T, PrepareOkMsg>) {
          c.i64(m.group);
          c.i64(m.acc);
          c.i64(m.bal);
          canon_entries(c, m.log);
          c.i64(m.log_tail);
          canon_bools(c, m.skip_tags);
        } else if constexpr (std::is_same_v<T, AcceptMsg>) {
          c.i64(m.group);
          c.i64(m.index);
          c.i64(m.bal);
          canon_value(c, m.val);
          c.boolean(m.is_default);
        } else if constexpr (std::is_same_v<T, AcceptOkMsg>) {
          c.i64(m.group);
          c.i64(m.acc);
          c.i64(m.index);
          c.i64(m.bal);
          canon_value(c, m.val);
          canon_ids(c, m.holders);
        } else if constexpr (std::is_same_v<T, RequestVoteMsg>) {
          c.i64(m.group);
          c.i64(m.term);
          c.i64(m.last_index);
          c.i64(m.last_term);
        } else if constexpr (std::is_same_v<T, RequestVoteOkMsg>) {
          c.i64(m.group);
          c.i64(m.acc);
          c.i64(m.term);
          canon_entries(c, m.log);
          c.i64(m.log_tail);
          canon_bools(c, m.skip_tags);
        } else if constexpr (std::is_same_v<T, AppendMsg>) {
          c.i64(m.group);
          c.i64(m.term);
          c.i64(m.prev);
          c.i64(m.prev_term);
          canon_entries(c, m.entries);
          c.i64(m.leader_commit);
          c.boolean(m.is_default);
        } else if constexpr (std::is_same_v<T, AppendOkMsg>) {
          c.i64(m.group);
          c.i64(m.acc);
          c.i64(m.term);
          c.i64(m.last_index);
          canon_ids(c, m.holders);
        } else if constexpr (std::is_same_v<T, LocalReadMsg>) {
          c.str(m.key);
          c.i64(m.op_id);
        } else if constexpr (std::is_same_v<T, ReadReplyMsg>) {
          c.str(m.key);
          c.str(m.value);
          c.boolean(m.refused);
          c.i64(m.op_id);
        } else if constexpr (std::is_same_v<T, GrantLeaseMsg>) {
          c.i64(m.grantor);
          c.i64(m.deadline);
        }
      },
      p);
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (char ch : bytes) {
    h ^= static_cast<uint8_t>(ch);
    h *= 1099511628211ull;
  }
  return h;
}

std::string digest_hex(uint64_t h) {
  static const char* hexd = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = hexd[h & 0xf];
    h >>= 4;
  }
  return s;
}

uint64_t payload_digest(const Payload& p) {
  Canon c;
  canon_payload(c, p);
  return fnv1a(c.bytes());
}

}  // namespace lab
