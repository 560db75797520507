#pragma once

#include <cstdint>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace lab {

using ServerId = int;
using Tick = int64_t;
using Index = int64_t;  // -1 is the "before the log" sentinel

// Ballots (Raft terms map onto these) are encoded round*N + proposer so that
// no two servers can ever produce the same ballot number. -1 means "none".
using Ballot = int64_t;

constexpr Ballot kNilBallot = -1;
constexpr Index kNilIndex = -1;

Ballot make_ballot(int64_t round, ServerId proposer, int cluster_size);
int64_t ballot_round(Ballot b, int cluster_size);
ServerId ballot_proposer(Ballot b, int cluster_size);

// Smallest ballot > b whose proposer field equals `proposer`.
Ballot ballot_succ(Ballot b, ServerId proposer, int cluster_size);

// ---------------------------------------------------------------------------
// Values

enum class OpKind : uint8_t { Read = 0, Write = 1 };

struct Command {
  OpKind kind = OpKind::Write;
  std::string key;
  std::string payload;

  auto operator<=>(const Command&) const = default;
};

// NoVal is the empty-slot marker and never travels as a proposed value.
// Noop is a real proposable value distinct from every command.
struct NoVal {
  auto operator<=>(const NoVal&) const = default;
};
struct Noop {
  auto operator<=>(const Noop&) const = default;
};

using Value = std::variant<NoVal, Noop, Command>;

bool is_noval(const Value& v);
bool is_noop(const Value& v);
bool is_read(const Value& v);
bool is_write(const Value& v);
std::string value_repr(const Value& v);

// ---------------------------------------------------------------------------
// Log entries

// bal is the Paxos-shadow accepted ballot; term is the Raft entry term
// (unused by pure Paxos, kept at -1 there). val == NoVal iff bal == -1.
struct Entry {
  Ballot bal = kNilBallot;
  Ballot term = kNilBallot;
  Value val = NoVal{};

  bool empty() const { return is_noval(val); }
  auto operator<=>(const Entry&) const = default;
};

// Deterministic total order on entries: by bal, ties by proposer of bal,
// then by canonical byte order of val. Empty slots are the minimum.
std::strong_ordering compare_entries(const Entry& a, const Entry& b, int cluster_size);

// ---------------------------------------------------------------------------
// Quorums

// Any intersecting family of server sets; majority (f+1 of 2f+1) by default.
struct QuorumSystem {
  int n = 0;
  int f = 0;
  // Empty means "majority": every set of size >= f+1 is a quorum.
  std::vector<std::set<ServerId>> explicit_quorums;

  static QuorumSystem majority(int n);
  bool is_quorum(const std::set<ServerId>& s) const;  // throws on unknown ids
  bool contains(ServerId s) const { return s >= 0 && s < n; }
};

// ---------------------------------------------------------------------------
// Protocol messages (envelope payloads)

struct PrepareMsg {  // Paxos phase 1a
  int group = 0;
  Ballot bal = 0;
};

struct PrepareOkMsg {  // Paxos phase 1b; full log per reply
  int group = 0;
  ServerId acc = 0;
  Ballot bal = 0;
  std::vector<Entry> log;
  Index log_tail = kNilIndex;
  std::vector<bool> skip_tags;  // coordinated variants only
};

struct AcceptMsg {  // Paxos phase 2a
  int group = 0;
  Index index = 0;
  Ballot bal = 0;
  Value val;
  bool is_default = false;  // coordinated variants only
  int64_t op_id = -1;
};

struct AcceptOkMsg {  // Paxos phase 2b; broadcast so any server can learn
  int group = 0;
  ServerId acc = 0;
  Index index = 0;
  Ballot bal = 0;
  Value val;
  std::vector<ServerId> holders;  // lease variants: leases granted by acc
  int64_t op_id = -1;
};

struct RequestVoteMsg {
  int group = 0;
  Ballot term = 0;
  Index last_index = kNilIndex;
  Ballot last_term = kNilBallot;
};

struct RequestVoteOkMsg {  // full log per reply
  int group = 0;
  ServerId acc = 0;
  Ballot term = 0;
  std::vector<Entry> log;
  Index log_tail = kNilIndex;
  std::vector<bool> skip_tags;  // coordinated variants only
};

struct AppendMsg {
  int group = 0;
  Ballot term = 0;
  Index prev = kNilIndex;
  Ballot prev_term = kNilBallot;
  std::vector<Entry> entries;  // covers prev+1 .. prev+entries.size()
  Index leader_commit = kNilIndex;
  bool is_default = false;  // coordinated variants only
  std::vector<int64_t> op_ids;
};

struct AppendOkMsg {
  int group = 0;
  ServerId acc = 0;
  Ballot term = 0;
  Index last_index = kNilIndex;
  std::vector<ServerId> holders;  // lease variants
};

struct LocalReadMsg {
  std::string key;
  int64_t op_id = -1;
};

struct ReadReplyMsg {
  std::string key;
  std::string value;  // empty when key unset
  bool refused = false;
  int64_t op_id = -1;
};

struct GrantLeaseMsg {
  ServerId grantor = 0;
  Tick deadline = 0;
};

using Payload = std::variant<PrepareMsg, PrepareOkMsg, AcceptMsg, AcceptOkMsg,
                             RequestVoteMsg, RequestVoteOkMsg, AppendMsg, AppendOkMsg,
                             LocalReadMsg, ReadReplyMsg, GrantLeaseMsg>;

const char* payload_kind(const Payload& p);

constexpr ServerId kBroadcast = -1;

struct Envelope {
  ServerId from = 0;
  ServerId to = 0;  // kBroadcast expands per destination at send time
  Tick sent_at = 0;
  Payload payload;
};

// ---------------------------------------------------------------------------
// Canonical serialization + stable digests

// Append-only canonical byte writer; every state/message digest and every
// explorer dedup key goes through this so representations stay comparable.
class Canon {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void i64(int64_t v);
  void str(const std::string& s);
  void boolean(bool v) { u8(v ? 1 : 0); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

void canon_value(Canon& c, const Value& v);
void canon_entry(Canon& c, const Entry& e);
void canon_payload(Canon& c, const Payload& p);

uint64_t fnv1a(const std::string& bytes);
std::string digest_hex(uint64_t h);
uint64_t payload_digest(const Payload& p);

}  // namespace lab
