#pragma once

#include <optional>

#include "lab/lease.hpp"
#include "lab/mencius.hpp"

namespace lab::refine {

// The named refinement mappings (Fig 5 diamond included).
enum class MapId {
  RaftstarToPaxos,
  PqlToPaxos,          // drop Δ
  RqlToRaftstar,       // drop Δ
  RqlToPql,
  MenciusToRaftstar,   // drop Δ, per group
  CoorpaxosToPaxos,    // drop Δ
  MenciusToCoorpaxos,  // per group
};

std::optional<MapId> parse_map(const std::string& spec);  // "raftstar:paxos"
const char* map_name(MapId m);
const char* map_source(MapId m);  // source protocol id

// One concrete protocol step: acting server, subaction label, and the inputs
// it consumed. Produced by the simulator replay and by explorer edges.
struct Step {
  int64_t id = 0;
  ServerId server = 0;
  int group = 0;
  std::string label;         // subaction label ("receive_append", ...)
  std::string tag = "base";  // base | unchanged | modified | added

  std::optional<PrepareMsg> prepare_msg;
  std::optional<AcceptMsg> accept_msg;
  std::optional<RequestVoteMsg> vote_msg;
  std::optional<AppendMsg> append_msg;
  std::optional<GrantLeaseMsg> grant_msg;
  std::vector<PrepareOkMsg> prepare_replies;
  std::vector<RequestVoteOkMsg> vote_replies;
  std::vector<AcceptOkMsg> learn_acks;
  std::vector<AppendOkMsg> append_acks;

  Index index = kNilIndex;      // propose / apply
  Value value;                  // propose
  std::vector<Value> values;    // append_entries batch
  Index prev = kNilIndex;       // append_entries
  Ballot ballot = kNilBallot;   // increase_ballot
  ServerId other = -1;          // grant_lease holder
  Tick timer = 0;               // update_timer
  std::string key;              // local_read
};

// Per-server states of one protocol instance (single group).
struct Universe {
  std::string protocol;
  QuorumSystem quorums;
  ServerId default_server = -1;  // coordinated protocols
  std::vector<paxos::PaxosState> paxos;          // multipaxos / pql / coorpaxos
  std::vector<raft::RaftState> raft;             // raftstar / rql / coorraft
  std::vector<lease::LeaseDelta> lease;          // pql / rql
  std::vector<mencius::CoordDelta> coord;        // coorpaxos / coorraft
};

struct StepVerdict {
  int64_t step_id = 0;
  std::vector<std::string> actions;  // abstract actions replayed, in order
  bool stutter = false;
  std::optional<std::string> violation;
  bool ok() const { return !violation.has_value(); }
};

// Fig 3 state map: per-server Raft* state to MultiPaxos state.
paxos::PaxosState map_raft_to_paxos(const raft::RaftState& r);

// Maps one concrete step to abstract actions, replays them on the mapped
// pre-state checking every enabling condition, and requires the result to
// equal the mapped post-state. Implicit self messages are synthesized.
StepVerdict verify_step(MapId map, const Universe& pre, const Step& step, const Universe& post);

struct TraceReport {
  int64_t ok = 0;
  int64_t stutter = 0;
  int64_t violations = 0;
  std::optional<StepVerdict> first_violation;
  bool passed() const { return violations == 0; }
};

// Non-mutation audit (§4.2): steps tagged `added` must leave the drop-Δ
// projection unchanged; `modified`/`unchanged` steps are covered by the
// drop-Δ refinement check. Missing tags are errors.
struct AuditReport {
  int64_t added = 0;
  int64_t modified = 0;
  int64_t unchanged = 0;
  int64_t base = 0;
  std::optional<std::string> violation;
  bool passed() const { return !violation.has_value(); }
};

AuditReport audit_step(const Universe& pre, const Step& step, const Universe& post,
                       AuditReport carry);

bool universes_equal(const Universe& a, const Universe& b);
uint64_t universe_digest(const Universe& u);

}  // namespace lab::refine
