#include "lab/multipaxos.hpp"

#include <algorithm>

namespace lab::paxos {

PaxosState make_initial(ServerId me, int n) {
  PaxosState s;
  s.me = me;
  s.n = n;
  return s;
}

Entry entry_at(const PaxosState& s, Index i) {
  if (i < 0 || i >= static_cast<Index>(s.log.size())) return Entry{};
  return s.log[static_cast<size_t>(i)];
}

void set_entry(PaxosState& s, Index i, const Entry& e) {
  if (i < 0) return;
  if (i >= static_cast<Index>(s.log.size())) s.log.resize(static_cast<size_t>(i) + 1);
  s.log[static_cast<size_t>(i)] = e;
  if (i > s.log_tail) s.log_tail = i;
}

bool increase_ballot(PaxosState& s, Ballot b) {
  if (b <= s.ballot) return false;
  s.ballot = b;
  s.leader = false;
  return true;
}

std::optional<PrepareMsg> phase1a(const PaxosState& s) {
  if (s.leader) return std::nullopt;
  if (ballot_proposer(s.ballot, s.n) != s.me) return std::nullopt;
  return PrepareMsg{0, s.ballot};
}

PrepareOkMsg self_prepare_ok(const PaxosState& s) {
  PrepareOkMsg ok;
  ok.acc = s.me;
  ok.bal = s.ballot;
  ok.log = s.log;
  ok.log_tail = s.log_tail;
  return ok;
}

std::optional<PrepareOkMsg> phase1b(PaxosState& s, const PrepareMsg& m) {
  if (m.bal <= s.ballot) return std::nullopt;
  s.ballot = m.bal;
  s.leader = false;
  PrepareOkMsg ok;
  ok.group = m.group;
  ok.acc = s.me;
  ok.bal = m.bal;
  ok.log = s.log;
  ok.log_tail = s.log_tail;
  return ok;
}

bool become_leader(PaxosState& s, const std::vector<PrepareOkMsg>& replies,
                   const QuorumSystem& q) {
  if (s.leader || replies.empty()) return false;
  std::set<ServerId> accs;
  bool has_self = false;
  Index max_tail = kNilIndex;
  for (const auto& r : replies) {
    if (r.bal != s.ballot) return false;
    accs.insert(r.acc);
    if (r.acc == s.me) has_self = true;
    max_tail = std::max(max_tail, r.log_tail);
  }
  if (!has_self || !q.is_quorum(accs)) return false;

  for (Index i = 0; i <= max_tail; ++i) {
    Entry best;  // empty slot is the minimum
    for (const auto& r : replies) {
      Entry e = (i < static_cast<Index>(r.log.size())) ? r.log[static_cast<size_t>(i)] : Entry{};
      if (compare_entries(e, best, s.n) > 0) best = e;
    }
    set_entry(s, i, best);
  }
  s.leader = true;
  return true;
}

ProposeResult propose(PaxosState& s, Index i, const Value& v, int64_t op_id) {
  ProposeResult res;
  if (!s.leader || i < 0 || is_noval(v)) return res;
  Entry cur = entry_at(s, i);
  if (!cur.empty() && cur.val != v) return res;
  res.accept = AcceptMsg{0, i, s.ballot, v, false, op_id};
  auto self = accept(s, res.accept);
  if (!self) return res;  // cannot happen: own ballot satisfies bal >= ballot
  res.self_ack = *self;
  res.ok = true;
  return res;
}

std::optional<AcceptOkMsg> accept(PaxosState& s, const AcceptMsg& m) {
  if (m.bal < s.ballot) return std::nullopt;
  if (m.bal > s.ballot) s.leader = false;
  s.ballot = m.bal;
  set_entry(s, m.index, Entry{m.bal, kNilBallot, m.val});
  s.votes[m.index].insert({m.bal, m.val});
  AcceptOkMsg ok;
  ok.group = m.group;
  ok.acc = s.me;
  ok.index = m.index;
  ok.bal = m.bal;
  ok.val = m.val;
  ok.op_id = m.op_id;
  return ok;
}

bool learn(PaxosState& s, const std::vector<AcceptOkMsg>& acks, const QuorumSystem& q) {
  if (acks.empty()) return false;
  const auto& first = acks.front();
  std::set<ServerId> accs;
  for (const auto& a : acks) {
    if (a.index != first.index || a.bal != first.bal || !(a.val == first.val)) return false;
    accs.insert(a.acc);
  }
  if (!q.is_quorum(accs)) return false;
  s.chosen[first.index] = {first.bal, first.val};
  set_entry(s, first.index, Entry{first.bal, kNilBallot, first.val});
  return true;
}

void canon_state(Canon& c, const PaxosState& s) {
  c.i64(s.me);
  c.i64(s.ballot);
  c.boolean(s.leader);
  c.i64(s.log_tail);
  c.i64(static_cast<int64_t>(s.log.size()));
  for (const auto& e : s.log) canon_entry(c, e);
  c.i64(static_cast<int64_t>(s.chosen.size()));
  for (const auto& [i, bv] : s.chosen) {
    c.i64(i);
    c.i64(bv.first);
    canon_value(c, bv.second);
  }
  c.i64(static_cast<int64_t>(s.votes.size()));
  for (const auto& [i, vs] : s.votes) {
    c.i64(i);
    c.i64(static_cast<int64_t>(vs.size()));
    for (const auto& [b, v] : vs) {
      c.i64(b);
      canon_value(c, v);
    }
  }
}

uint64_t state_digest(const PaxosState& s) {
  Canon c;
  canon_state(c, s);
  return fnv1a(c.bytes());
}

namespace {
// Trailing empty slots are representation noise, not state.
std::vector<Entry> trimmed(const std::vector<Entry>& log) {
  std::vector<Entry> t = log;
  while (!t.empty() && t.back().empty()) t.pop_back();
  return t;
}
}  // namespace

bool states_equal(const PaxosState& a, const PaxosState& b) {
  return a.ballot == b.ballot && a.leader == b.leader && a.log_tail == b.log_tail &&
         trimmed(a.log) == trimmed(b.log) && a.chosen == b.chosen && a.votes == b.votes;
}

std::string diff_states(const PaxosState& a, const PaxosState& b) {
  if (a.ballot != b.ballot)
    return "ballot: " + std::to_string(a.ballot) + " vs " + std::to_string(b.ballot);
  if (a.leader != b.leader) return "leader flag";
  if (a.log_tail != b.log_tail)
    return "logTail: " + std::to_string(a.log_tail) + " vs " + std::to_string(b.log_tail);
  auto la = trimmed(a.log), lb = trimmed(b.log);
  size_t m = std::max(la.size(), lb.size());
  for (size_t i = 0; i < m; ++i) {
    Entry ea = i < la.size() ? la[i] : Entry{};
    Entry eb = i < lb.size() ? lb[i] : Entry{};
    if (ea.bal != eb.bal)
      return "instance[" + std::to_string(i) + "].bal: " + std::to_string(ea.bal) + " vs " +
             std::to_string(eb.bal);
    if (!(ea.val == eb.val)) return "instance[" + std::to_string(i) + "].val";
  }
  if (a.chosen != b.chosen) return "chosenSet";
  if (a.votes != b.votes) return "votes";
  return "";
}

}  // namespace lab::paxos
