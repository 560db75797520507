#include "lab/lease.hpp"

#include <algorithm>

namespace lab::lease {

std::vector<ServerId> active_grants(const LeaseDelta& d) {
  std::vector<ServerId> out;
  for (const auto& [holder, deadline] : d.granted)
    if (deadline >= d.timer_view) out.push_back(holder);
  return out;
}

bool lease_is_active(const LeaseDelta& d, const QuorumSystem& q) {
  std::set<ServerId> grantors;
  for (const auto& [grantor, deadline] : d.received)
    if (deadline >= d.timer_view) grantors.insert(grantor);
  return !grantors.empty() && q.is_quorum(grantors);
}

GrantLeaseMsg grant_lease(LeaseDelta& d, ServerId me, ServerId holder) {
  Tick deadline = d.timer_view + d.lease_duration;
  d.granted[holder] = deadline;
  return GrantLeaseMsg{me, deadline};
}

void receive_grant(LeaseDelta& d, const GrantLeaseMsg& m) {
  d.received[m.grantor] = std::max(d.received[m.grantor], m.deadline);
}

void update_timer(LeaseDelta& d, Tick t) { d.timer_view = std::max(d.timer_view, t); }

bool can_commit_at(const std::vector<LeaseView>& universe, const QuorumSystem& q, Index i,
                   Ballot b, const Value& v) {
  int n = static_cast<int>(universe.size());
  auto voted = [&](ServerId a) {
    const auto& votes = *universe[static_cast<size_t>(a)].votes;
    auto it = votes.find(i);
    return it != votes.end() && it->second.count({b, v}) > 0;
  };
  std::set<ServerId> voters;
  for (ServerId a = 0; a < n; ++a)
    if (voted(a)) voters.insert(a);
  if (!q.is_quorum(voters)) return false;

  // Search for one quorum of voters whose granted holders have all voted.
  // Quorums are small; enumerate subsets of the voters.
  std::vector<ServerId> vs(voters.begin(), voters.end());
  int k = static_cast<int>(vs.size());
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::set<ServerId> qset;
    for (int j = 0; j < k; ++j)
      if (mask & (1 << j)) qset.insert(vs[static_cast<size_t>(j)]);
    if (!q.is_quorum(qset)) continue;
    bool ok = true;
    for (ServerId g : qset) {
      const auto& d = *universe[static_cast<size_t>(g)].lease;
      for (ServerId holder : active_grants(d)) {
        if (!voted(holder)) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) return true;
  }
  return false;
}

bool pql_learn(PqlState& s, const std::vector<AcceptOkMsg>& acks, const QuorumSystem& q) {
  if (acks.empty()) return false;
  const auto& first = acks.front();
  std::map<ServerId, const AcceptOkMsg*> by_acc;
  for (const auto& a : acks) {
    if (a.index != first.index || a.bal != first.bal || !(a.val == first.val)) return false;
    by_acc[a.acc] = &a;
  }
  // Find a quorum among the ack senders whose advertised holders all acked.
  std::vector<ServerId> senders;
  for (const auto& [acc, _] : by_acc) senders.push_back(acc);
  int k = static_cast<int>(senders.size());
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::set<ServerId> qset;
    for (int j = 0; j < k; ++j)
      if (mask & (1 << j)) qset.insert(senders[static_cast<size_t>(j)]);
    if (!q.is_quorum(qset)) continue;
    bool covered = true;
    for (ServerId g : qset) {
      for (ServerId h : by_acc[g]->holders) {
        if (!by_acc.count(h)) {
          covered = false;
          break;
        }
      }
      if (!covered) break;
    }
    if (covered) {
      std::vector<AcceptOkMsg> quorum_acks;
      for (const auto& a : acks)
        if (qset.count(a.acc) && quorum_acks.end() ==
            std::find_if(quorum_acks.begin(), quorum_acks.end(),
                         [&a](const AcceptOkMsg& x) { return x.acc == a.acc; }))
          quorum_acks.push_back(a);
      return paxos::learn(s.base, quorum_acks, q);
    }
  }
  return false;
}

bool rql_leader_learn(RqlState& s, const std::vector<AppendOkMsg>& acks, const QuorumSystem& q) {
  if (!s.base.leader || acks.empty()) return false;
  std::map<ServerId, Index> acked;  // deduplicated per acceptor
  std::set<ServerId> holder_set;
  for (const auto& a : acks) {
    if (a.term != s.base.current_term) return false;
    if (a.acc == s.base.me) continue;
    auto [it, fresh] = acked.try_emplace(a.acc, a.last_index);
    if (!fresh) it->second = std::max(it->second, a.last_index);
    for (ServerId h : a.holders) holder_set.insert(h);
  }
  if (static_cast<int>(acked.size()) < q.f) return false;
  // The implicit self-ack contributes the holders granted by the leader.
  for (ServerId h : active_grants(s.lease)) holder_set.insert(h);

  // Candidate commit: f-th largest acked index (the implicit self-ack covers
  // the leader's own log).
  std::vector<Index> tails;
  for (const auto& [acc, idx] : acked) tails.push_back(idx);
  std::sort(tails.begin(), tails.end(), std::greater<>());
  Index cand = tails[static_cast<size_t>(q.f - 1)];
  cand = std::min(cand, s.base.last_index);

  // Withhold commit until every lease holder has acked that far.
  for (ServerId h : holder_set) {
    if (h == s.base.me) continue;
    auto it = acked.find(h);
    if (it == acked.end()) return false;
    cand = std::min(cand, it->second);
  }
  if (cand <= s.base.commit_index) return false;
  s.base.commit_index = cand;
  return true;
}

Index max_index_touching(const std::vector<Entry>& log, const std::string& key) {
  Index out = kNilIndex;
  for (size_t i = 0; i < log.size(); ++i) {
    const auto* c = std::get_if<Command>(&log[i].val);
    if (c && c->kind == OpKind::Write && c->key == key) out = static_cast<Index>(i);
  }
  return out;
}

namespace {
ReadOutcome kv_read(const LeaseDelta& d, const std::string& key) {
  ReadOutcome r;
  r.served = true;
  auto it = d.kv.find(key);
  if (it != d.kv.end()) r.value = it->second;
  return r;
}
}  // namespace

ReadOutcome local_read_pql(const PqlState& s, const QuorumSystem& q, const std::string& key) {
  if (!lease_is_active(s.lease, q)) return {};
  Index touch = max_index_touching(s.base.log, key);
  if (touch != kNilIndex && !s.base.chosen.count(touch)) return {};
  if (s.base.log_tail != s.lease.apply_index) return {};  // pending writes
  return kv_read(s.lease, key);
}

ReadOutcome local_read_rql(const RqlState& s, const QuorumSystem& q, const std::string& key) {
  if (!lease_is_active(s.lease, q)) return {};
  Index touch = max_index_touching(s.base.log, key);
  if (touch > s.base.commit_index) return {};
  if (touch > s.lease.apply_index) return {};  // written but not yet applied
  return kv_read(s.lease, key);
}

namespace {
void apply_entry(LeaseDelta& d, const Entry& e) {
  const auto* c = std::get_if<Command>(&e.val);
  if (c && c->kind == OpKind::Write) d.kv[c->key] = c->payload;
}
}  // namespace

bool apply_pql(PqlState& s, Index i) {
  if (i != s.lease.apply_index + 1) return false;
  if (!s.base.chosen.count(i)) return false;
  apply_entry(s.lease, paxos::entry_at(s.base, i));
  s.lease.apply_index = i;
  return true;
}

bool apply_rql(RqlState& s, Index i) {
  if (i != s.lease.apply_index + 1) return false;
  if (i > s.base.commit_index) return false;
  apply_entry(s.lease, raft::entry_at(s.base, i));
  s.lease.apply_index = i;
  return true;
}

void canon_delta(Canon& c, const LeaseDelta& d) {
  c.i64(d.timer_view);
  c.i64(d.lease_duration);
  c.i64(static_cast<int64_t>(d.granted.size()));
  for (const auto& [h, t] : d.granted) {
    c.i64(h);
    c.i64(t);
  }
  c.i64(static_cast<int64_t>(d.received.size()));
  for (const auto& [g, t] : d.received) {
    c.i64(g);
    c.i64(t);
  }
  c.i64(d.apply_index);
  c.i64(static_cast<int64_t>(d.kv.size()));
  for (const auto& [k, v] : d.kv) {
    c.str(k);
    c.str(v);
  }
}

}  // namespace lab::lease
