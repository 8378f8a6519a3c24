#include "dtwin/scheduler.hpp"

#include <algorithm>

namespace dtwin {

NodePool::NodePool(int size) {
  if (size < 0) throw SchedulerError("node pool size must be >= 0");
  owner_.assign(static_cast<std::size_t>(size), kFreeNode);
  free_count_ = size;
}

const std::vector<int>& NodePool::nodes_of(std::int64_t job_id) const {
  auto it = held_.find(job_id);
  if (it == held_.end()) throw SchedulerError("job " + std::to_string(job_id) + " holds no nodes");
  return it->second;
}

std::vector<int> NodePool::allocate_lowest(std::int64_t job_id, int count) {
  if (job_id == kFreeNode) throw SchedulerError("job id -1 is reserved");
  if (count < 1 || count > free_count_) {
    throw SchedulerError("cannot allocate " + std::to_string(count) + " nodes with " +
                         std::to_string(free_count_) + " free");
  }
  if (holds(job_id)) throw SchedulerError("job " + std::to_string(job_id) + " already allocated");
  std::vector<int> nodes;
  nodes.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < size() && static_cast<int>(nodes.size()) < count; ++n) {
    if (owner_[n] == kFreeNode) {
      owner_[n] = job_id;
      nodes.push_back(n);
    }
  }
  free_count_ -= count;
  held_[job_id] = nodes;
  return nodes;
}

void NodePool::allocate_exact(std::int64_t job_id, const std::vector<int>& nodes) {
  if (job_id == kFreeNode) throw SchedulerError("job id -1 is reserved");
  if (nodes.empty()) throw SchedulerError("empty node list");
  if (holds(job_id)) throw SchedulerError("job " + std::to_string(job_id) + " already allocated");
  for (int n : nodes) {
    if (n < 0 || n >= size()) throw SchedulerError("node " + std::to_string(n) + " outside pool");
    if (owner_[n] != kFreeNode) throw SchedulerError("node " + std::to_string(n) + " is busy");
  }
  std::vector<int> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw SchedulerError("duplicate node in pinned list");
  }
  for (int n : sorted) owner_[n] = job_id;
  free_count_ -= static_cast<int>(sorted.size());
  held_[job_id] = std::move(sorted);
}

std::vector<int> NodePool::release(std::int64_t job_id) {
  auto it = held_.find(job_id);
  if (it == held_.end()) throw SchedulerError("release of unknown job " + std::to_string(job_id));
  std::vector<int> nodes = std::move(it->second);
  held_.erase(it);
  for (int n : nodes) owner_[n] = kFreeNode;
  free_count_ += static_cast<int>(nodes.size());
  return nodes;
}

// ---------------------------------------------------------------------------

bool PendingQueue::precedes(const PendingEntry& a, const PendingEntry& b) const {
  switch (policy_) {
    case SchedulingPolicy::Sjf:
      if (a.job->wall_time_s != b.job->wall_time_s) return a.job->wall_time_s < b.job->wall_time_s;
      if (a.job->job_id != b.job->job_id) return a.job->job_id < b.job->job_id;
      return a.seq < b.seq;
    case SchedulingPolicy::Replay:
      if (a.job->submit_time != b.job->submit_time) return a.job->submit_time < b.job->submit_time;
      if (a.job->job_id != b.job->job_id) return a.job->job_id < b.job->job_id;
      return a.seq < b.seq;
    case SchedulingPolicy::Fcfs:
      break;
  }
  return a.seq < b.seq;
}

void PendingQueue::push(const Job& job, double now) {
  PendingEntry entry{&job, now, next_seq_++};
  auto pos = std::upper_bound(entries_.begin(), entries_.end(), entry,
                              [this](const PendingEntry& x, const PendingEntry& y) { return precedes(x, y); });
  entries_.insert(pos, entry);
}

struct ScheduleAccess {
  static std::vector<PendingEntry>& entries(PendingQueue& q) { return q.entries_; }
};

namespace {

std::string oversize_reason(const Job& job, int pool_size) {
  return "requests " + std::to_string(job.node_count) + " nodes but the system has " + std::to_string(pool_size);
}

}  // namespace

ScheduleOutcome schedule_jobs(PendingQueue& queue, NodePool& pool, double now) {
  ScheduleOutcome out;
  auto& entries = ScheduleAccess::entries(queue);
  std::vector<PendingEntry> kept;
  kept.reserve(entries.size());
  bool blocked = false;

  for (const PendingEntry& e : entries) {
    const Job& job = *e.job;
    if (blocked) {
      kept.push_back(e);
      continue;
    }
    if (job.node_count > pool.size()) {
      out.rejected.push_back({job.job_id, oversize_reason(job, pool.size())});
      continue;
    }

    if (queue.policy() == SchedulingPolicy::Replay && job.pinned_nodes) {
      std::vector<int> busy;
      bool invalid = false;
      for (int n : *job.pinned_nodes) {
        if (n < 0 || n >= pool.size()) {
          invalid = true;
          break;
        }
        if (!pool.is_free(n)) busy.push_back(n);
      }
      if (invalid) {
        out.rejected.push_back({job.job_id, "pinned node outside the system"});
        continue;
      }
      if (!busy.empty()) {
        out.conflicts.push_back({job.job_id, now, std::move(busy)});
        kept.push_back(e);
        continue;
      }
      pool.allocate_exact(job.job_id, *job.pinned_nodes);
      out.allocations.push_back({job.job_id, now, pool.nodes_of(job.job_id), &job});
      continue;
    }

    if (pool.free_count() >= job.node_count) {
      auto nodes = pool.allocate_lowest(job.job_id, job.node_count);
      out.allocations.push_back({job.job_id, now, std::move(nodes), &job});
    } else {
      kept.push_back(e);
      if (queue.policy() != SchedulingPolicy::Replay) blocked = true;
    }
  }
  entries = std::move(kept);
  return out;
}

}  // namespace dtwin
