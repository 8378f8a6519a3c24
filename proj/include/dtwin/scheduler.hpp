#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtwin/config.hpp"
#include "dtwin/workload.hpp"

namespace dtwin {

class SchedulerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kFreeNode = -1;

class NodePool {
 public:
  explicit NodePool(int size);

  int size() const { return static_cast<int>(owner_.size()); }
  int free_count() const { return free_count_; }
  bool is_free(int node) const { return owner_.at(node) == kFreeNode; }
  /// kFreeNode when the node is idle.
  std::int64_t owner(int node) const { return owner_.at(node); }
  bool holds(std::int64_t job_id) const { return held_.count(job_id) != 0; }
  const std::vector<int>& nodes_of(std::int64_t job_id) const;

  /// Takes the `count` lowest-numbered free nodes.
  std::vector<int> allocate_lowest(std::int64_t job_id, int count);
  /// Takes exactly `nodes`; every one must be free.
  void allocate_exact(std::int64_t job_id, const std::vector<int>& nodes);
  /// Frees every node of `job_id` and returns them. Throws on unknown ids.
  std::vector<int> release(std::int64_t job_id);

  bool operator==(const NodePool& other) const {
    return owner_ == other.owner_ && free_count_ == other.free_count_;
  }

 private:
  std::vector<std::int64_t> owner_;
  std::unordered_map<std::int64_t, std::vector<int>> held_;
  int free_count_ = 0;
};

struct PendingEntry {
  const Job* job = nullptr;
  double enqueue_time = 0.0;
  std::uint64_t seq = 0;
};

/// Jobs waiting for nodes, kept sorted by the policy comparator. Entries hold
/// pointers; the referenced jobs must outlive the queue.
class PendingQueue {
 public:
  explicit PendingQueue(SchedulingPolicy policy = SchedulingPolicy::Fcfs) : policy_(policy) {}

  void push(const Job& job, double now);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<PendingEntry>& entries() const { return entries_; }
  SchedulingPolicy policy() const { return policy_; }

  bool precedes(const PendingEntry& a, const PendingEntry& b) const;

 private:
  friend struct ScheduleAccess;
  SchedulingPolicy policy_;
  std::vector<PendingEntry> entries_;
  std::uint64_t next_seq_ = 0;
};

struct Allocation {
  std::int64_t job_id = 0;
  double start_time = 0.0;
  std::vector<int> nodes;
  const Job* job = nullptr;
};

struct Rejection {
  std::int64_t job_id = 0;
  std::string reason;
};

/// A replay job whose pinned nodes were busy when it became eligible.
struct ReplayConflict {
  std::int64_t job_id = 0;
  double time = 0.0;
  std::vector<int> busy_nodes;
};

struct ScheduleOutcome {
  std::vector<Allocation> allocations;
  std::vector<Rejection> rejected;
  std::vector<ReplayConflict> conflicts;
};

/// FCFS and SJF walk the queue in policy order and stop at the first job that
/// does not fit. REPLAY places each job on its pinned nodes independently.
ScheduleOutcome schedule_jobs(PendingQueue& queue, NodePool& pool, double now);

}  // namespace dtwin
