#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "demotesim/cache.hpp"
#include "demotesim/config.hpp"
#include "demotesim/rng.hpp"
#include "demotesim/vm.hpp"

namespace dsim {

enum class Op : uint8_t { Load, Store, Clflush, Cldemote, Prefetch, Movnt, Fence };

struct Instr {
  Op op;
  VirtAddr va = 0;
};

struct ThreadId {
  uint32_t core = 0;  // physical core; siblings share caches and TLBs
  uint32_t smt = 0;
};

enum class LatencyContext : uint8_t { CacheProbe, TlbProbe, PageLevel };

struct PageFault {
  VirtAddr va;
  Op op;
};

struct ExecResult {
  uint64_t latency = 0;  // integer cycles, noise applied, floor 1
  std::optional<PageFault> fault;
  HitLevel level = HitLevel::Memory;  // pre-execution residency for cache ops
};

struct PerfCounters {
  uint64_t dtlb_load_walk_completed = 0;
  uint64_t dtlb_store_walk_completed = 0;
};

// One deterministic machine: address space, per-core TLBs, cache hierarchy,
// latency model, counters. Single-owner; run one instance per worker.
class Machine {
 public:
  explicit Machine(const MachineConfig& cfg);

  ExecResult execute(ThreadId t, Instr in);
  // Timed execution with serialization semantics (no reordering modeled).
  uint64_t measure(ThreadId t, Instr in) { return execute(t, in).latency; }

  AddressSpace& space() { return space_; }
  CacheHierarchy& caches() { return caches_; }
  TlbState& tlb(uint32_t core) { return tlb_[core]; }
  void flush_tlbs();  // all cores, TLBs and paging-structure caches

  const PerfCounters& counters(uint32_t core) const { return counters_[core]; }
  PerfCounters counters_total() const;

  void set_context(LatencyContext c) { context_ = c; }
  LatencyContext context() const { return context_; }

  const MachineConfig& config() const { return cfg_; }
  const LatencyProfile& profile() const { return cfg_.profile; }
  Rng& rng() { return rng_; }

  uint64_t faults_seen() const { return faults_; }
  uint64_t cycles_accumulated() const { return cycles_; }
  void add_cycles(uint64_t c) { cycles_ += c; ops_ += 0; }
  uint64_t ops_executed() const { return ops_; }
  uint16_t cores_used() const { return cores_used_; }

  // Translate a VA for setup purposes without latency/counter effects.
  std::optional<PhysAddr> translate_quiet(VirtAddr va);

  uint64_t sample_latency(double mean);  // mean + N(0, sigma), floor 1

 private:
  uint64_t finalize_cldemote_latency(double mean);
  TlbClass classify(const TranslationOutcome& tr) const;
  double tlb_probe_mean(const TranslationOutcome& tr, bool is_cldemote) const;

  MachineConfig cfg_;
  AddressSpace space_;
  std::vector<TlbState> tlb_;
  CacheHierarchy caches_;
  std::vector<PerfCounters> counters_;
  Rng rng_;
  LatencyContext context_ = LatencyContext::CacheProbe;
  uint64_t faults_ = 0;
  uint64_t cycles_ = 0;
  uint64_t ops_ = 0;
  uint16_t cores_used_ = 0;
};

}  // namespace dsim
