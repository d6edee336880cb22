#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace dsim {

enum class MemType : uint8_t { WriteBack, WriteProtected, Uncacheable };

// Residency of a line at the moment an instruction executes.
enum class HitLevel : uint8_t { L1, L2, LLC, Remote, Memory };

// Page classes the TLB-probe latency table distinguishes. D and NX have no
// latency effect; memory type matters only on fully-set user pages.
enum class TlbClass : uint8_t {
  P1U1A1Wb,
  P1U0A1Wb,
  P1A0Wb,
  P0U1A1Wb,
  P0U0A1Wb,
  P0A0Wb,
  P1U1A1Wp,
  P1U1A1Uc,
  Count
};

enum class WalkStart : uint8_t { FromPgd, FromP4d, FromPud, FromPmd, FromPt, None };

enum class ProbeKind : uint8_t {
  FlushDemote,
  FlushReload,
  FlushFlush,
  StreamReload,
  DemoteTime
};

struct ProbePair {
  double hit;
  double miss;
};

// Mean-cycle tables. The simulator keeps three disjoint latency contexts,
// selected per experiment, because the measurements for one nominal
// operation differ across the source experiments:
//   cache-probe: per-level instruction costs plus per-primitive
//                measurement-step means,
//   tlb-probe:   per page-class costs for cldemote/prefetch,
//   page-level:  walk-start ladder for the page-table-level scan.
struct LatencyProfile {
  // cache-probe context
  double cldemote_l1 = 210, cldemote_l2 = 200, cldemote_llc = 132, cldemote_absent = 132;
  double load_l1 = 58, load_l2 = 80, load_llc = 140, load_remote = 190, load_memory = 308;
  double flush_cached = 213, flush_absent = 139;
  double prefetch_cost = 58, movnt_cost = 100, fence_cost = 20;
  // untimed reset step (fire-and-forget flush/movnt) in probe rounds
  double reset_cost = 100;

  // measurement-step means for the probe primitives
  ProbePair probe_stream_reload{61, 309};
  ProbePair probe_flush_reload{58, 308};
  ProbePair probe_flush_flush{213, 139};
  ProbePair probe_flush_demote{208, 121};

  // tlb-probe context, indexed by TlbClass
  std::array<ProbePair, static_cast<size_t>(TlbClass::Count)> tlb_cldemote{{
      {160, 180},  // P1U1A1 write-back
      {114, 136},  // P1U0A1 write-back
      {137, 136},  // P1 A0  write-back
      {139, 148},  // P0U1A1 write-back
      {138, 149},  // P0U0A1 write-back
      {148, 148},  // P0 A0  write-back
      {114, 137},  // P1U1A1 write-protected
      {115, 138},  // P1U1A1 uncacheable
  }};
  std::array<ProbePair, static_cast<size_t>(TlbClass::Count)> tlb_prefetch{{
      {113, 133},
      {112, 132},
      {132, 132.5},
      {115, 133},
      {115, 132},
      {132, 132},
      {113, 132},
      {113, 135},
  }};

  // page-level context: full cldemote cost by walk start level (PGD..PT)
  std::array<double, 5> walk_ladder{137, 131, 125, 119, 113};
  double page_prefetch_hit = 112, page_prefetch_cold = 133;

  // user-mode cldemote under the privileged-only countermeasure
  double nop_latency = 132;

  double noise_sigma = 6.0;

  double load_level(HitLevel l) const {
    switch (l) {
      case HitLevel::L1: return load_l1;
      case HitLevel::L2: return load_l2;
      case HitLevel::LLC: return load_llc;
      case HitLevel::Remote: return load_remote;
      case HitLevel::Memory: return load_memory;
    }
    return load_memory;
  }

  double cldemote_level(HitLevel l) const {
    switch (l) {
      case HitLevel::L1: return cldemote_l1;
      case HitLevel::L2: return cldemote_l2;
      case HitLevel::LLC: return cldemote_llc;
      default: return cldemote_absent;
    }
  }

  const ProbePair& probe_pair(ProbeKind k) const {
    switch (k) {
      case ProbeKind::StreamReload: return probe_stream_reload;
      case ProbeKind::FlushReload: return probe_flush_reload;
      case ProbeKind::FlushFlush: return probe_flush_flush;
      default: return probe_flush_demote;
    }
  }
};

struct CacheGeom {
  uint32_t sets;
  uint32_t ways;
};

struct HierarchyConfig {
  uint32_t cores = 12;  // physical cores == LLC/directory slices
  CacheGeom l1d{64, 12};
  CacheGeom l1i{64, 8};
  CacheGeom l2{2048, 16};
  CacheGeom llc{2048, 15};
  CacheGeom dir{2048, 25};
};

struct Countermeasures {
  bool noise_injection = false;
  double noise_amplitude = 64;
  bool privileged_only = false;
};

struct ChannelDefaults {
  uint64_t window = 700;       // cycles per bit
  uint64_t bits = 1000000;     // message length, balanced
  uint64_t sweep_bits = 20000; // bits per sweep point
  std::string primitive = "flush-demote";
};

struct KaslrDefaults {
  uint32_t trials = 1000;
  uint32_t reboots = 10;   // re-randomize every trials/reboots attempts
  uint32_t repeats = 100;  // consecutive cldemote per slot
  uint32_t kernel_slots = 22;
};

struct EvsetDefaults {
  uint32_t pool = 12288;
  uint32_t runs = 100;
  double helper_cost = 600;  // per-invocation helper-thread coordination
  uint32_t vote = 3;         // group-testing majority vote count
};

struct ReverseDefaults {
  uint32_t max_n = 40;
  uint32_t repeats = 100000;
  double step_min = 15;  // cycles; smallest mean jump treated as a breakpoint
  uint32_t runs = 1;
};

struct MachineConfig {
  HierarchyConfig hierarchy;
  LatencyProfile profile;
  Countermeasures cm;
  double clock_ghz = 2.0;
  uint32_t tlb_entries = 64;
  uint32_t psc_entries = 16;
  uint64_t seed = 1;
  uint64_t bench_samples = 100000;
  uint64_t algo1_iters = 100000;
  uint64_t table4_samples = 100000;
  uint64_t pagelevel_repeats = 100000;
  uint64_t calibrate_samples = 10000;
  double calibrate_min_gap_sigmas = 4.0;
  ChannelDefaults channel;
  KaslrDefaults kaslr;
  EvsetDefaults evset;
  ReverseDefaults reverse;
  bool parallel = true;
  uint32_t threads = 0;  // 0 = runtime default

  // Parse "a.b.c = value" lines over the defaults. Unknown keys are errors.
  static MachineConfig from_file(const std::string& path);
  static MachineConfig from_text(const std::string& text);
  void set(const std::string& key, const std::string& value);
  void validate() const;
  nlohmann::json echo() const;
};

ProbeKind probe_kind_from_string(const std::string& s);
const char* probe_kind_name(ProbeKind k);

}  // namespace dsim
