#include "demotesim/exec.hpp"

#include <cmath>
#include <stdexcept>

namespace dsim {

namespace {
constexpr VirtAddr kKernelStart = 0xffffffff80000000ULL;
constexpr VirtAddr kKernelEnd = 0xffffffffc0000000ULL;
}  // namespace

Machine::Machine(const MachineConfig& cfg)
    : cfg_(cfg),
      space_(Rng(cfg.seed).stream("frames").next(), kKernelStart, kKernelEnd),
      caches_(cfg.hierarchy),
      rng_(Rng(cfg.seed).stream("latency")) {
  cfg_.validate();
  for (uint32_t c = 0; c < cfg_.hierarchy.cores; ++c) {
    tlb_.emplace_back(cfg_.tlb_entries, cfg_.psc_entries, cfg_.profile.walk_ladder);
    counters_.emplace_back();
  }
}

void Machine::flush_tlbs() {
  for (auto& t : tlb_) t.flush();
}

PerfCounters Machine::counters_total() const {
  PerfCounters sum;
  for (const auto& c : counters_) {
    sum.dtlb_load_walk_completed += c.dtlb_load_walk_completed;
    sum.dtlb_store_walk_completed += c.dtlb_store_walk_completed;
  }
  return sum;
}

std::optional<PhysAddr> Machine::translate_quiet(VirtAddr va) {
  const PtEntry* leaf = space_.leaf(va);
  if (!leaf || !leaf->present) return std::nullopt;
  return (leaf->frame << 12) | (va & 0xFFF);
}

uint64_t Machine::sample_latency(double mean) {
  double v = mean + rng_.gaussian(cfg_.profile.noise_sigma);
  int64_t cycles = static_cast<int64_t>(std::llround(v));
  return cycles < 1 ? 1 : static_cast<uint64_t>(cycles);
}

uint64_t Machine::finalize_cldemote_latency(double mean) {
  double v = mean + rng_.gaussian(cfg_.profile.noise_sigma);
  if (cfg_.cm.noise_injection)
    v += rng_.uniform01() * cfg_.cm.noise_amplitude;
  int64_t cycles = static_cast<int64_t>(std::llround(v));
  return cycles < 1 ? 1 : static_cast<uint64_t>(cycles);
}

// hit column on a TLB hit; a walk resuming at the PT level (the deepest
// paging-structure cache held the PMD entry) also lands in the hit column,
// shallower walks in the miss column.
double Machine::tlb_probe_mean(const TranslationOutcome& tr, bool is_cldemote) const {
  const auto& table = is_cldemote ? cfg_.profile.tlb_cldemote : cfg_.profile.tlb_prefetch;
  const ProbePair& p = table[static_cast<size_t>(tr.cls())];
  if (tr.tlb_hit) return p.hit;
  return tr.walk_start == WalkStart::FromPt ? p.hit : p.miss;
}

ExecResult Machine::execute(ThreadId t, Instr in) {
  if (t.core >= cfg_.hierarchy.cores) throw std::runtime_error("execute: bad core");
  cores_used_ |= static_cast<uint16_t>(1u << t.core);
  ++ops_;
  ExecResult r;
  const LatencyProfile& prof = cfg_.profile;

  auto note_walks = [&](const TranslationOutcome& tr) {
    auto& pc = counters_[t.core];
    if (tr.store_kind)
      pc.dtlb_store_walk_completed += tr.walks_performed;
    else
      pc.dtlb_load_walk_completed += tr.walks_performed;
  };

  switch (in.op) {
    case Op::Fence:
      r.latency = sample_latency(prof.fence_cost);
      break;

    case Op::Load:
    case Op::Store: {
      bool is_store = in.op == Op::Store;
      TranslationOutcome tr =
          tlb_[t.core].translate(space_, is_store, in.va, /*set_a_bits=*/true);
      note_walks(tr);
      bool priv_violation = tr.backed && tr.leaf_exists && !tr.leaf_bits.user;
      bool wp_violation = is_store && tr.backed && tr.leaf_exists &&
                          tr.leaf_bits.memtype == MemType::WriteProtected;
      if (!tr.backed || priv_violation || wp_violation) {
        r.fault = PageFault{in.va, in.op};
        ++faults_;
        r.latency = sample_latency(prof.load_memory);
        break;
      }
      PhysAddr pa = (tr.frame << 12) | (in.va & 0xFFF);
      if (tr.leaf_bits.memtype == MemType::Uncacheable) {
        r.level = HitLevel::Memory;
        r.latency = sample_latency(prof.load_memory);
        break;
      }
      r.level = caches_.load(t.core, pa, is_store);
      r.latency = sample_latency(prof.load_level(r.level));
      break;
    }

    case Op::Clflush: {
      TranslationOutcome tr =
          tlb_[t.core].translate(space_, /*store=*/false, in.va, /*set_a=*/false);
      note_walks(tr);
      if (tr.backed) {
        PhysAddr pa = (tr.frame << 12) | (in.va & 0xFFF);
        bool cached = caches_.locate(pa).anywhere();
        r.level = cached ? HitLevel::LLC : HitLevel::Memory;
        caches_.flush(pa);
        r.latency = sample_latency(cached ? prof.flush_cached : prof.flush_absent);
      } else {
        r.latency = sample_latency(prof.flush_absent);
      }
      break;
    }

    case Op::Cldemote: {
      if (cfg_.cm.privileged_only) {
        // user-mode cldemote becomes a fixed-latency nop: no TLB or cache
        // state transition
        r.latency = finalize_cldemote_latency(prof.nop_latency);
        break;
      }
      TranslationOutcome tr =
          tlb_[t.core].translate(space_, /*store=*/true, in.va, /*set_a=*/false);
      note_walks(tr);
      double mean;
      if (context_ == LatencyContext::TlbProbe) {
        mean = tlb_probe_mean(tr, /*is_cldemote=*/true);
      } else if (context_ == LatencyContext::PageLevel) {
        mean = tr.tlb_hit ? prof.walk_ladder[4]
                          : prof.walk_ladder[static_cast<int>(tr.walk_start)];
      } else {
        mean = prof.cldemote_absent;
        if (tr.backed) {
          PhysAddr pa = (tr.frame << 12) | (in.va & 0xFFF);
          LineState st = caches_.locate(pa);
          uint16_t me = static_cast<uint16_t>(1u << t.core);
          if ((st.l1d_mask | st.l1i_mask) & me) {
            mean = prof.cldemote_l1;
            r.level = HitLevel::L1;
          } else if (st.l2_mask & me) {
            mean = prof.cldemote_l2;
            r.level = HitLevel::L2;
          } else if (st.in_llc) {
            mean = prof.cldemote_llc;
            r.level = HitLevel::LLC;
          }
        }
      }
      if (tr.backed && tr.leaf_bits.memtype != MemType::Uncacheable) {
        PhysAddr pa = (tr.frame << 12) | (in.va & 0xFFF);
        caches_.demote(t.core, pa);
      }
      // P4: never faults, in all three permission-violating scenarios
      r.latency = finalize_cldemote_latency(mean);
      break;
    }

    case Op::Prefetch: {
      TranslationOutcome tr =
          tlb_[t.core].translate(space_, /*store=*/false, in.va, /*set_a=*/false);
      note_walks(tr);
      double mean;
      if (context_ == LatencyContext::TlbProbe) {
        mean = tlb_probe_mean(tr, /*is_cldemote=*/false);
      } else if (context_ == LatencyContext::PageLevel) {
        mean = tr.tlb_hit ? prof.page_prefetch_hit : prof.page_prefetch_cold;
      } else {
        mean = prof.prefetch_cost;
      }
      if (tr.backed && tr.leaf_bits.memtype != MemType::Uncacheable) {
        PhysAddr pa = (tr.frame << 12) | (in.va & 0xFFF);
        caches_.prefetch_fill(t.core, pa);
      }
      r.latency = sample_latency(mean);
      break;
    }

    case Op::Movnt: {
      TranslationOutcome tr =
          tlb_[t.core].translate(space_, /*store=*/true, in.va, /*set_a=*/true);
      note_walks(tr);
      bool writable = tr.backed && tr.leaf_exists && tr.leaf_bits.user &&
                      tr.leaf_bits.memtype != MemType::WriteProtected;
      if (!writable) {
        r.fault = PageFault{in.va, in.op};
        ++faults_;
        r.latency = sample_latency(prof.movnt_cost);
        break;
      }
      PhysAddr pa = (tr.frame << 12) | (in.va & 0xFFF);
      caches_.stream_store(t.core, pa);
      r.latency = sample_latency(prof.movnt_cost);
      break;
    }
  }
  cycles_ += r.latency;
  return r;
}

}  // namespace dsim
