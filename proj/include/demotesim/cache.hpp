#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "demotesim/config.hpp"
#include "demotesim/vm.hpp"

namespace dsim {

struct CacheCoordinates {
  uint32_t offset;  // pa[5:0]
  uint32_t set;     // pa[16:6] under the default 2048-set geometry
  uint32_t slice;
  uint64_t tag;
};

enum class Coherence : uint8_t { M, E, S, I };

// Oracle view of a line, assembled by scanning the real structures.
struct LineState {
  uint16_t l1d_mask = 0;
  uint16_t l1i_mask = 0;
  uint16_t l2_mask = 0;
  bool in_llc = false;
  int llc_rank = -1;  // 0 = most recently used within its LLC set
  Coherence coherence = Coherence::I;
  bool dir_present = false;
  bool dir_private = false;
  uint16_t dir_owners = 0;
  bool anywhere() const { return l1d_mask || l1i_mask || l2_mask || in_llc; }
  bool in_private() const { return l1d_mask || l1i_mask || l2_mask; }
};

// Multi-core hierarchy: per-core L1d/L1i/L2 (L2 inclusive of L1), sliced
// non-inclusive LLC, and a per-slice coherence directory that is inclusive
// with respect to private caches. Plain loads fill private caches only; L2
// victims are installed into the LLC; directory conflicts displace private
// lines into the LLC.
class CacheHierarchy {
 public:
  explicit CacheHierarchy(const HierarchyConfig& geom);

  CacheCoordinates coords(PhysAddr pa) const;
  uint32_t slice_of(PhysAddr pa) const;

  HitLevel load(uint32_t core, PhysAddr pa, bool is_store = false);
  HitLevel fetch(uint32_t core, PhysAddr pa);  // instruction-side fill
  bool demote(uint32_t core, PhysAddr pa);     // true if a line moved
  void flush(PhysAddr pa);
  void stream_store(uint32_t core, PhysAddr pa);
  void prefetch_fill(uint32_t core, PhysAddr pa);

  LineState locate(PhysAddr pa) const;
  void reset();

  uint64_t writebacks() const { return writebacks_; }
  const HierarchyConfig& geom() const { return geom_; }

 private:
  struct Way {
    uint64_t line = 0;    // pa >> 6
    uint64_t lru = 0;
    Coherence coh = Coherence::I;
    bool dirty = false;
    bool valid = false;
  };
  struct DirWay {
    uint64_t line = 0;
    uint64_t lru = 0;
    uint16_t owners = 0;  // private owners bitmask; 0 => "llc" state
    bool valid = false;
  };
  struct Bank {            // one cache (all sets of one core/slice)
    std::vector<Way> ways; // sets * ways, row-major
    uint32_t sets, assoc;
  };

  Bank make_bank(const CacheGeom& g) const;
  Way* find(Bank& b, uint32_t set, uint64_t line);
  const Way* find(const Bank& b, uint32_t set, uint64_t line) const;
  void touch(Way& w) { w.lru = ++tick_; }

  // private-cache maintenance
  void l1_insert(Bank& l1, uint32_t set_l1, uint64_t line, Coherence coh, bool dirty);
  void l2_insert(uint32_t core, PhysAddr pa, Coherence coh, bool dirty);
  void private_drop(uint32_t core, uint64_t line);  // L1d+L1i+L2 of one core
  void back_invalidate(uint64_t line, PhysAddr pa, uint16_t owners);

  // LLC: insert-or-bump at MRU. Victim selection prefers lines that are
  // also private-resident (their data survives in a private cache), then
  // falls back to plain LRU.
  void llc_install(PhysAddr pa, Coherence coh, bool dirty);
  void llc_drop(PhysAddr pa);

  // directory
  DirWay* dir_find(PhysAddr pa);
  void dir_fill_update(uint32_t core, PhysAddr pa);
  void dir_on_l2_eviction(uint32_t core, uint64_t line, PhysAddr pa);
  void dir_evict_for(uint32_t requester, uint32_t slice, uint32_t set);

  bool private_resident(uint64_t line) const {
    auto it = l2_presence_.find(line);
    return it != l2_presence_.end() && it->second != 0;
  }
  uint16_t presence_mask(uint64_t line) const {
    auto it = l2_presence_.find(line);
    return it == l2_presence_.end() ? 0 : it->second;
  }
  void presence_add(uint32_t core, uint64_t line);
  void presence_remove(uint32_t core, uint64_t line);

  HierarchyConfig geom_;
  std::vector<Bank> l1d_, l1i_, l2_;  // per core
  std::vector<Bank> llc_;             // per slice
  std::vector<std::vector<DirWay>> dir_;  // per slice, sets*ways
  std::unordered_map<uint64_t, uint16_t> l2_presence_;  // line -> core mask
  uint64_t tick_ = 0;
  uint64_t writebacks_ = 0;
};

}  // namespace dsim
