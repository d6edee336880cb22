#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "demotesim/config.hpp"
#include "demotesim/rng.hpp"

namespace dsim {

using VirtAddr = uint64_t;
using PhysAddr = uint64_t;

constexpr uint64_t kPageSize = 4096;
constexpr uint64_t kVaBits = 56;
constexpr uint64_t kVaMask = (1ULL << kVaBits) - 1;
constexpr int kLevels = 5;  // PGD, P4D, PUD, PMD, PT

// Five 9-bit indices (PGD..PT) plus the 12-bit page offset. Input addresses
// are truncated to the 56-bit space first.
struct VaParts {
  std::array<uint16_t, kLevels> idx;  // [0]=PGD .. [4]=PT
  uint16_t offset;
};

VaParts decompose_va(VirtAddr va);
VirtAddr recompose_va(const VaParts& p);

struct PageBits {
  bool present = true;
  bool user = true;
  bool dirty = true;
  bool nx = true;
  bool accessed = true;
  MemType memtype = MemType::WriteBack;
};

struct PtEntry;
struct PtNode {
  std::array<PtEntry, 512> slot;
};

struct PtEntry {
  bool exists = false;     // slot populated at all
  bool present = false;    // P bit
  bool accessed = false;   // A bit
  bool user = false;
  bool dirty = false;
  bool nx = false;
  MemType memtype = MemType::WriteBack;
  uint64_t frame = 0;                // leaf only
  std::unique_ptr<PtNode> child;     // intermediate only
};

class AddressSpace {
 public:
  AddressSpace(uint64_t frame_seed, VirtAddr kernel_start, VirtAddr kernel_end);

  // Creates 4 KiB leaves over [va_start, va_start+length) with the given
  // bits; intermediates are created present with A=1. Conflicting remap of an
  // existing leaf with different bits throws.
  void map_region(VirtAddr va_start, uint64_t length, const PageBits& bits);

  // Maps with a caller-chosen frame (used by congruence-controlled tests).
  void map_page_frame(VirtAddr va, const PageBits& bits, uint64_t frame);

  // Creates present intermediate entries down to `depth` levels
  // (1=PGD only .. 4=through PMD) and stops; no leaf is created. The walk
  // for such an address aborts at level `depth`.
  void map_prefix(VirtAddr va, int depth);

  void unmap_all();

  const PtEntry* leaf(VirtAddr va) const;
  bool in_kernel_region(VirtAddr va) const;
  VirtAddr kernel_start() const { return kernel_start_; }
  VirtAddr kernel_end() const { return kernel_end_; }

  uint64_t fresh_frame();
  // Random frame whose physical address matches `want_pa` on bits [16:6]
  // and hashes to the same slice under `slice_fn`.
  template <class SliceFn>
  uint64_t congruent_frame(PhysAddr want_pa, SliceFn&& slice_fn) {
    uint32_t want_slice = slice_fn(want_pa);
    for (;;) {
      uint64_t f = (frame_rng_.next() & 0xFFFFFFFFFULL) | 0x1000000ULL;
      uint64_t pa = (f << 12) | (want_pa & 0xFC0);
      pa = (pa & ~0x1F000ULL) | (want_pa & 0x1F000ULL);  // match pa[16:12]
      if (slice_fn(pa) == want_slice && claim_frame(pa >> 12)) return pa >> 12;
    }
  }

  const PtNode* root() const { return root_.get(); }
  PtNode* root() { return root_.get(); }

 private:
  friend class TlbState;
  bool claim_frame(uint64_t frame);
  PtEntry& descend_create(VirtAddr va, int depth);

  std::unique_ptr<PtNode> root_;
  std::vector<uint64_t> used_frames_;  // sorted for binary search
  Rng frame_rng_;
  VirtAddr kernel_start_, kernel_end_;
};

// One translation event: page walk bookkeeping plus the classification the
// latency model needs.
struct TranslationOutcome {
  bool store_kind = false;
  bool tlb_hit = false;
  WalkStart walk_start = WalkStart::None;  // first walk's start level
  int walks_performed = 0;
  bool backed = false;  // leaf present
  uint64_t frame = 0;
  bool leaf_exists = false;
  PageBits leaf_bits{};   // valid when leaf_exists
  bool a_path = true;     // every existing traversed entry had A=1
  bool kernel = false;
  double latency_contrib = 0;  // walk ladder cycles, informational
  TlbClass cls() const;
};

struct TlbEntry {
  uint64_t vpage = 0;
  uint64_t frame = 0;
  bool backed = false;
  bool valid = false;
  uint64_t lru = 0;
};

struct PscEntry {
  uint64_t key = 0;
  bool valid = false;
  uint64_t lru = 0;
};

// Split data TLBs (load/store) plus per-level paging-structure caches.
class TlbState {
 public:
  TlbState(uint32_t tlb_entries, uint32_t psc_entries,
           const std::array<double, 5>& ladder);

  TranslationOutcome translate(AddressSpace& space, bool store_kind,
                               VirtAddr va, bool set_a_bits);
  void flush();

  bool load_tlb_has(VirtAddr va) const { return find(load_, va >> 12) >= 0; }
  bool store_tlb_has(VirtAddr va) const { return find(store_, va >> 12) >= 0; }

 private:
  struct WalkResult {
    WalkStart start;
    bool reached_leaf;
    const PtEntry* leaf;
    bool a_ok;
  };

  WalkResult walk(AddressSpace& space, VirtAddr va, bool set_a_bits);
  int find(const std::vector<TlbEntry>& t, uint64_t vpage) const;
  void insert(std::vector<TlbEntry>& t, uint64_t vpage, uint64_t frame, bool backed);
  void psc_fill(int level, uint64_t key);
  bool psc_has(int level, uint64_t key) const;

  std::vector<TlbEntry> load_, store_;
  std::array<std::vector<PscEntry>, 4> psc_;  // PGD..PMD level caches
  std::array<double, 5> ladder_;
  uint64_t tick_ = 0;
};

}  // namespace dsim
