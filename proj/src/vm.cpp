#include "demotesim/vm.hpp"

#include <algorithm>
#include <stdexcept>

namespace dsim {

VaParts decompose_va(VirtAddr va) {
  va &= kVaMask;
  VaParts p;
  p.idx[0] = static_cast<uint16_t>((va >> 48) & 0x1FF);  // PGD
  p.idx[1] = static_cast<uint16_t>((va >> 39) & 0x1FF);  // P4D
  p.idx[2] = static_cast<uint16_t>((va >> 30) & 0x1FF);  // PUD
  p.idx[3] = static_cast<uint16_t>((va >> 21) & 0x1FF);  // PMD
  p.idx[4] = static_cast<uint16_t>((va >> 12) & 0x1FF);  // PT
  p.offset = static_cast<uint16_t>(va & 0xFFF);
  return p;
}

VirtAddr recompose_va(const VaParts& p) {
  return (uint64_t(p.idx[0]) << 48) | (uint64_t(p.idx[1]) << 39) |
         (uint64_t(p.idx[2]) << 30) | (uint64_t(p.idx[3]) << 21) |
         (uint64_t(p.idx[4]) << 12) | p.offset;
}

AddressSpace::AddressSpace(uint64_t frame_seed, VirtAddr kernel_start, VirtAddr kernel_end)
    : root_(std::make_unique<PtNode>()),
      frame_rng_(frame_seed),
      kernel_start_(kernel_start & kVaMask),
      kernel_end_(kernel_end & kVaMask) {}

bool AddressSpace::in_kernel_region(VirtAddr va) const {
  va &= kVaMask;
  return va >= kernel_start_ && va < kernel_end_;
}

bool AddressSpace::claim_frame(uint64_t frame) {
  auto it = std::lower_bound(used_frames_.begin(), used_frames_.end(), frame);
  if (it != used_frames_.end() && *it == frame) return false;
  used_frames_.insert(it, frame);
  return true;
}

uint64_t AddressSpace::fresh_frame() {
  for (;;) {
    uint64_t f = (frame_rng_.next() & 0xFFFFFFFFFULL) | 0x1000000ULL;
    if (claim_frame(f)) return f;
  }
}

PtEntry& AddressSpace::descend_create(VirtAddr va, int depth) {
  VaParts p = decompose_va(va);
  PtNode* node = root_.get();
  for (int lvl = 0;; ++lvl) {
    PtEntry& e = node->slot[p.idx[lvl]];
    if (lvl == depth) return e;
    if (!e.exists) {
      e.exists = true;
      e.present = true;
      e.accessed = true;
      e.user = true;
      e.child = std::make_unique<PtNode>();
    } else if (!e.child) {
      throw std::runtime_error("mapping conflict: leaf present where a table is needed");
    }
    node = e.child.get();
  }
}

void AddressSpace::map_page_frame(VirtAddr va, const PageBits& bits, uint64_t frame) {
  PtEntry& leaf = descend_create(va, 4);
  if (leaf.exists) {
    bool same = leaf.present == bits.present && leaf.user == bits.user &&
                leaf.dirty == bits.dirty && leaf.nx == bits.nx &&
                leaf.accessed == bits.accessed && leaf.memtype == bits.memtype;
    if (!same) throw std::runtime_error("mapping conflict: differently-typed remap");
    return;
  }
  leaf.exists = true;
  leaf.present = bits.present;
  leaf.user = bits.user;
  leaf.dirty = bits.dirty;
  leaf.nx = bits.nx;
  leaf.accessed = bits.accessed;
  leaf.memtype = bits.memtype;
  leaf.frame = frame;
}

void AddressSpace::map_region(VirtAddr va_start, uint64_t length, const PageBits& bits) {
  if (va_start & (kPageSize - 1)) throw std::runtime_error("map_region: start not page-aligned");
  for (uint64_t off = 0; off < length; off += kPageSize) {
    map_page_frame(va_start + off, bits, fresh_frame());
  }
}

void AddressSpace::map_prefix(VirtAddr va, int depth) {
  if (depth < 1 || depth > 4) throw std::runtime_error("map_prefix: depth must be 1..4");
  descend_create(va, depth);  // creates intermediates above, leaves slot empty
}

void AddressSpace::unmap_all() { root_ = std::make_unique<PtNode>(); }

const PtEntry* AddressSpace::leaf(VirtAddr va) const {
  VaParts p = decompose_va(va);
  const PtNode* node = root_.get();
  for (int lvl = 0; lvl < 4; ++lvl) {
    const PtEntry& e = node->slot[p.idx[lvl]];
    if (!e.exists || !e.present || !e.child) return nullptr;
    node = e.child.get();
  }
  const PtEntry& e = node->slot[p.idx[4]];
  return e.exists ? &e : nullptr;
}

TlbClass TranslationOutcome::cls() const {
  bool p = leaf_exists && leaf_bits.present;
  bool a = leaf_exists ? (leaf_bits.accessed && a_path) : true;
  bool u = leaf_exists ? leaf_bits.user : !kernel;
  MemType mt = leaf_exists ? leaf_bits.memtype : MemType::WriteBack;
  if (p) {
    if (!a) return TlbClass::P1A0Wb;
    if (!u) return TlbClass::P1U0A1Wb;
    if (mt == MemType::WriteProtected) return TlbClass::P1U1A1Wp;
    if (mt == MemType::Uncacheable) return TlbClass::P1U1A1Uc;
    return TlbClass::P1U1A1Wb;
  }
  if (!a) return TlbClass::P0A0Wb;
  return u ? TlbClass::P0U1A1Wb : TlbClass::P0U0A1Wb;
}

TlbState::TlbState(uint32_t tlb_entries, uint32_t psc_entries,
                   const std::array<double, 5>& ladder)
    : ladder_(ladder) {
  load_.resize(tlb_entries);
  store_.resize(tlb_entries);
  for (auto& p : psc_) p.resize(psc_entries);
}

void TlbState::flush() {
  for (auto& e : load_) e.valid = false;
  for (auto& e : store_) e.valid = false;
  for (auto& lvl : psc_)
    for (auto& e : lvl) e.valid = false;
}

int TlbState::find(const std::vector<TlbEntry>& t, uint64_t vpage) const {
  for (size_t i = 0; i < t.size(); ++i)
    if (t[i].valid && t[i].vpage == vpage) return static_cast<int>(i);
  return -1;
}

void TlbState::insert(std::vector<TlbEntry>& t, uint64_t vpage, uint64_t frame, bool backed) {
  int idx = find(t, vpage);
  if (idx < 0) {
    size_t victim = 0;
    uint64_t best = UINT64_MAX;
    for (size_t i = 0; i < t.size(); ++i) {
      if (!t[i].valid) { victim = i; break; }
      if (t[i].lru < best) { best = t[i].lru; victim = i; }
    }
    idx = static_cast<int>(victim);
  }
  t[idx] = TlbEntry{vpage, frame, backed, true, ++tick_};
}

void TlbState::psc_fill(int level, uint64_t key) {
  auto& lvl = psc_[level];
  for (auto& e : lvl) {
    if (e.valid && e.key == key) { e.lru = ++tick_; return; }
  }
  size_t victim = 0;
  uint64_t best = UINT64_MAX;
  for (size_t i = 0; i < lvl.size(); ++i) {
    if (!lvl[i].valid) { victim = i; break; }
    if (lvl[i].lru < best) { best = lvl[i].lru; victim = i; }
  }
  lvl[victim] = PscEntry{key, true, ++tick_};
}

bool TlbState::psc_has(int level, uint64_t key) const {
  for (const auto& e : psc_[level])
    if (e.valid && e.key == key) return true;
  return false;
}

// The per-level caches hold partial translations: level 0 caches the PGD
// entry keyed by va[55:48], level 3 caches the PMD entry (the PT pointer)
// keyed by va[55:21]. A walk resumes below the deepest cached level.
static uint64_t psc_key(VirtAddr va, int level) {
  static constexpr int shift[4] = {48, 39, 30, 21};
  return (va & kVaMask) >> shift[level];
}

TlbState::WalkResult TlbState::walk(AddressSpace& space, VirtAddr va, bool set_a_bits) {
  VaParts p = decompose_va(va);
  int start_level = 0;
  for (int lvl = 3; lvl >= 0; --lvl) {
    if (psc_has(lvl, psc_key(va, lvl))) { start_level = lvl + 1; break; }
  }

  // Re-descend from the root to the start level's node (pointer chase the
  // PSC is modeled to have skipped), then walk from there.
  PtNode* node = space.root();
  for (int lvl = 0; lvl < start_level; ++lvl) {
    PtEntry& e = node->slot[p.idx[lvl]];
    node = e.child.get();  // PSC hit implies this path exists and is present
  }

  WalkResult r;
  r.start = static_cast<WalkStart>(start_level);
  r.reached_leaf = false;
  r.leaf = nullptr;
  r.a_ok = true;
  for (int lvl = start_level; lvl < kLevels; ++lvl) {
    PtEntry& e = node->slot[p.idx[lvl]];
    if (!e.exists) return r;
    if (set_a_bits) e.accessed = true;
    if (!e.accessed) r.a_ok = false;
    if (lvl == 4) {
      r.reached_leaf = true;
      r.leaf = &e;
      return r;
    }
    if (!e.present || !e.child) return r;
    psc_fill(lvl, psc_key(va, lvl));
    node = e.child.get();
  }
  return r;
}

TranslationOutcome TlbState::translate(AddressSpace& space, bool store_kind,
                                       VirtAddr va, bool set_a_bits) {
  TranslationOutcome out;
  out.store_kind = store_kind;
  out.kernel = space.in_kernel_region(va);
  uint64_t vpage = (va & kVaMask) >> 12;

  auto& tlb = store_kind ? store_ : load_;
  int idx = find(tlb, vpage);
  if (idx >= 0) {
    auto& e = tlb[idx];
    e.lru = ++tick_;
    out.tlb_hit = true;
    out.backed = e.backed;
    out.frame = e.frame;
    if (const PtEntry* leaf = space.leaf(va)) {
      out.leaf_exists = true;
      out.leaf_bits = PageBits{leaf->present, leaf->user, leaf->dirty,
                               leaf->nx, leaf->accessed, leaf->memtype};
    }
    return out;
  }

  WalkResult w = walk(space, va, set_a_bits);
  out.walk_start = w.start;
  out.walks_performed = 1;
  out.latency_contrib = ladder_[static_cast<int>(w.start)];
  out.a_path = w.a_ok;
  bool leaf_present = w.reached_leaf && w.leaf->present;
  if (w.reached_leaf) {
    out.leaf_exists = true;
    out.leaf_bits = PageBits{w.leaf->present, w.leaf->user, w.leaf->dirty,
                             w.leaf->nx, w.leaf->accessed, w.leaf->memtype};
    out.backed = leaf_present;
    out.frame = w.leaf->frame;
  }

  // Fill rules: the load TLB caches failed translations too; the store TLB
  // fills only for present leaves and retries the walk otherwise. No fill
  // unless every traversed existing entry has A=1.
  if (!store_kind) {
    if (w.a_ok) insert(load_, vpage, out.frame, leaf_present);
  } else {
    if (leaf_present) {
      if (w.a_ok) insert(store_, vpage, out.frame, true);
    } else {
      WalkResult second = walk(space, va, set_a_bits);
      (void)second;
      out.walks_performed = 2;
    }
  }
  return out;
}

}  // namespace dsim
