#include "cascade/heap.hpp"

#include <algorithm>
#include <cstring>

#include "cascade/errors.hpp"

namespace cascade {

namespace {
constexpr Word kNilClassId = 1;
}

Heap::Heap(std::size_t semispace_bytes) : space_words_(semispace_bytes / kWordBytes) {
    for (auto& s : spaces_) s = std::make_unique<Word[]>(space_words_);
    active_ = top_ = spaces_[0].get();
    limit_ = active_ + space_words_;
    nil_ = allocate_static(kNilClassId, 0);
}

bool Heap::in_active(Word bits) const {
    auto* p = reinterpret_cast<const Word*>(bits);
    return p >= active_ && p < top_;
}

void Heap::remove_root(Word* cell) {
    root_cells_.erase(std::remove(root_cells_.begin(), root_cells_.end(), cell), root_cells_.end());
}

int Heap::add_root_source(RootSource source) {
    int id = next_source_id_++;
    root_sources_.emplace_back(id, std::move(source));
    return id;
}

void Heap::remove_root_source(int id) {
    root_sources_.erase(std::remove_if(root_sources_.begin(), root_sources_.end(),
                                       [id](const auto& s) { return s.first == id; }),
                        root_sources_.end());
}

Word* Heap::reserve(std::size_t words) {
    if (words > space_words_) throw OutOfMemory(words * kWordBytes);
    if (torture_ && !collecting_) collect();
    if (static_cast<std::size_t>(limit_ - top_) < words) {
        collect();
        if (static_cast<std::size_t>(limit_ - top_) < words) throw OutOfMemory(words * kWordBytes);
    }
    Word* p = top_;
    top_ += words;
    ++allocations_;
    return p;
}

Oop Heap::allocate(Word class_id, Word n_slots) {
    if (n_slots > space_words_) throw OutOfMemory(n_slots * kWordBytes);
    Word* p = reserve(kHeaderWords + n_slots);
    p[0] = class_id & kClassIdMask;
    p[1] = n_slots;
    std::fill(p + kHeaderWords, p + kHeaderWords + n_slots, nil_.bits());
    return Oop::from_address(p);
}

Oop Heap::allocate_bytes(Word class_id, std::string_view bytes) {
    std::size_t body = (bytes.size() + kWordBytes - 1) / kWordBytes;
    Word* p = reserve(kHeaderWords + body);
    p[0] = (class_id & kClassIdMask) | kBytesFormatBit;
    p[1] = bytes.size();
    if (body) p[kHeaderWords + body - 1] = 0;
    std::memcpy(p + kHeaderWords, bytes.data(), bytes.size());
    return Oop::from_address(p);
}

Oop Heap::allocate_static(Word class_id, Word n_slots) {
    auto chunk = std::make_unique<Word[]>(kHeaderWords + n_slots);
    Word* p = chunk.get();
    p[0] = class_id & kClassIdMask;
    p[1] = n_slots;
    for (Word i = 0; i < n_slots; ++i) p[kHeaderWords + i] = nil_.bits();
    static_chunks_.push_back(std::move(chunk));
    return Oop::from_address(p);
}

std::string_view Heap::bytes_of(Oop o) {
    return {reinterpret_cast<const char*>(o.address() + kHeaderWords), static_cast<std::size_t>(o.address()[1])};
}

std::size_t Heap::object_words(Oop o) {
    const Word* p = o.address();
    if (p[0] & kBytesFormatBit) return kHeaderWords + (p[1] + kWordBytes - 1) / kWordBytes;
    return kHeaderWords + p[1];
}

void Heap::forward(Word& cell, Word*& free, CollectStats& stats) {
    Oop o = Oop::from_bits(cell);
    if (!o.is_reference() || !in_active(cell)) return;
    Word* old = o.address();
    if (old[0] & kForwardedBit) {
        cell = old[1];
        return;
    }
    std::size_t words = object_words(o);
    std::memcpy(free, old, words * kWordBytes);
    old[0] |= kForwardedBit;
    old[1] = reinterpret_cast<Word>(free);
    cell = old[1];
    free += words;
    stats.live_bytes += words * kWordBytes;
    ++stats.forwarded_count;
}

CollectStats Heap::collect() {
    if (collecting_) throw Error("collect() re-entered");
    collecting_ = true;
    CollectStats stats;
    Word* to = spaces_[1 - active_index_].get();
    Word* free = to;
    // in_active() must keep recognizing from-space addresses until the end.
    RootVisitor visit = [&](Word& cell) { forward(cell, free, stats); };
    for (Word* cell : root_cells_) visit(*cell);
    for (const auto& [id, source] : root_sources_) source(visit);
    for (Word* scan = to; scan < free;) {
        Oop o = Oop::from_address(scan);
        std::size_t words = object_words(o);
        if (!(scan[0] & kBytesFormatBit))
            for (Word i = 0; i < scan[1]; ++i) visit(scan[kHeaderWords + i]);
        scan += words;
    }
    active_index_ = 1 - active_index_;
    active_ = to;
    top_ = free;
    limit_ = active_ + space_words_;
    ++collections_;
    collecting_ = false;
    return stats;
}

void Heap::walk(const std::function<void(Oop)>& visit) const {
    for (Word* p = active_; p < top_;) {
        Oop o = Oop::from_address(p);
        visit(o);
        p += object_words(o);
    }
}

}  // namespace cascade
