#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "cascade/word.hpp"

namespace cascade {

// Object layout: word0 = header (class id in the low 32 bits, format and
// forwarding flags above), word1 = slot count (pointer objects) or byte
// length (byte objects), then the body.
inline constexpr Word kClassIdMask = 0xffffffffu;
inline constexpr Word kBytesFormatBit = Word{1} << 32;
inline constexpr Word kForwardedBit = Word{1} << 63;
inline constexpr std::size_t kHeaderWords = 2;

struct CollectStats {
    std::size_t live_bytes = 0;
    std::size_t forwarded_count = 0;
};

class Heap {
public:
    static constexpr std::size_t kDefaultSemispaceBytes = 8u << 20;

    explicit Heap(std::size_t semispace_bytes = kDefaultSemispaceBytes);
    Heap(const Heap&) = delete;
    Heap& operator=(const Heap&) = delete;

    /// Pointer object with every slot set to nil. Collects once when the
    /// active space is exhausted; throws OutOfMemory if that is not enough.
    Oop allocate(Word class_id, Word n_slots);
    Oop allocate_bytes(Word class_id, std::string_view bytes);
    /// Never-moving object outside the semispaces. Must not reference
    /// movable objects.
    Oop allocate_static(Word class_id, Word n_slots);

    CollectStats collect();

    using RootVisitor = std::function<void(Word&)>;
    using RootSource = std::function<void(const RootVisitor&)>;
    /// Register a word that is always a root.
    void add_root(Word* cell) { root_cells_.push_back(cell); }
    void remove_root(Word* cell);
    /// Register a callback that enumerates a changing set of roots.
    int add_root_source(RootSource source);
    void remove_root_source(int id);

    /// Collect before every allocation.
    void set_torture(bool on) { torture_ = on; }
    bool torture() const { return torture_; }

    Oop nil() const { return nil_; }
    bool in_active(Word bits) const;
    bool is_movable(Oop o) const { return o.is_reference() && in_active(o.bits()); }
    std::size_t used_bytes() const { return static_cast<std::size_t>(top_ - active_) * kWordBytes; }
    std::size_t semispace_bytes() const { return space_words_ * kWordBytes; }
    std::uint64_t collections() const { return collections_; }
    std::uint64_t allocations() const { return allocations_; }

    /// Visit every object in the active space in address order.
    void walk(const std::function<void(Oop)>& visit) const;

    // Object accessors.
    static Word class_id_of(Oop o) { return o.address()[0] & kClassIdMask; }
    static bool is_bytes(Oop o) { return (o.address()[0] & kBytesFormatBit) != 0; }
    static Word slot_count(Oop o) { return o.address()[1]; }
    static Word& slot(Oop o, std::size_t i) { return o.address()[kHeaderWords + i]; }
    static std::string_view bytes_of(Oop o);
    static std::size_t object_words(Oop o);

private:
    Word* reserve(std::size_t words);
    void forward(Word& cell, Word*& free, CollectStats& stats);

    std::size_t space_words_;
    std::unique_ptr<Word[]> spaces_[2];
    Word* active_ = nullptr;
    Word* top_ = nullptr;
    Word* limit_ = nullptr;
    int active_index_ = 0;
    bool collecting_ = false;
    bool torture_ = false;
    std::uint64_t collections_ = 0;
    std::uint64_t allocations_ = 0;
    std::vector<Word*> root_cells_;
    std::vector<std::pair<int, RootSource>> root_sources_;
    int next_source_id_ = 0;
    std::vector<std::unique_ptr<Word[]>> static_chunks_;
    Oop nil_;
};

}  // namespace cascade
