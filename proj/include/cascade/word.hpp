#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <string_view>

namespace cascade {

/// A machine word. Slang sees every value as one of these.
using Word = std::uint64_t;
using SignedWord = std::int64_t;

inline constexpr int kWordBytes = 8;

/// Tagged object pointer. Bit 0 set: immediate small integer held in the
/// upper 63 bits. Bit 0 clear: 8-byte aligned heap reference.
class Oop {
public:
    static constexpr SignedWord kMinSmallInt = -(SignedWord{1} << 62);
    static constexpr SignedWord kMaxSmallInt = (SignedWord{1} << 62) - 1;

    constexpr Oop() = default;
    static constexpr Oop from_bits(Word bits) { return Oop(bits); }
    static constexpr Oop from_int(SignedWord value) {
        return Oop((static_cast<Word>(value) << 1) | 1u);
    }
    static Oop from_address(const void* address) {
        return Oop(reinterpret_cast<Word>(address));
    }

    static constexpr bool fits_small_int(SignedWord value) {
        return value >= kMinSmallInt && value <= kMaxSmallInt;
    }

    constexpr Word bits() const { return bits_; }
    constexpr bool is_small_int() const { return (bits_ & 1u) != 0; }
    constexpr bool is_reference() const { return (bits_ & 1u) == 0; }
    constexpr SignedWord to_int() const { return static_cast<SignedWord>(bits_) >> 1; }
    Word* address() const { return reinterpret_cast<Word*>(bits_); }

    friend constexpr bool operator==(Oop, Oop) = default;

private:
    constexpr explicit Oop(Word bits) : bits_(bits) {}
    Word bits_ = 0;
};

/// Tag a raw word as a small integer. Bit 63 of the word is lost.
constexpr Word tag_int(Word raw) { return (raw << 1) | 1u; }
/// Arithmetic untag of a small-integer Oop.
constexpr Word untag_int(Word oop) {
    return static_cast<Word>(static_cast<SignedWord>(oop) >> 1);
}

/// Word-sized id of a symbol literal. FNV-1a folded into the small-integer
/// range so the id survives tagging.
constexpr Word symbol_id(std::string_view name) {
    Word hash = 14695981039346656037ull;
    for (unsigned char c : name) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash & ((Word{1} << 61) - 1);
}

}  // namespace cascade
