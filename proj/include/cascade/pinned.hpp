#pragma once

#include <cstddef>

#include "cascade/word.hpp"

namespace cascade {

inline constexpr std::size_t kMaxPrimitiveArgs = 8;

/// The one fixed-address block every receiver/argument/result word crosses.
/// `stackAt: 0` is the receiver and `stackAt: k` is args[k-1], so the word
/// for index k sits at byte offset 8*k.
struct PinnedArgSlot {
    Word receiver = 0;
    Word args[kMaxPrimitiveArgs] = {};
    Word arg_count = 0;
    Word result = 0;
};

inline constexpr std::int32_t kPinnedReceiverOffset = offsetof(PinnedArgSlot, receiver);
inline constexpr std::int32_t kPinnedArgsOffset = offsetof(PinnedArgSlot, args);
inline constexpr std::int32_t kPinnedCountOffset = offsetof(PinnedArgSlot, arg_count);
inline constexpr std::int32_t kPinnedResultOffset = offsetof(PinnedArgSlot, result);

/// Status words returned by a native activation stub.
inline constexpr Word kNativeSuccess = 0;
inline constexpr Word kNativeFailure = 1;

// Symbols the generated code always refers to.
inline constexpr const char* kArgSlotSymbol = "argSlot";
inline constexpr const char* kPrimFailedSymbol = "primFailed";

}  // namespace cascade
