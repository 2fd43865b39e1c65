#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/ast.hpp"

namespace cascade {

/// Parse one method. The text starts with the message pattern; the class
/// name is carried over from `src`. When `src.selector` is non-empty it must
/// match the parsed pattern.
MethodNode parse_method(const SourceMethod& src);
MethodNode parse_method(std::string_view source, std::string_view class_name = "Slang");

/// Rewrite legacy inlined-C and string-typed pragma idioms into the
/// constructs the parser understands. Text outside those idioms is copied
/// byte for byte.
std::string purify(std::string_view source);

/// Assign a BasicType to every param and temp and mark signed operations.
MethodNode annotate_types(MethodNode method);

/// Render a method back to parseable source.
std::string print_method(const MethodNode& method);
std::string print_expr(const Expr& expr);

/// Split a `.slang` file into methods. Files either hold a single method or a
/// bundle where each method is introduced by a `ClassName>>selector` line.
std::vector<SourceMethod> split_source_bundle(std::string_view text,
                                              std::string_view default_class = "Slang");
std::vector<SourceMethod> load_source_file(const std::filesystem::path& path);

/// Convenience: purify, parse and annotate.
MethodNode compile_front(const SourceMethod& src);

}  // namespace cascade
