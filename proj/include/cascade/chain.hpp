#pragma once

#include <any>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/reachability.hpp"

namespace cascade {

/// Representations a compilation stage consumes or produces.
enum class ReprKind { Source, Ast, TypedAst, Tac, Ssa, Native };

std::string_view repr_name(ReprKind kind);

struct Converter {
    std::string name;
    ReprKind input;
    ReprKind output;
    std::function<std::any(std::any)> apply;
};

/// An ordered pipeline of converters. Adjacent kinds must line up; the check
/// happens when the chain is built.
class ConverterChain {
public:
    ConverterChain() = default;
    explicit ConverterChain(std::vector<Converter> stages);

    void append(Converter stage);
    const std::vector<Converter>& stages() const { return stages_; }
    bool empty() const { return stages_.empty(); }

    /// Apply every stage in order. Failures are rethrown as StageError
    /// carrying the failing stage's name. An empty chain returns its input.
    std::any run(std::any input) const;

private:
    std::vector<Converter> stages_;
};

// Payloads: Source = SourceMethod, Ast/TypedAst = MethodNode,
// Tac/Ssa = ir::IrFunction.
Converter parse_stage();
Converter annotate_stage();
Converter lower_stage(const MethodTable& table);
Converter ssa_stage();

}  // namespace cascade
