#include "cascade/chain.hpp"

#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"
#include "cascade/ir.hpp"

namespace cascade {

std::string_view repr_name(ReprKind kind) {
    switch (kind) {
        case ReprKind::Source: return "source";
        case ReprKind::Ast: return "ast";
        case ReprKind::TypedAst: return "typed-ast";
        case ReprKind::Tac: return "tac";
        case ReprKind::Ssa: return "ssa";
        case ReprKind::Native: return "native";
    }
    return "?";
}

ConverterChain::ConverterChain(std::vector<Converter> stages) {
    for (auto& s : stages) append(std::move(s));
}

void ConverterChain::append(Converter stage) {
    if (!stages_.empty() && stages_.back().output != stage.input)
        throw StageError(stage.name, "expects " + std::string(repr_name(stage.input)) + " but " + stages_.back().name +
                                         " produces " + std::string(repr_name(stages_.back().output)));
    stages_.push_back(std::move(stage));
}

std::any ConverterChain::run(std::any input) const {
    for (const auto& stage : stages_) {
        try {
            input = stage.apply(std::move(input));
        } catch (const std::bad_any_cast&) {
            throw StageError(stage.name, "input is not a " + std::string(repr_name(stage.input)), std::current_exception());
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage.name, e.what(), std::current_exception());
        }
    }
    return input;
}

Converter parse_stage() {
    return {"parse", ReprKind::Source, ReprKind::Ast, [](std::any in) -> std::any {
                auto src = std::any_cast<SourceMethod>(std::move(in));
                src.source = purify(src.source);
                return parse_method(src);
            }};
}

Converter annotate_stage() {
    return {"annotate", ReprKind::Ast, ReprKind::TypedAst, [](std::any in) -> std::any {
                return annotate_types(std::any_cast<MethodNode>(std::move(in)));
            }};
}

Converter lower_stage(const MethodTable& table) {
    return {"lower", ReprKind::TypedAst, ReprKind::Tac, [&table](std::any in) -> std::any {
                return ir::lower(std::any_cast<const MethodNode&>(in), table);
            }};
}

Converter ssa_stage() {
    return {"ssa", ReprKind::Tac, ReprKind::Ssa, [](std::any in) -> std::any {
                return ir::to_ssa(std::any_cast<ir::IrFunction>(std::move(in)));
            }};
}

}  // namespace cascade
