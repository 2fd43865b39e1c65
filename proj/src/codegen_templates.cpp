// Primitive templates: the fixed native sequences inlined for arithmetic,
// bit, comparison, memory and control selectors.

#include "cascade/codegen.hpp"
#include "cascade/errors.hpp"
#include "cascade/pinned.hpp"
#include "codegen_internal.hpp"

namespace cascade::codegen {

using namespace x64;

void load_loc(Assembler& as, Reg r, const Loc& loc) {
    switch (loc.kind) {
        case Loc::Kind::Slot: as.load(r, rbp, loc.offset); break;
        case Loc::Kind::Imm: as.mov_imm(r, loc.imm); break;
        case Loc::Kind::Sym: as.mov_abs(r, loc.sym); break;
    }
}

namespace {

void load_pair(Assembler& as, std::span<const Loc> ops) {
    load_loc(as, rax, ops[0]);
    load_loc(as, rcx, ops[1]);
}

TemplateEmitter alu(void (Assembler::*op)(Reg, Reg)) {
    return [op](Assembler& as, std::span<const Loc> ops, bool, Label) {
        load_pair(as, ops);
        (as.*op)(rax, rcx);
    };
}

TemplateEmitter division(bool want_remainder) {
    return [want_remainder](Assembler& as, std::span<const Loc> ops, bool is_signed, Label fail) {
        load_pair(as, ops);
        as.test(rcx, rcx);
        as.jcc(Cond::e, fail);
        if (!is_signed) {
            as.xor_(rdx, rdx);
            as.div(rcx);
            if (want_remainder) as.mov(rax, rdx);
            return;
        }
        // x / -1 is negation (and x % -1 is 0) without the INT64_MIN overflow trap.
        Label normal = as.new_label();
        Label done = as.new_label();
        as.cmp_imm(rcx, -1);
        as.jcc(Cond::ne, normal);
        if (want_remainder)
            as.xor_(rax, rax);
        else
            as.neg(rax);
        as.jmp(done);
        as.bind(normal);
        as.cqo();
        as.idiv(rcx);
        if (want_remainder) as.mov(rax, rdx);
        as.bind(done);
    };
}

TemplateEmitter compare(Cond unsigned_cond, Cond signed_cond, bool swap = false) {
    return [=](Assembler& as, std::span<const Loc> ops, bool is_signed, Label) {
        load_loc(as, rax, ops[swap ? 1 : 0]);
        load_loc(as, rcx, ops[swap ? 0 : 1]);
        as.cmp(rax, rcx);
        as.setcc(is_signed ? signed_cond : unsigned_cond, rax);
    };
}

void shift_right(Assembler& as, bool is_signed) {
    if (is_signed)
        as.sar_cl(rax);
    else
        as.shr_cl(rax);
}

void emit_bit_shift(Assembler& as, std::span<const Loc> ops, bool is_signed, Label) {
    load_loc(as, rax, ops[0]);
    if (ops[1].kind == Loc::Kind::Imm) {
        auto n = static_cast<SignedWord>(ops[1].imm);
        as.mov_imm(rcx, static_cast<Word>(n < 0 ? -n : n));
        if (n >= 0)
            as.shl_cl(rax);
        else
            shift_right(as, is_signed);
        return;
    }
    Label right = as.new_label();
    Label done = as.new_label();
    load_loc(as, rcx, ops[1]);
    as.test(rcx, rcx);
    as.jcc(Cond::l, right);
    as.shl_cl(rax);
    as.jmp(done);
    as.bind(right);
    as.neg(rcx);
    shift_right(as, is_signed);
    as.bind(done);
}

// Memory templates. Operand 0 is the receiver (self) and is not loaded.
void emit_fetch_pointer(Assembler& as, std::span<const Loc> ops, bool, Label) {
    load_loc(as, rcx, ops[1]);  // index
    load_loc(as, rax, ops[2]);  // object
    as.shl_imm(rcx, 3);
    as.add(rax, rcx);
    as.load(rax, rax, 16);
}

void emit_store_pointer(Assembler& as, std::span<const Loc> ops, bool, Label) {
    load_loc(as, rcx, ops[1]);
    load_loc(as, rdx, ops[2]);
    as.shl_imm(rcx, 3);
    as.add(rdx, rcx);
    load_loc(as, rax, ops[3]);
    as.store(rdx, 16, rax);
}

void emit_stack_at(Assembler& as, std::span<const Loc> ops, bool, Label fail) {
    load_loc(as, rax, ops.back());
    as.cmp_imm(rax, static_cast<std::int32_t>(kMaxPrimitiveArgs));
    as.jcc(Cond::a, fail);
    as.shl_imm(rax, 3);
    as.add(rax, rbx);
    as.load(rax, rax, 0);
}

void emit_condition(Assembler& as, std::span<const Loc> ops, bool, Label) {
    load_loc(as, rax, ops[0]);
    as.test(rax, rax);
}

PrimitiveTemplate value(std::string id, int n, TemplateEmitter e) {
    return PrimitiveTemplate{std::move(id), n, false, true, std::move(e)};
}

PrimitiveTemplate control(std::string id, int n) {
    return PrimitiveTemplate{std::move(id), n, true, false, emit_condition};
}

}  // namespace

const std::map<std::string, PrimitiveTemplate, std::less<>>& primitive_templates() {
    static const auto kTemplates = [] {
        std::map<std::string, PrimitiveTemplate, std::less<>> m;
        auto put = [&](PrimitiveTemplate t) {
            std::string id = t.id;
            m.emplace(std::move(id), std::move(t));
        };
        put(value("add", 2, alu(&Assembler::add)));
        put(value("sub", 2, alu(&Assembler::sub)));
        put(value("mul", 2, alu(&Assembler::imul)));
        put(value("div", 2, division(false)));
        put(value("mod", 2, division(true)));
        put(value("band", 2, alu(&Assembler::and_)));
        put(value("bor", 2, alu(&Assembler::or_)));
        put(value("bxor", 2, alu(&Assembler::xor_)));
        put(value("shl", 2, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_pair(as, ops);
            as.shl_cl(rax);
        }));
        put(value("shr", 2, [](Assembler& as, std::span<const Loc> ops, bool is_signed, Label) {
            load_pair(as, ops);
            shift_right(as, is_signed);
        }));
        put(value("bit_shift", 2, emit_bit_shift));
        put(value("cmp_eq", 2, compare(Cond::e, Cond::e)));
        put(value("cmp_ne", 2, compare(Cond::ne, Cond::ne)));
        put(value("cmp_lt", 2, compare(Cond::b, Cond::l)));
        put(value("cmp_le", 2, compare(Cond::be, Cond::le)));
        put(value("cmp_gt", 2, compare(Cond::b, Cond::l, true)));
        put(value("cmp_ge", 2, compare(Cond::be, Cond::le, true)));
        put(value("negated", 1, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rax, ops[0]);
            as.neg(rax);
        }));
        put(value("bit_invert", 1, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rax, ops[0]);
            as.mov_imm(rcx, ~Word{0});
            as.xor_(rax, rcx);
        }));
        put(value("load_word", 1, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rax, ops.back());
            as.load(rax, rax, 0);
        }));
        put(value("store_word", 2, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rcx, ops[0]);
            load_loc(as, rax, ops[1]);
            as.store(rcx, 0, rax);
        }));
        put(value("long_at", 2, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rax, ops[1]);
            as.load(rax, rax, 0);
        }));
        put(value("long_at_put", 3, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rcx, ops[1]);
            load_loc(as, rax, ops[2]);
            as.store(rcx, 0, rax);
        }));
        put(value("fetch_pointer", 3, emit_fetch_pointer));
        put(value("store_pointer", 4, emit_store_pointer));
        put(value("class_id", 2, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rax, ops[1]);
            as.load(rax, rax, 0);
            as.mov_imm(rcx, 0xffffffffu);
            as.and_(rax, rcx);
        }));
        put(value("slot_size", 2, [](Assembler& as, std::span<const Loc> ops, bool, Label) {
            load_loc(as, rax, ops[1]);
            as.load(rax, rax, 8);
        }));
        put(value("stack_at", 2, emit_stack_at));
        put(value("arg_slot_read", 1, emit_stack_at));
        put(control("if_true", 2));
        put(control("if_false", 2));
        put(control("if_true_if_false", 3));
        put(control("if_false_if_true", 3));
        put(control("while_true", 2));
        put(control("while_false", 2));
        put(control("while_true_unary", 1));
        put(control("while_false_unary", 1));
        put(control("to_do", 3));
        put(control("times_repeat", 2));
        put(control("and", 2));
        put(control("or", 2));
        put(control("if_stack_contains", 3));
        for (auto& [id, t] : m)
            if (!t.control && (id == "store_word" || id == "long_at_put" || id == "store_pointer")) t.produces_value = false;
        return m;
    }();
    return kTemplates;
}

const PrimitiveTemplate& find_template(std::string_view id) {
    const auto& all = primitive_templates();
    auto it = all.find(id);
    if (it == all.end()) throw Error("no primitive template '" + std::string(id) + "'");
    return it->second;
}

std::string template_for_selector(std::string_view selector) {
    static const std::map<std::string, std::string, std::less<>> kBySelector = {
        {"+", "add"}, {"-", "sub"}, {"*", "mul"}, {"/", "div"}, {"//", "div"}, {"\\\\", "mod"},
        {"negated", "negated"}, {"bitAnd:", "band"}, {"bitOr:", "bor"}, {"bitXor:", "bxor"},
        {"bitShift:", "bit_shift"}, {"<<", "shl"}, {">>", "shr"}, {"bitInvert", "bit_invert"},
        {"=", "cmp_eq"}, {"==", "cmp_eq"}, {"~=", "cmp_ne"}, {"<", "cmp_lt"}, {"<=", "cmp_le"},
        {">", "cmp_gt"}, {">=", "cmp_ge"}, {"longAt:", "long_at"}, {"longAt:put:", "long_at_put"},
        {"fetchPointer:ofObject:", "fetch_pointer"}, {"storePointer:ofObject:withValue:", "store_pointer"},
        {"classIdOf:", "class_id"}, {"slotSizeOf:", "slot_size"}, {"stackAt:", "stack_at"},
        {"ifTrue:", "if_true"}, {"ifFalse:", "if_false"}, {"ifTrue:ifFalse:", "if_true_if_false"},
        {"ifFalse:ifTrue:", "if_false_if_true"}, {"whileTrue:", "while_true"}, {"whileFalse:", "while_false"},
        {"whileTrue", "while_true_unary"}, {"whileFalse", "while_false_unary"}, {"to:do:", "to_do"},
        {"timesRepeat:", "times_repeat"}, {"and:", "and"}, {"or:", "or"},
        {"ifStackContains:do:", "if_stack_contains"},
    };
    auto it = kBySelector.find(selector);
    if (it == kBySelector.end()) throw UnknownSelector(std::string(selector), "");
    return it->second;
}

void emit_trap_tail(Assembler& as) {
    as.mov(rsp, r15);
    for (Reg r : {r15, r14, r13, r12, rbp, rbx}) as.pop(r);
    as.mov_imm(rax, kNativeFailure);
    as.ret();
}

NativeSequence inline_template(const PrimitiveTemplate& t, std::span<const Loc> operands, bool is_signed) {
    if (static_cast<int>(operands.size()) != t.operand_count)
        throw ArityMismatch("template " + t.id + " takes " + std::to_string(t.operand_count) + " operands, got " +
                            std::to_string(operands.size()));
    Assembler as;
    Label fail = as.new_label();
    t.emit(as, operands, is_signed, fail);
    Label done = as.new_label();
    as.jmp(done);
    as.bind(fail);
    emit_trap_tail(as);
    as.bind(done);
    as.finish();
    return NativeSequence{as.code(), as.listing(), as.relocations()};
}

SendKind classify_send(std::string_view selector, const MethodTable& table) {
    if (table.is_template(selector)) return SendKind{SendCategory::InlinedTemplate, template_for_selector(selector)};
    if (table.find_vm_function(selector)) return SendKind{SendCategory::VmFunctionCall, {}};
    if (table.find_method(selector)) return SendKind{SendCategory::InternalCall, {}};
    throw UnknownSelector(std::string(selector), "");
}

}  // namespace cascade::codegen
