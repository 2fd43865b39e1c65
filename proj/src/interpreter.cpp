#include "interpreter.hpp"

#include <algorithm>

#include "cascade/errors.hpp"
#include "cascade/ir.hpp"
#include "cascade/reachability.hpp"
#include "cascade/vm.hpp"

namespace cascade {

namespace {

struct BinaryOp {
    ir::Op op;
    bool swap;
};

const std::map<std::string, BinaryOp, std::less<>>& binary_ops() {
    using ir::Op;
    static const std::map<std::string, BinaryOp, std::less<>> kTable = {
        {"+", {Op::add, false}},        {"-", {Op::sub, false}},       {"*", {Op::mul, false}},
        {"/", {Op::div, false}},        {"//", {Op::div, false}},      {"\\\\", {Op::mod, false}},
        {"bitAnd:", {Op::band, false}}, {"bitOr:", {Op::bor, false}},  {"bitXor:", {Op::bxor, false}},
        {"<<", {Op::shl, false}},       {">>", {Op::shr, false}},      {"=", {Op::cmp_eq, false}},
        {"==", {Op::cmp_eq, false}},    {"<", {Op::cmp_lt, false}},    {"<=", {Op::cmp_le, false}},
        {">", {Op::cmp_lt, true}},      {">=", {Op::cmp_le, true}},
    };
    return kTable;
}

Word load(Word address) { return *reinterpret_cast<const Word*>(address); }
void store(Word address, Word value) { *reinterpret_cast<Word*>(address) = value; }

const BlockExpr& block_arg(const Expr& e, std::size_t params, const std::string& selector) {
    const auto* b = e.as<BlockExpr>();
    if (b == nullptr) throw BlockMisuse("#" + selector + " needs a literal block argument");
    if (b->params.size() != params)
        throw BlockMisuse("#" + selector + " block takes " + std::to_string(params) + " parameters");
    return *b;
}

bool is_oop(const MethodNode& m, std::string_view name) { return m.var_info(name).type == BasicType::OopRef; }

}  // namespace

std::size_t Interpreter::max_depth() const { return std::min<std::size_t>(vm_.options().interp.max_depth, kMaxDepth); }

void Interpreter::tick() {
    if (++steps_ > vm_.options().interp.step_budget) throw StepBudgetExceeded(vm_.options().interp.step_budget);
}

void Interpreter::visit_roots(const Heap::RootVisitor& visit) {
    for (Frame* f : frames_) {
        visit(f->receiver);
        for (auto& v : f->vars)
            if (v.oop) visit(v.value);
        if (f->returning) visit(f->result);
    }
}

Word Interpreter::invoke(const MethodNode& m, Word receiver, std::span<const Word> args, const MethodMap* scope) {
    if (frames_.empty()) steps_ = 0;
    if (frames_.size() >= max_depth()) throw StackDepthExceeded(max_depth());
    if (args.size() != m.params.size())
        throw ArityMismatch("#" + m.selector + " takes " + std::to_string(m.params.size()) + " arguments");
    Frame f;
    f.method = &m;
    f.receiver = receiver;
    f.scope = scope;
    f.vars.reserve(m.params.size() + m.temps.size() + 4);
    for (std::size_t i = 0; i < args.size(); ++i) f.vars.push_back({m.params[i], args[i], is_oop(m, m.params[i])});
    for (const auto& t : m.temps) f.vars.push_back({t, 0, is_oop(m, t)});

    frames_.push_back(&f);
    vm_.push_frame(m.selector);
    struct Pop {
        Interpreter& self;
        ~Pop() {
            self.frames_.pop_back();
            self.vm_.pop_frame();
        }
    } pop{*this};

    auto value = statements(f, m.body);
    return value ? f.receiver : f.result;
}

Word Interpreter::send(std::string_view selector, Word receiver, std::span<const Word> args, const MethodMap* scope) {
    if (scope) {
        auto it = scope->find(selector);
        if (it != scope->end()) return invoke(it->second, receiver, args, scope);
    }
    if (const auto* m = vm_.methods().find_method(selector)) return invoke(*m, receiver, args, scope);
    if (vm_.primitive(selector)) return vm_.send_primitive_words(selector, receiver, args);
    throw UnknownSelector(std::string(selector), frames_.empty() ? "" : frames_.back()->method->selector);
}

std::optional<Word> Interpreter::statements(Frame& f, const std::vector<Statement>& body) {
    Word last = 0;
    for (const auto& s : body) {
        tick();
        if (const auto* a = s.as<AssignStmt>()) {
            Word v = eval(f, a->value);
            if (f.returning) return std::nullopt;
            Word* cell = lookup(f, a->target);
            if (cell == nullptr) throw UnknownVariable(a->target);
            *cell = v;
            last = v;
        } else if (const auto* r = s.as<ReturnStmt>()) {
            Word v = eval(f, r->value);
            if (!f.returning) {
                f.returning = true;
                f.result = v;
            }
            return std::nullopt;
        } else {
            last = eval(f, s.as<ExprStmt>()->value);
            if (f.returning) return std::nullopt;
        }
    }
    return last;
}

Word* Interpreter::lookup(Frame& f, std::string_view name) {
    for (auto it = f.vars.rbegin(); it != f.vars.rend(); ++it)
        if (it->name == name) return &it->value;
    if (vm_.methods().globals.count(name)) return vm_.global(name);
    return nullptr;
}

Word Interpreter::eval(Frame& f, const Expr& e) {
    if (const auto* lit = e.as<LiteralExpr>()) return lit->value;
    if (const auto* ref = e.as<VarRefExpr>()) {
        if (ref->name == "self") return f.receiver;
        Word* cell = lookup(f, ref->name);
        if (cell == nullptr) throw UnknownVariable(ref->name);
        return *cell;
    }
    if (const auto* call = e.as<VmCallExpr>()) {
        std::vector<Word> args;
        for (const auto& a : call->args) {
            args.push_back(eval(f, a));
            if (f.returning) return 0;
        }
        const auto* fn = vm_.vm_function(call->function);
        if (fn == nullptr) throw UnknownSelector(call->function, f.method->selector);
        if (static_cast<std::size_t>(fn->arity) != args.size())
            throw ArityMismatch("VM function " + call->function + " takes " + std::to_string(fn->arity) + " arguments");
        return vm_.call_vm_function(call->function, args);
    }
    if (e.as<BlockExpr>()) throw BlockMisuse("block literal outside a control template in #" + f.method->selector);
    return eval_send(f, *e.as<SendExpr>());
}

Word Interpreter::eval_send(Frame& f, const SendExpr& s) {
    if (is_control_template(s.selector)) return eval_control(f, s);
    std::vector<Word> ops;
    ops.reserve(s.args.size() + 1);
    ops.push_back(eval(f, *s.receiver));
    if (f.returning) return 0;
    for (const auto& a : s.args) {
        ops.push_back(eval(f, a));
        if (f.returning) return 0;
    }
    tick();
    if (vm_.methods().is_template(s.selector)) return eval_template(s, ops);
    return send(s.selector, ops[0], std::span<const Word>(ops).subspan(1), f.scope);
}

Word Interpreter::eval_template(const SendExpr& s, std::span<const Word> ops) {
    const std::string& sel = s.selector;
    auto& binaries = binary_ops();
    if (auto it = binaries.find(sel); it != binaries.end()) {
        Word a = ops[0], b = ops[1];
        if (it->second.swap) std::swap(a, b);
        return ir::eval_binary(it->second.op, a, b, s.is_signed);
    }
    if (sel == "~=") return ops[0] == ops[1] ? 0 : 1;
    if (sel == "negated") return Word{0} - ops[0];
    if (sel == "bitInvert") return ~ops[0];
    if (sel == "bitShift:") {
        auto n = static_cast<SignedWord>(ops[1]);
        if (n >= 0) return ir::eval_binary(ir::Op::shl, ops[0], ops[1], false);
        return ir::eval_binary(ir::Op::shr, ops[0], Word{0} - ops[1], s.is_signed);
    }
    if (sel == "longAt:") return load(ops[1]);
    if (sel == "longAt:put:") {
        store(ops[1], ops[2]);
        return ops[2];
    }
    if (sel == "fetchPointer:ofObject:") return load(ops[2] + 16 + ops[1] * 8);
    if (sel == "storePointer:ofObject:withValue:") {
        store(ops[2] + 16 + ops[1] * 8, ops[3]);
        return ops[3];
    }
    if (sel == "classIdOf:") return load(ops[1]) & 0xffffffffu;
    if (sel == "slotSizeOf:") return load(ops[1] + 8);
    if (sel == "stackAt:") {
        if (ops[1] > kMaxPrimitiveArgs) throw PrimitiveFailed("stackAt:");
        return reinterpret_cast<const Word*>(&vm_.pinned())[ops[1]];
    }
    throw UnknownSelector(sel, "");
}

std::optional<Word> Interpreter::inline_block(Frame& f, const BlockExpr& b, std::span<const Word> params) {
    std::size_t mark = f.vars.size();
    for (std::size_t i = 0; i < b.params.size(); ++i) f.vars.push_back({b.params[i], params[i], is_oop(*f.method, b.params[i])});
    for (const auto& t : b.temps) f.vars.push_back({t, 0, is_oop(*f.method, t)});
    auto value = statements(f, b.body);
    f.vars.resize(mark);
    return value;
}

Word Interpreter::eval_control(Frame& f, const SendExpr& s) {
    const std::string& sel = s.selector;
    if (sel == "ifTrue:ifFalse:" || sel == "ifFalse:ifTrue:") {
        const auto& first = block_arg(s.args[0], 0, sel);
        const auto& second = block_arg(s.args[1], 0, sel);
        bool true_first = sel == "ifTrue:ifFalse:";
        Word cond = eval(f, *s.receiver);
        if (f.returning) return 0;
        const BlockExpr& taken = (cond != 0) == true_first ? first : second;
        return inline_block(f, taken, {}).value_or(0);
    }
    if (sel == "ifTrue:" || sel == "ifFalse:") {
        const auto& body = block_arg(s.args[0], 0, sel);
        Word cond = eval(f, *s.receiver);
        if (f.returning) return 0;
        if ((cond != 0) != (sel == "ifTrue:")) return 0;
        return inline_block(f, body, {}).value_or(0);
    }
    if (sel == "and:" || sel == "or:") {
        const auto& rhs = block_arg(s.args[0], 0, sel);
        Word lhs = eval(f, *s.receiver);
        if (f.returning) return 0;
        if ((lhs != 0) != (sel == "and:")) return lhs;
        return inline_block(f, rhs, {}).value_or(0);
    }
    if (sel == "whileTrue:" || sel == "whileFalse:") {
        const auto& cond_block = block_arg(*s.receiver, 0, sel);
        const auto& body = block_arg(s.args[0], 0, sel);
        bool want = sel == "whileTrue:";
        for (;;) {
            tick();
            auto cond = inline_block(f, cond_block, {});
            if (!cond) throw BlockMisuse("return inside a loop condition");
            if ((*cond != 0) != want) break;
            if (!inline_block(f, body, {})) return 0;
        }
        return 0;
    }
    if (sel == "whileTrue" || sel == "whileFalse") {
        const auto& body = block_arg(*s.receiver, 0, sel);
        bool want = sel == "whileTrue";
        for (;;) {
            tick();
            auto cond = inline_block(f, body, {});
            if (!cond) throw BlockMisuse("return inside a loop condition");
            if ((*cond != 0) != want) break;
        }
        return 0;
    }
    if (sel == "to:do:") {
        const auto& body = block_arg(s.args[1], 1, sel);
        Word start = eval(f, *s.receiver);
        if (f.returning) return 0;
        Word limit = eval(f, s.args[0]);
        if (f.returning) return 0;
        // The index lives across iterations; body temps are reset each time.
        std::size_t mark = f.vars.size();
        f.vars.push_back({body.params[0], start, false});
        for (;;) {
            tick();
            if (static_cast<SignedWord>(f.vars[mark].value) > static_cast<SignedWord>(limit)) break;
            for (const auto& t : body.temps) f.vars.push_back({t, 0, is_oop(*f.method, t)});
            auto value = statements(f, body.body);
            f.vars.resize(mark + 1);
            if (!value) {
                f.vars.resize(mark);
                return 0;
            }
            f.vars[mark].value += 1;
        }
        f.vars.resize(mark);
        return 0;
    }
    if (sel == "timesRepeat:") {
        const auto& body = block_arg(s.args[0], 0, sel);
        Word remaining = eval(f, *s.receiver);
        if (f.returning) return 0;
        while (static_cast<SignedWord>(remaining) > 0) {
            tick();
            if (!inline_block(f, body, {})) return 0;
            --remaining;
        }
        return 0;
    }
    if (sel == "ifStackContains:do:") {
        const auto& body = block_arg(s.args[1], 0, sel);
        bool found;
        const auto* lit = s.args[0].as<LiteralExpr>();
        if (lit && lit->kind == LiteralExpr::Kind::Symbol) {
            // Reflective check over a reified copy of the activation list.
            ++vm_.guard_checks_;
            found = guard_check(vm_.call_stack(), lit->text);
        } else {
            Word symbol = eval(f, s.args[0]);
            if (f.returning) return 0;
            found = vm_.stack_contains_symbol(symbol) != 0;
        }
        if (!found) return 0;
        return inline_block(f, body, {}).value_or(0);
    }
    throw UnknownSelector(sel, f.method->selector);
}

}  // namespace cascade
