// AST -> three-address code. Control templates become CFG blocks,
// arithmetic/bit/memory templates become single instructions, other sends
// become call_internal and VM calls become call_vm.

#include <map>

#include "cascade/errors.hpp"
#include "cascade/ir.hpp"

namespace cascade::ir {

namespace {

struct BinaryTemplate {
    Op op;
    bool swap;
};

const std::map<std::string, BinaryTemplate, std::less<>>& binary_templates() {
    static const std::map<std::string, BinaryTemplate, std::less<>> kTable = {
        {"+", {Op::add, false}},       {"-", {Op::sub, false}},        {"*", {Op::mul, false}},
        {"/", {Op::div, false}},       {"//", {Op::div, false}},       {"\\\\", {Op::mod, false}},
        {"bitAnd:", {Op::band, false}}, {"bitOr:", {Op::bor, false}},   {"bitXor:", {Op::bxor, false}},
        {"<<", {Op::shl, false}},      {">>", {Op::shr, false}},       {"=", {Op::cmp_eq, false}},
        {"==", {Op::cmp_eq, false}},   {"<", {Op::cmp_lt, false}},     {"<=", {Op::cmp_le, false}},
        {">", {Op::cmp_lt, true}},     {">=", {Op::cmp_le, true}},
    };
    return kTable;
}

constexpr Word kSlotBase = 16;  // header words before the first slot

class Lowerer {
public:
    Lowerer(const MethodNode& m, const MethodTable& table) : method_(m), table_(table) {}

    IrFunction run() {
        fn_.name = method_.selector;
        fn_.return_type = method_.return_type;
        fn_.scopes.push_back(Scope{-1, method_.selector});
        scopes_.push_back(ScopeVars{0, {}});
        fn_.receiver = fn_.new_vreg("self", 0);
        for (const auto& p : method_.params) {
            VReg r = fn_.new_vreg(p, 0);
            scopes_.back().vars[p] = r;
            fn_.params.push_back(r);
            VarInfo info = method_.var_info(p);
            fn_.param_types.push_back(info.type);
            fn_.param_by_ref.push_back(info.by_reference);
        }
        current_ = new_block();
        for (const auto& t : method_.temps) {
            VReg r = fn_.new_vreg(t, 0);
            scopes_.back().vars[t] = r;
            emit_move(r, Operand::of_imm(0));
        }
        auto value = statements(method_.body);
        if (value) ret(Operand::of_reg(fn_.receiver));
        for (std::size_t i = 0; i < open_.size(); ++i)
            if (open_[i]) {
                current_ = static_cast<BlockId>(i);
                ret(Operand::of_reg(fn_.receiver));
            }
        fn_.frame_hint = static_cast<std::uint32_t>(fn_.vregs.size());
        return std::move(fn_);
    }

private:
    struct ScopeVars {
        int scope;
        std::map<std::string, VReg, std::less<>> vars;
    };

    BlockId new_block() {
        BasicBlock b;
        b.id = static_cast<BlockId>(fn_.blocks.size());
        b.terminator.op = Op::ret;  // placeholder until terminated
        fn_.blocks.push_back(std::move(b));
        open_.push_back(true);
        return fn_.blocks.back().id;
    }

    BasicBlock& cur() { return fn_.blocks[current_]; }

    void emit(Instr in) { cur().instrs.push_back(std::move(in)); }

    VReg emit_value(Op op, std::vector<Operand> operands, bool is_signed = false) {
        VReg d = fn_.new_vreg({}, scopes_.back().scope);
        Instr in;
        in.op = op;
        in.dest = d;
        in.operands = std::move(operands);
        in.is_signed = is_signed;
        emit(std::move(in));
        return d;
    }

    void emit_move(VReg dest, Operand src) {
        Instr in;
        in.op = Op::move;
        in.dest = dest;
        in.operands = {std::move(src)};
        emit(std::move(in));
    }

    void terminate(Instr t) {
        cur().terminator = std::move(t);
        open_[current_] = false;
    }

    void jump(BlockId target) {
        Instr t;
        t.op = Op::jump;
        t.targets[0] = target;
        terminate(std::move(t));
    }

    void branch(Operand cond, BlockId if_true, BlockId if_false) {
        Instr t;
        t.op = Op::branch_if;
        t.operands = {std::move(cond)};
        t.targets[0] = if_true;
        t.targets[1] = if_false;
        terminate(std::move(t));
    }

    void ret(Operand value) {
        Instr t;
        t.op = Op::ret;
        t.operands = {std::move(value)};
        terminate(std::move(t));
    }

    // Returns the value of the last statement, or nullopt when the sequence
    // ended in a return.
    std::optional<Operand> statements(const std::vector<Statement>& body) {
        Operand last = Operand::of_imm(0);
        for (const auto& s : body) {
            if (const auto* a = s.as<AssignStmt>()) {
                Operand v = expr(a->value);
                assign(a->target, v);
                last = v;
            } else if (const auto* r = s.as<ReturnStmt>()) {
                Operand v = expr(r->value);
                ret(v);
                return std::nullopt;
            } else {
                last = expr(s.as<ExprStmt>()->value);
            }
        }
        return last;
    }

    std::optional<VReg> lookup(std::string_view name) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto found = it->vars.find(name);
            if (found != it->vars.end()) return found->second;
        }
        return std::nullopt;
    }

    void assign(const std::string& name, const Operand& value) {
        if (auto r = lookup(name)) {
            emit_move(*r, value);
            return;
        }
        if (table_.globals.count(name)) {
            Instr in;
            in.op = Op::store_word;
            in.operands = {Operand::of_sym(name), value};
            emit(std::move(in));
            return;
        }
        throw UnknownVariable(name);
    }

    Operand expr(const Expr& e) {
        if (const auto* lit = e.as<LiteralExpr>()) return Operand::of_imm(lit->value);
        if (const auto* ref = e.as<VarRefExpr>()) {
            if (ref->name == "self") return Operand::of_reg(fn_.receiver);
            if (auto r = lookup(ref->name)) return Operand::of_reg(*r);
            if (table_.globals.count(ref->name))
                return Operand::of_reg(emit_value(Op::load_word, {Operand::of_sym(ref->name)}));
            throw UnknownVariable(ref->name);
        }
        if (const auto* call = e.as<VmCallExpr>()) {
            const auto* sig = table_.find_vm_function(call->function);
            if (sig == nullptr) throw UnknownSelector(call->function, method_.selector);
            if (static_cast<std::size_t>(sig->arity) != call->args.size())
                throw ArityMismatch("VM function " + call->function + " takes " + std::to_string(sig->arity) +
                                    " arguments");
            std::vector<Operand> args;
            for (const auto& a : call->args) args.push_back(expr(a));
            VReg d = fn_.new_vreg({}, scopes_.back().scope);
            Instr in;
            in.op = Op::call_vm;
            in.dest = d;
            in.symbol = call->function;
            in.operands = std::move(args);
            emit(std::move(in));
            return Operand::of_reg(d);
        }
        if (e.as<BlockExpr>()) throw BlockMisuse("block literal outside a control template in #" + method_.selector);
        return send(*e.as<SendExpr>());
    }

    const BlockExpr& block_arg(const Expr& e, std::size_t params, const std::string& selector) {
        const auto* b = e.as<BlockExpr>();
        if (b == nullptr) throw BlockMisuse("#" + selector + " needs a literal block argument");
        if (b->params.size() != params)
            throw BlockMisuse("#" + selector + " block takes " + std::to_string(params) + " parameters");
        return *b;
    }

    // Inline a block body in the current position. Block temps are reset to
    // zero on entry. Returns nullopt when the body returned.
    std::optional<Operand> inline_block(const BlockExpr& b, const std::vector<Operand>& param_values) {
        int parent = scopes_.back().scope;
        int scope = static_cast<int>(fn_.scopes.size());
        fn_.scopes.push_back(Scope{parent, "block" + std::to_string(scope)});
        scopes_.push_back(ScopeVars{scope, {}});
        for (std::size_t i = 0; i < b.params.size(); ++i) {
            VReg r = fn_.new_vreg(b.params[i], scope);
            scopes_.back().vars[b.params[i]] = r;
            emit_move(r, param_values[i]);
        }
        for (const auto& t : b.temps) {
            VReg r = fn_.new_vreg(t, scope);
            scopes_.back().vars[t] = r;
            emit_move(r, Operand::of_imm(0));
        }
        auto value = statements(b.body);
        scopes_.pop_back();
        return value;
    }

    // A block parameter that the template itself drives (to:do: index).
    std::optional<Operand> inline_block_with_param(const BlockExpr& b, VReg& param_reg) {
        int parent = scopes_.back().scope;
        int scope = static_cast<int>(fn_.scopes.size());
        fn_.scopes.push_back(Scope{parent, "block" + std::to_string(scope)});
        scopes_.push_back(ScopeVars{scope, {}});
        scopes_.back().vars[b.params[0]] = param_reg;
        fn_.vregs[param_reg].name = b.params[0];
        fn_.vregs[param_reg].scope = scope;
        for (const auto& t : b.temps) {
            VReg r = fn_.new_vreg(t, scope);
            scopes_.back().vars[t] = r;
            emit_move(r, Operand::of_imm(0));
        }
        auto value = statements(b.body);
        scopes_.pop_back();
        return value;
    }

    Operand send(const SendExpr& s) {
        const std::string& sel = s.selector;
        if (is_control_template(sel)) return control(s);

        if (table_.is_template(sel)) {
            std::vector<Operand> ops;
            ops.push_back(expr(*s.receiver));
            for (const auto& a : s.args) ops.push_back(expr(a));
            return data_template(s, ops);
        }
        if (table_.find_method(sel) == nullptr) throw UnknownSelector(sel, method_.selector);
        std::vector<Operand> ops;
        ops.push_back(expr(*s.receiver));
        for (const auto& a : s.args) ops.push_back(expr(a));
        VReg d = fn_.new_vreg({}, scopes_.back().scope);
        Instr in;
        in.op = Op::call_internal;
        in.dest = d;
        in.symbol = sel;
        in.operands = std::move(ops);
        emit(std::move(in));
        return Operand::of_reg(d);
    }

    Operand data_template(const SendExpr& s, const std::vector<Operand>& ops) {
        const std::string& sel = s.selector;
        auto& binaries = binary_templates();
        if (auto it = binaries.find(sel); it != binaries.end()) {
            Operand a = ops[0], b = ops[1];
            if (it->second.swap) std::swap(a, b);
            return Operand::of_reg(emit_value(it->second.op, {a, b}, s.is_signed));
        }
        if (sel == "~=") {
            VReg eq = emit_value(Op::cmp_eq, {ops[0], ops[1]});
            return Operand::of_reg(emit_value(Op::bxor, {Operand::of_reg(eq), Operand::of_imm(1)}));
        }
        if (sel == "negated") return Operand::of_reg(emit_value(Op::sub, {Operand::of_imm(0), ops[0]}));
        if (sel == "bitInvert") return Operand::of_reg(emit_value(Op::bxor, {ops[0], Operand::of_imm(~Word{0})}));
        if (sel == "bitShift:") return bit_shift(ops[0], ops[1], s.is_signed);
        // Memory templates are sent to self; the receiver operand is ignored.
        if (sel == "longAt:") return Operand::of_reg(emit_value(Op::load_word, {ops[1]}));
        if (sel == "longAt:put:") {
            store(ops[1], ops[2]);
            return ops[2];
        }
        if (sel == "fetchPointer:ofObject:") {
            Operand addr = slot_address(ops[2], ops[1]);
            return Operand::of_reg(emit_value(Op::load_word, {addr}));
        }
        if (sel == "storePointer:ofObject:withValue:") {
            Operand addr = slot_address(ops[2], ops[1]);
            store(addr, ops[3]);
            return ops[3];
        }
        if (sel == "classIdOf:") {
            VReg header = emit_value(Op::load_word, {ops[1]});
            return Operand::of_reg(emit_value(Op::band, {Operand::of_reg(header), Operand::of_imm(0xffffffffu)}));
        }
        if (sel == "slotSizeOf:") {
            VReg addr = emit_value(Op::add, {ops[1], Operand::of_imm(8)});
            return Operand::of_reg(emit_value(Op::load_word, {Operand::of_reg(addr)}));
        }
        if (sel == "stackAt:") return Operand::of_reg(emit_value(Op::arg_slot_read, {ops[1]}));
        throw UnknownSelector(sel, method_.selector);
    }

    void store(const Operand& addr, const Operand& value) {
        Instr in;
        in.op = Op::store_word;
        in.operands = {addr, value};
        emit(std::move(in));
    }

    Operand slot_address(const Operand& object, const Operand& index) {
        if (index.is_imm()) return Operand::of_reg(emit_value(Op::add, {object, Operand::of_imm(kSlotBase + index.imm * 8)}));
        VReg scaled = emit_value(Op::shl, {index, Operand::of_imm(3)});
        VReg offset = emit_value(Op::add, {Operand::of_reg(scaled), Operand::of_imm(kSlotBase)});
        return Operand::of_reg(emit_value(Op::add, {object, Operand::of_reg(offset)}));
    }

    // Positive counts shift left, negative counts shift right.
    Operand bit_shift(const Operand& value, const Operand& count, bool is_signed) {
        if (count.is_imm()) {
            auto n = static_cast<SignedWord>(count.imm);
            if (n >= 0) return Operand::of_reg(emit_value(Op::shl, {value, count}));
            return Operand::of_reg(emit_value(Op::shr, {value, Operand::of_imm(static_cast<Word>(-n))}, is_signed));
        }
        VReg result = fn_.new_vreg({}, scopes_.back().scope);
        VReg negative = emit_value(Op::cmp_lt, {count, Operand::of_imm(0)}, true);
        BlockId left = new_block();
        BlockId right = new_block();
        BlockId join = new_block();
        branch(Operand::of_reg(negative), right, left);
        current_ = left;
        emit(Instr{Op::shl, result, {value, count}, {}, false, {0, 0}});
        jump(join);
        current_ = right;
        VReg amount = emit_value(Op::sub, {Operand::of_imm(0), count});
        emit(Instr{Op::shr, result, {value, Operand::of_reg(amount)}, {}, is_signed, {0, 0}});
        jump(join);
        current_ = join;
        return Operand::of_reg(result);
    }

    // Lower a branch arm. Writes the arm's value into `result` and jumps to
    // `join` unless the arm returned.
    void arm(const BlockExpr& b, VReg result, BlockId join) {
        auto value = inline_block(b, {});
        if (value) {
            emit_move(result, *value);
            jump(join);
        }
    }

    Operand control(const SendExpr& s) {
        const std::string& sel = s.selector;
        if (sel == "ifTrue:ifFalse:" || sel == "ifFalse:ifTrue:") {
            const auto& first = block_arg(s.args[0], 0, sel);
            const auto& second = block_arg(s.args[1], 0, sel);
            const BlockExpr& when_true = sel == "ifTrue:ifFalse:" ? first : second;
            const BlockExpr& when_false = sel == "ifTrue:ifFalse:" ? second : first;
            Operand cond = expr(*s.receiver);
            VReg result = fn_.new_vreg({}, scopes_.back().scope);
            BlockId then_b = new_block();
            BlockId else_b = new_block();
            BlockId join = new_block();
            branch(cond, then_b, else_b);
            current_ = then_b;
            arm(when_true, result, join);
            current_ = else_b;
            arm(when_false, result, join);
            current_ = join;
            return Operand::of_reg(result);
        }
        if (sel == "ifTrue:" || sel == "ifFalse:") {
            const auto& body = block_arg(s.args[0], 0, sel);
            Operand cond = expr(*s.receiver);
            VReg result = fn_.new_vreg({}, scopes_.back().scope);
            emit_move(result, Operand::of_imm(0));
            BlockId then_b = new_block();
            BlockId join = new_block();
            if (sel == "ifTrue:")
                branch(cond, then_b, join);
            else
                branch(cond, join, then_b);
            current_ = then_b;
            arm(body, result, join);
            current_ = join;
            return Operand::of_reg(result);
        }
        if (sel == "and:" || sel == "or:") {
            const auto& rhs = block_arg(s.args[0], 0, sel);
            Operand lhs = expr(*s.receiver);
            VReg result = fn_.new_vreg({}, scopes_.back().scope);
            emit_move(result, lhs);
            BlockId rhs_b = new_block();
            BlockId join = new_block();
            if (sel == "and:")
                branch(Operand::of_reg(result), rhs_b, join);
            else
                branch(Operand::of_reg(result), join, rhs_b);
            current_ = rhs_b;
            arm(rhs, result, join);
            current_ = join;
            return Operand::of_reg(result);
        }
        if (sel == "whileTrue:" || sel == "whileFalse:") {
            const auto& cond_block = block_arg(*s.receiver, 0, sel);
            const auto& body = block_arg(s.args[0], 0, sel);
            BlockId head = new_block();
            jump(head);
            current_ = head;
            auto cond = inline_block(cond_block, {});
            if (!cond) throw BlockMisuse("return inside a loop condition");
            BlockId body_b = new_block();
            BlockId exit = new_block();
            if (sel == "whileTrue:")
                branch(*cond, body_b, exit);
            else
                branch(*cond, exit, body_b);
            current_ = body_b;
            if (inline_block(body, {})) jump(head);
            current_ = exit;
            return Operand::of_imm(0);
        }
        if (sel == "whileTrue" || sel == "whileFalse") {
            const auto& body = block_arg(*s.receiver, 0, sel);
            BlockId head = new_block();
            jump(head);
            current_ = head;
            auto cond = inline_block(body, {});
            if (!cond) throw BlockMisuse("return inside a loop condition");
            BlockId exit = new_block();
            if (sel == "whileTrue")
                branch(*cond, head, exit);
            else
                branch(*cond, exit, head);
            current_ = exit;
            return Operand::of_imm(0);
        }
        if (sel == "to:do:") {
            const auto& body = block_arg(s.args[1], 1, sel);
            Operand start = expr(*s.receiver);
            Operand stop = expr(s.args[0]);
            VReg limit = fn_.new_vreg({}, scopes_.back().scope);
            emit_move(limit, stop);
            VReg index = fn_.new_vreg(body.params[0], scopes_.back().scope);
            emit_move(index, start);
            BlockId head = new_block();
            jump(head);
            current_ = head;
            VReg more = emit_value(Op::cmp_le, {Operand::of_reg(index), Operand::of_reg(limit)}, true);
            BlockId body_b = new_block();
            BlockId exit = new_block();
            branch(Operand::of_reg(more), body_b, exit);
            current_ = body_b;
            if (inline_block_with_param(body, index)) {
                Instr step{Op::add, index, {Operand::of_reg(index), Operand::of_imm(1)}, {}, false, {0, 0}};
                emit(std::move(step));
                jump(head);
            }
            current_ = exit;
            return Operand::of_imm(0);
        }
        if (sel == "timesRepeat:") {
            const auto& body = block_arg(s.args[0], 0, sel);
            Operand count = expr(*s.receiver);
            VReg remaining = fn_.new_vreg({}, scopes_.back().scope);
            emit_move(remaining, count);
            BlockId head = new_block();
            jump(head);
            current_ = head;
            VReg more = emit_value(Op::cmp_lt, {Operand::of_imm(0), Operand::of_reg(remaining)}, true);
            BlockId body_b = new_block();
            BlockId exit = new_block();
            branch(Operand::of_reg(more), body_b, exit);
            current_ = body_b;
            if (inline_block(body, {})) {
                emit(Instr{Op::sub, remaining, {Operand::of_reg(remaining), Operand::of_imm(1)}, {}, false, {0, 0}});
                jump(head);
            }
            current_ = exit;
            return Operand::of_imm(0);
        }
        if (sel == "ifStackContains:do:") {
            const auto& body = block_arg(s.args[1], 0, sel);
            Operand selector = expr(s.args[0]);
            VReg found = fn_.new_vreg({}, scopes_.back().scope);
            emit(Instr{Op::call_vm, found, {selector}, "stackContains", false, {0, 0}});
            VReg result = fn_.new_vreg({}, scopes_.back().scope);
            emit_move(result, Operand::of_imm(0));
            BlockId then_b = new_block();
            BlockId join = new_block();
            branch(Operand::of_reg(found), then_b, join);
            current_ = then_b;
            arm(body, result, join);
            current_ = join;
            return Operand::of_reg(result);
        }
        throw UnknownSelector(sel, method_.selector);
    }

    const MethodNode& method_;
    const MethodTable& table_;
    IrFunction fn_;
    BlockId current_ = 0;
    std::vector<bool> open_;
    std::vector<ScopeVars> scopes_;
};

}  // namespace

IrFunction lower(const MethodNode& method, const MethodTable& table) {
    if (!method.annotated) throw Error("lower: method #" + method.selector + " is not type-annotated");
    Lowerer lowerer(method, table);
    return lowerer.run();
}

}  // namespace cascade::ir
