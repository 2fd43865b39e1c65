#include <algorithm>
#include <set>
#include <sstream>

#include "cascade/errors.hpp"
#include "cascade/ir.hpp"

namespace cascade::ir {

std::string_view op_name(Op op) {
    switch (op) {
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::mod: return "mod";
        case Op::band: return "band";
        case Op::bor: return "bor";
        case Op::bxor: return "bxor";
        case Op::shl: return "shl";
        case Op::shr: return "shr";
        case Op::cmp_eq: return "cmp_eq";
        case Op::cmp_lt: return "cmp_lt";
        case Op::cmp_le: return "cmp_le";
        case Op::load_word: return "load_word";
        case Op::store_word: return "store_word";
        case Op::move: return "move";
        case Op::call_internal: return "call_internal";
        case Op::call_vm: return "call_vm";
        case Op::arg_slot_read: return "arg_slot_read";
        case Op::ret: return "ret";
        case Op::jump: return "jump";
        case Op::branch_if: return "branch_if";
    }
    return "?";
}

bool is_terminator(Op op) { return op == Op::ret || op == Op::jump || op == Op::branch_if; }

bool is_binary(Op op) {
    switch (op) {
        case Op::add: case Op::sub: case Op::mul: case Op::div: case Op::mod:
        case Op::band: case Op::bor: case Op::bxor: case Op::shl: case Op::shr:
        case Op::cmp_eq: case Op::cmp_lt: case Op::cmp_le:
            return true;
        default:
            return false;
    }
}

std::vector<BlockId> BasicBlock::successors() const {
    switch (terminator.op) {
        case Op::jump: return {terminator.targets[0]};
        case Op::branch_if: return {terminator.targets[0], terminator.targets[1]};
        default: return {};
    }
}

VReg IrFunction::new_vreg(std::string name, int scope) {
    auto r = static_cast<VReg>(vregs.size());
    vregs.push_back(VRegInfo{std::move(name), scope, r});
    return r;
}

std::size_t IrFunction::index_of(BlockId id) const {
    // Blocks are usually stored in id order.
    if (id < blocks.size() && blocks[id].id == id) return id;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        if (blocks[i].id == id) return i;
    throw Error("no block L" + std::to_string(id) + " in " + name);
}

const BasicBlock& IrFunction::block(BlockId id) const { return blocks[index_of(id)]; }
BasicBlock& IrFunction::block(BlockId id) { return blocks[index_of(id)]; }

std::vector<std::vector<BlockId>> IrFunction::predecessors() const {
    std::vector<std::vector<BlockId>> preds(blocks.size());
    for (const auto& b : blocks)
        for (BlockId s : b.successors()) {
            auto& list = preds[index_of(s)];
            if (std::find(list.begin(), list.end(), b.id) == list.end()) list.push_back(b.id);
        }
    return preds;
}

std::string IrFunction::vreg_label(VReg r) const { return "%" + std::to_string(r); }

// ---------------------------------------------------------------------------

namespace {

std::string operand_text(const Operand& o) {
    switch (o.kind) {
        case Operand::Kind::Reg: return "%" + std::to_string(o.reg);
        case Operand::Kind::Imm: return std::to_string(static_cast<SignedWord>(o.imm));
        case Operand::Kind::Sym: return "@" + o.sym;
    }
    return "?";
}

void print_instr(std::ostringstream& out, const Instr& in) {
    out << "  ";
    if (in.dest) out << '%' << *in.dest << " = ";
    out << op_name(in.op);
    if (in.is_signed) out << ".s";
    if (in.op == Op::call_internal || in.op == Op::call_vm) out << " #" << in.symbol;
    for (const auto& o : in.operands) out << ' ' << operand_text(o);
    if (in.op == Op::jump) out << " L" << in.targets[0];
    if (in.op == Op::branch_if) out << " L" << in.targets[0] << " L" << in.targets[1];
    out << '\n';
}

}  // namespace

std::string print_function(const IrFunction& fn) {
    std::ostringstream out;
    out << "function " << fn.name << " (self=%" << fn.receiver;
    for (VReg p : fn.params) out << ", %" << p;
    out << ")" << (fn.ssa ? " ssa" : " tac") << '\n';
    for (const auto& b : fn.blocks) {
        out << 'L' << b.id << ":\n";
        for (const auto& phi : b.phis) {
            out << "  %" << phi.dest << " = phi";
            for (const auto& inc : phi.incoming) out << " [L" << inc.pred << " %" << inc.value << ']';
            out << '\n';
        }
        for (const auto& in : b.instrs) print_instr(out, in);
        print_instr(out, b.terminator);
    }
    return out.str();
}

namespace {

int expected_operands(const Instr& in) {
    if (is_binary(in.op)) return 2;
    switch (in.op) {
        case Op::load_word: case Op::move: case Op::arg_slot_read: case Op::ret: case Op::branch_if: return 1;
        case Op::store_word: return 2;
        case Op::jump: return 0;
        default: return -1;  // calls: variable, checked separately
    }
}

}  // namespace

std::string verify(const IrFunction& fn) {
    if (fn.blocks.empty()) return "function has no blocks";
    std::set<BlockId> ids;
    for (const auto& b : fn.blocks)
        if (!ids.insert(b.id).second) return "duplicate block id L" + std::to_string(b.id);
    auto preds = fn.predecessors();
    for (std::size_t i = 0; i < fn.blocks.size(); ++i) {
        const auto& b = fn.blocks[i];
        if (!is_terminator(b.terminator.op)) return "L" + std::to_string(b.id) + " lacks a terminator";
        for (BlockId s : b.successors())
            if (!ids.count(s)) return "L" + std::to_string(b.id) + " targets missing block";
        for (const auto& in : b.instrs) {
            if (is_terminator(in.op)) return "terminator inside L" + std::to_string(b.id);
            int want = expected_operands(in);
            if (want >= 0 && static_cast<int>(in.operands.size()) != want)
                return std::string(op_name(in.op)) + " has wrong operand count in L" + std::to_string(b.id);
            if (in.op == Op::call_internal && in.operands.empty()) return "call_internal without receiver";
            if ((in.op == Op::call_internal || in.op == Op::call_vm) && in.symbol.empty()) return "call without symbol";
            for (const auto& o : in.operands)
                if (o.is_reg() && o.reg >= fn.vregs.size()) return "operand register out of range";
        }
        int want = expected_operands(b.terminator);
        if (static_cast<int>(b.terminator.operands.size()) != want) return "terminator operand count in L" + std::to_string(b.id);
        std::set<BlockId> pred_set(preds[i].begin(), preds[i].end());
        for (const auto& phi : b.phis) {
            std::set<BlockId> inc;
            for (const auto& in : phi.incoming) inc.insert(in.pred);
            if (inc != pred_set) return "phi %" + std::to_string(phi.dest) + " does not cover predecessors of L" + std::to_string(b.id);
        }
    }
    if (fn.ssa) {
        std::vector<int> defs(fn.vregs.size(), 0);
        defs[fn.receiver]++;
        for (VReg p : fn.params) defs[p]++;
        for (const auto& b : fn.blocks) {
            for (const auto& phi : b.phis) defs[phi.dest]++;
            for (const auto& in : b.instrs)
                if (in.dest) defs[*in.dest]++;
        }
        for (std::size_t r = 0; r < defs.size(); ++r)
            if (defs[r] > 1) return "%" + std::to_string(r) + " defined more than once";
    }
    return {};
}

// ---------------------------------------------------------------------------
// interpretation

Word eval_binary(Op op, Word a, Word b, bool is_signed) {
    const auto sa = static_cast<SignedWord>(a);
    const auto sb = static_cast<SignedWord>(b);
    switch (op) {
        case Op::add: return a + b;
        case Op::sub: return a - b;
        case Op::mul: return a * b;
        case Op::div:
            if (b == 0) throw DivisionByZero();
            if (!is_signed) return a / b;
            if (sb == -1) return Word{0} - a;
            return static_cast<Word>(sa / sb);
        case Op::mod:
            if (b == 0) throw DivisionByZero();
            if (!is_signed) return a % b;
            if (sb == -1) return 0;
            return static_cast<Word>(sa % sb);
        case Op::band: return a & b;
        case Op::bor: return a | b;
        case Op::bxor: return a ^ b;
        case Op::shl: return a << (b & 63);
        case Op::shr:
            return is_signed ? static_cast<Word>(sa >> (b & 63)) : a >> (b & 63);
        case Op::cmp_eq: return a == b ? 1 : 0;
        case Op::cmp_lt: return (is_signed ? sa < sb : a < b) ? 1 : 0;
        case Op::cmp_le: return (is_signed ? sa <= sb : a <= b) ? 1 : 0;
        default: throw Error("eval_binary: not a binary op");
    }
}

namespace {

struct Budget {
    std::uint64_t used = 0;
    const InterpOptions& options;
};

Word run(const IrFunction& fn, std::span<const Word> args, Word receiver, SymbolEnv& env, Budget& budget,
         std::size_t depth) {
    if (args.size() != fn.params.size())
        throw ArityMismatch("#" + fn.name + " takes " + std::to_string(fn.params.size()) + " arguments");
    if (depth > budget.options.max_depth) throw StackDepthExceeded(budget.options.max_depth);
    std::vector<Word> regs(fn.vregs.size(), 0);
    regs[fn.receiver] = receiver;
    for (std::size_t i = 0; i < args.size(); ++i) regs[fn.params[i]] = args[i];

    auto value = [&](const Operand& o) -> Word {
        switch (o.kind) {
            case Operand::Kind::Reg: return regs[o.reg];
            case Operand::Kind::Imm: return o.imm;
            case Operand::Kind::Sym: return env.symbol_address(o.sym);
        }
        return 0;
    };
    auto tick = [&] {
        if (++budget.used > budget.options.step_budget) throw StepBudgetExceeded(budget.options.step_budget);
    };

    std::size_t index = 0;
    std::optional<BlockId> pred;
    std::vector<Word> phi_values;
    std::vector<Word> call_args;
    for (;;) {
        const BasicBlock& b = fn.blocks[index];
        if (!b.phis.empty()) {
            phi_values.clear();
            for (const auto& phi : b.phis) {
                auto it = std::find_if(phi.incoming.begin(), phi.incoming.end(),
                                       [&](const PhiIncoming& inc) { return pred && inc.pred == *pred; });
                if (it == phi.incoming.end()) throw Error("phi without incoming value for predecessor");
                phi_values.push_back(regs[it->value]);
            }
            for (std::size_t i = 0; i < b.phis.size(); ++i) regs[b.phis[i].dest] = phi_values[i];
        }
        for (const auto& in : b.instrs) {
            tick();
            Word result = 0;
            if (is_binary(in.op)) {
                result = eval_binary(in.op, value(in.operands[0]), value(in.operands[1]), in.is_signed);
            } else {
                switch (in.op) {
                    case Op::move: result = value(in.operands[0]); break;
                    case Op::load_word: result = *reinterpret_cast<const Word*>(value(in.operands[0])); break;
                    case Op::store_word:
                        *reinterpret_cast<Word*>(value(in.operands[0])) = value(in.operands[1]);
                        break;
                    case Op::arg_slot_read: result = env.arg_slot_read(value(in.operands[0])); break;
                    case Op::call_vm: {
                        call_args.clear();
                        for (const auto& o : in.operands) call_args.push_back(value(o));
                        result = env.call_vm(in.symbol, call_args);
                        break;
                    }
                    case Op::call_internal: {
                        const IrFunction* callee = env.find_function(in.symbol);
                        if (callee == nullptr) throw UnknownSelector(in.symbol, fn.name);
                        std::vector<Word> callee_args;
                        for (std::size_t i = 1; i < in.operands.size(); ++i) callee_args.push_back(value(in.operands[i]));
                        result = run(*callee, callee_args, value(in.operands[0]), env, budget, depth + 1);
                        break;
                    }
                    default: throw UnsupportedInstr(std::string(op_name(in.op)));
                }
            }
            if (in.dest) regs[*in.dest] = result;
        }
        tick();
        const Instr& t = b.terminator;
        switch (t.op) {
            case Op::ret: return value(t.operands[0]);
            case Op::jump:
                pred = b.id;
                index = fn.index_of(t.targets[0]);
                break;
            case Op::branch_if:
                pred = b.id;
                index = fn.index_of(value(t.operands[0]) != 0 ? t.targets[0] : t.targets[1]);
                break;
            default: throw Error("block without terminator");
        }
    }
}

}  // namespace

Word interpret_ir(const IrFunction& fn, std::span<const Word> args, SymbolEnv& env, const InterpOptions& options,
                  Word receiver) {
    Budget budget{0, options};
    return run(fn, args, receiver, env, budget, 0);
}

}  // namespace cascade::ir
