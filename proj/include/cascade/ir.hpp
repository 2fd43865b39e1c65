#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/ast.hpp"
#include "cascade/reachability.hpp"
#include "cascade/word.hpp"

namespace cascade::ir {

using VReg = std::uint32_t;
using BlockId = std::uint32_t;

enum class Op {
    add, sub, mul, div, mod,
    band, bor, bxor, shl, shr,
    cmp_eq, cmp_lt, cmp_le,
    load_word, store_word, move,
    call_internal, call_vm, arg_slot_read,
    ret, jump, branch_if,
};

std::string_view op_name(Op op);
bool is_terminator(Op op);
bool is_binary(Op op);

struct Operand {
    enum class Kind { Reg, Imm, Sym };
    Kind kind = Kind::Imm;
    VReg reg = 0;
    Word imm = 0;
    std::string sym;

    static Operand of_reg(VReg r) { return Operand{Kind::Reg, r, 0, {}}; }
    static Operand of_imm(Word v) { return Operand{Kind::Imm, 0, v, {}}; }
    static Operand of_sym(std::string name) { return Operand{Kind::Sym, 0, 0, std::move(name)}; }

    bool is_reg() const { return kind == Kind::Reg; }
    bool is_imm() const { return kind == Kind::Imm; }
    bool is_sym() const { return kind == Kind::Sym; }

    friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instr {
    Op op = Op::move;
    std::optional<VReg> dest;
    std::vector<Operand> operands;
    /// Callee selector (call_internal) or VM function name (call_vm).
    std::string symbol;
    /// Signed semantics for div, mod, shr, cmp_lt, cmp_le.
    bool is_signed = false;
    /// Branch targets: jump uses targets[0]; branch_if goes to targets[0]
    /// when the condition is non-zero, targets[1] otherwise.
    BlockId targets[2] = {0, 0};

    friend bool operator==(const Instr& a, const Instr& b) {
        return a.op == b.op && a.dest == b.dest && a.operands == b.operands && a.symbol == b.symbol &&
               a.is_signed == b.is_signed && a.targets[0] == b.targets[0] && a.targets[1] == b.targets[1];
    }
};

struct PhiIncoming {
    BlockId pred = 0;
    VReg value = 0;
    friend bool operator==(const PhiIncoming&, const PhiIncoming&) = default;
};

struct Phi {
    VReg dest = 0;
    /// The pre-SSA register this phi merges.
    VReg origin = 0;
    std::vector<PhiIncoming> incoming;
    friend bool operator==(const Phi&, const Phi&) = default;
};

struct BasicBlock {
    BlockId id = 0;
    std::vector<Phi> phis;
    std::vector<Instr> instrs;
    Instr terminator;

    std::vector<BlockId> successors() const;
    friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

/// Lexical scope of the source method: the method body is scope 0, each
/// inlined block opens a child scope.
struct Scope {
    int parent = -1;
    std::string label;
    friend bool operator==(const Scope&, const Scope&) = default;
};

struct VRegInfo {
    /// Source variable name, empty for expression temporaries.
    std::string name;
    int scope = 0;
    /// Pre-SSA register this one was renamed from (identity before SSA).
    VReg origin = 0;
    friend bool operator==(const VRegInfo&, const VRegInfo&) = default;
};

struct IrFunction {
    std::string name;
    VReg receiver = 0;
    std::vector<VReg> params;
    std::vector<BasicType> param_types;
    std::vector<bool> param_by_ref;
    BasicType return_type = BasicType::Word;
    std::vector<BasicBlock> blocks;
    std::vector<VRegInfo> vregs;
    std::vector<Scope> scopes;
    bool ssa = false;
    /// Stack words the function needs: one per virtual register.
    std::uint32_t frame_hint = 0;

    VReg new_vreg(std::string name = {}, int scope = 0);
    const BasicBlock& block(BlockId id) const;
    BasicBlock& block(BlockId id);
    std::size_t index_of(BlockId id) const;
    /// CFG predecessors of every block, indexed like `blocks`.
    std::vector<std::vector<BlockId>> predecessors() const;
    std::string vreg_label(VReg r) const;

    friend bool operator==(const IrFunction&, const IrFunction&) = default;
};

/// Lower an annotated method to three-address code (not yet SSA).
IrFunction lower(const MethodNode& method, const MethodTable& table);

/// Convert TAC to SSA: drop unreachable blocks, split critical edges, place
/// phis on iterated dominance frontiers and rename.
IrFunction to_ssa(IrFunction fn);

/// Dominator tree as immediate-dominator array indexed like `fn.blocks`.
/// Entry maps to itself.
std::vector<std::size_t> immediate_dominators(const IrFunction& fn);

/// Registers read in some block before (or without) being written there.
/// Only these receive phis.
std::set<VReg> non_local_registers(const IrFunction& fn);

/// Textual dump: one instruction per line, blocks labeled `Lk:`.
std::string print_function(const IrFunction& fn);

/// Structural checks (terminators, phi/pred agreement, operand counts).
/// Returns an empty string when valid, else a description of the first issue.
std::string verify(const IrFunction& fn);

/// Services an IR function needs from its host while executing.
class SymbolEnv {
public:
    virtual ~SymbolEnv() = default;
    virtual const IrFunction* find_function(std::string_view selector) const = 0;
    virtual Word call_vm(std::string_view name, std::span<const Word> args) = 0;
    virtual Word symbol_address(std::string_view name) const = 0;
    virtual Word arg_slot_read(Word index) const = 0;
};

struct InterpOptions {
    std::uint64_t step_budget = 100'000'000;
    std::size_t max_depth = 10'000;
};

Word interpret_ir(const IrFunction& fn, std::span<const Word> args, SymbolEnv& env,
                  const InterpOptions& options = {}, Word receiver = 0);

// Word semantics shared by every backend.
Word eval_binary(Op op, Word a, Word b, bool is_signed);

}  // namespace cascade::ir
