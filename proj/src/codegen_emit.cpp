#include <sys/mman.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "cascade/codegen.hpp"
#include "cascade/errors.hpp"
#include "cascade/pinned.hpp"
#include "codegen_internal.hpp"

namespace cascade::codegen {

using namespace x64;

// ---------------------------------------------------------------------------
// frames

std::optional<VarAccess> FrameLayout::resolve(int context, std::string_view name) const {
    int depth = 0;
    for (int c = context; c >= 0; c = contexts[c].parent, ++depth) {
        auto it = contexts[c].slots.find(name);
        if (it != contexts[c].slots.end()) return VarAccess{depth, it->second};
    }
    return std::nullopt;
}

FrameLayout layout_frames(const ir::IrFunction& f) {
    FrameLayout layout;
    layout.function = f.name;
    for (const auto& s : f.scopes) layout.contexts.push_back(FrameContext{s.label, s.parent, {}});
    if (layout.contexts.empty()) layout.contexts.push_back(FrameContext{f.name, -1, {}});

    const auto n = static_cast<std::int32_t>(f.params.size());
    layout.vreg_offset.assign(f.vregs.size(), 0);
    std::vector<char> incoming(f.vregs.size(), 0);
    // Caller pushes the receiver, then arguments in order; the return address
    // and saved rbp sit between them and rbp.
    layout.vreg_offset[f.receiver] = 16 + 8 * n;
    incoming[f.receiver] = 1;
    for (std::int32_t i = 0; i < n; ++i) {
        layout.vreg_offset[f.params[i]] = 16 + 8 * (n - 1 - i);
        incoming[f.params[i]] = 1;
    }
    std::uint32_t locals = 0;
    for (std::size_t r = 0; r < f.vregs.size(); ++r) {
        if (incoming[r]) continue;
        layout.vreg_offset[r] = -8 * static_cast<std::int32_t>(++locals);
    }
    layout.frame_words = locals;

    for (std::size_t r = 0; r < f.vregs.size(); ++r) {
        const auto& info = f.vregs[r];
        auto scope = static_cast<std::size_t>(info.scope) < layout.contexts.size() ? info.scope : 0;
        auto& slots = layout.contexts[scope].slots;
        std::int32_t off = layout.vreg_offset[r];
        if (info.name.empty()) {
            slots.emplace("%" + std::to_string(r), off);
        } else {
            slots.emplace(info.name, off);
            slots.emplace(info.name + "." + std::to_string(r), off);
        }
    }
    return layout;
}

// ---------------------------------------------------------------------------
// function bodies

namespace {

constexpr Reg kArgRegs[] = {rdi, rsi, rdx, rcx, r8, r9};

class FunctionEmitter {
public:
    FunctionEmitter(Assembler& as, const ir::IrFunction& f, const FrameLayout& layout)
        : as_(as), f_(f), layout_(layout) {}

    void run() {
        if (!f_.ssa) throw UnsupportedInstr("native emission needs SSA input (#" + f_.name + ")");
        for (std::size_t i = 0; i < f_.blocks.size(); ++i) labels_.push_back(as_.new_label());
        fail_ = as_.new_label();

        as_.mark("fn " + f_.name);
        as_.push(rbp);
        as_.mov(rbp, rsp);
        if (layout_.frame_words > 0) as_.sub_imm(rsp, static_cast<std::int32_t>(8 * layout_.frame_words));
        for (std::size_t i = 0; i < f_.blocks.size(); ++i) {
            as_.bind(labels_[i]);
            block(f_.blocks[i]);
        }
        as_.bind(fail_);
        emit_trap_tail(as_);
    }

private:
    Loc loc(const ir::Operand& o) const {
        switch (o.kind) {
            case ir::Operand::Kind::Reg: return Loc::slot(layout_.vreg_offset[o.reg]);
            case ir::Operand::Kind::Imm: return Loc::immediate(o.imm);
            case ir::Operand::Kind::Sym: return Loc::symbol(o.sym);
        }
        return {};
    }

    void store_dest(const ir::Instr& in) {
        if (in.dest) as_.store(rbp, layout_.vreg_offset[*in.dest], rax);
    }

    void apply_template(std::string_view id, const ir::Instr& in) {
        std::vector<Loc> ops;
        for (const auto& o : in.operands) ops.push_back(loc(o));
        find_template(id).emit(as_, ops, in.is_signed, fail_);
        store_dest(in);
    }

    void block(const ir::BasicBlock& b) {
        for (const auto& in : b.instrs) instr(in);
        terminator(b);
    }

    void instr(const ir::Instr& in) {
        using ir::Op;
        switch (in.op) {
            case Op::add: case Op::sub: case Op::mul: case Op::div: case Op::mod:
            case Op::band: case Op::bor: case Op::bxor: case Op::shl: case Op::shr:
            case Op::cmp_eq: case Op::cmp_lt: case Op::cmp_le: case Op::load_word:
            case Op::store_word: case Op::arg_slot_read:
                apply_template(ir::op_name(in.op), in);
                return;
            case Op::move:
                load_loc(as_, rax, loc(in.operands[0]));
                store_dest(in);
                return;
            case Op::call_vm: call_vm(in); return;
            case Op::call_internal: call_internal(in); return;
            default: throw UnsupportedInstr(std::string(ir::op_name(in.op)));
        }
    }

    void call_vm(const ir::Instr& in) {
        if (in.operands.size() > std::size(kArgRegs))
            throw UnsupportedInstr("call_vm #" + in.symbol + " with more than 6 arguments");
        for (std::size_t i = 0; i < in.operands.size(); ++i) load_loc(as_, kArgRegs[i], loc(in.operands[i]));
        as_.mov(r12, rsp);
        as_.and_imm(rsp, -16);
        as_.mov_abs(rax, in.symbol);
        as_.call(rax);
        as_.mov(rsp, r12);
        as_.mov_abs(rcx, kPrimFailedSymbol);
        as_.cmp_mem_imm(rcx, 0, 0);
        as_.jcc(Cond::ne, fail_);
        store_dest(in);
    }

    void call_internal(const ir::Instr& in) {
        for (const auto& o : in.operands) {
            load_loc(as_, rax, loc(o));
            as_.push(rax);
        }
        as_.call_rel(in.symbol);
        as_.add_imm(rsp, static_cast<std::int32_t>(8 * in.operands.size()));
        store_dest(in);
    }

    // Parallel copy of the successor's phi inputs along this edge.
    void phi_copies(const ir::BasicBlock& from, const ir::BasicBlock& to) {
        if (to.phis.empty()) return;
        std::vector<std::int32_t> dests;
        for (const auto& phi : to.phis) {
            for (const auto& inc : phi.incoming)
                if (inc.pred == from.id) {
                    as_.push_mem(rbp, layout_.vreg_offset[inc.value]);
                    dests.push_back(layout_.vreg_offset[phi.dest]);
                }
        }
        for (auto it = dests.rbegin(); it != dests.rend(); ++it) {
            as_.pop(rax);
            as_.store(rbp, *it, rax);
        }
    }

    void terminator(const ir::BasicBlock& b) {
        const auto& t = b.terminator;
        switch (t.op) {
            case ir::Op::ret:
                load_loc(as_, rax, loc(t.operands[0]));
                as_.mov(rsp, rbp);
                as_.pop(rbp);
                as_.ret();
                return;
            case ir::Op::jump:
                phi_copies(b, f_.block(t.targets[0]));
                as_.jmp(labels_[f_.index_of(t.targets[0])]);
                return;
            case ir::Op::branch_if: {
                if (t.targets[0] == t.targets[1]) {
                    phi_copies(b, f_.block(t.targets[0]));
                    as_.jmp(labels_[f_.index_of(t.targets[0])]);
                    return;
                }
                if (!f_.block(t.targets[0]).phis.empty() || !f_.block(t.targets[1]).phis.empty())
                    throw UnsupportedInstr("branch into a phi block (critical edge) in #" + f_.name);
                load_loc(as_, rax, loc(t.operands[0]));
                as_.test(rax, rax);
                as_.jcc(Cond::ne, labels_[f_.index_of(t.targets[0])]);
                as_.jmp(labels_[f_.index_of(t.targets[1])]);
                return;
            }
            default: throw UnsupportedInstr(std::string(ir::op_name(t.op)));
        }
    }

    Assembler& as_;
    const ir::IrFunction& f_;
    const FrameLayout& layout_;
    std::vector<Label> labels_;
    Label fail_;
};

// Activation stub: `Word stub()`. Reads the pinned slot, pushes receiver and
// arguments, calls the entry function and stores its raw result.
void emit_stub(Assembler& as, const ir::IrFunction& entry) {
    as.mark("stub " + entry.name);
    for (Reg r : {rbx, rbp, r12, r13, r14, r15}) as.push(r);
    as.mov(r15, rsp);
    as.mov_abs(rbx, kArgSlotSymbol);
    Label fail = as.new_label();
    const auto n = static_cast<std::int32_t>(entry.params.size());
    as.cmp_mem_imm(rbx, kPinnedCountOffset, n);
    as.jcc(Cond::ne, fail);
    as.push_mem(rbx, kPinnedReceiverOffset);
    for (std::int32_t i = 0; i < n; ++i) {
        std::int32_t off = kPinnedArgsOffset + 8 * i;
        bool by_ref = i < static_cast<std::int32_t>(entry.param_by_ref.size()) && entry.param_by_ref[i];
        BasicType type = i < static_cast<std::int32_t>(entry.param_types.size()) ? entry.param_types[i] : BasicType::Word;
        if (by_ref) {
            as.lea(rax, rbx, off);
            as.push(rax);
        } else if (type == BasicType::Word || type == BasicType::SignedWord) {
            as.load(rax, rbx, off);
            as.test_low_bit(rax);
            as.jcc(Cond::e, fail);
            as.sar1(rax);
            as.push(rax);
        } else {
            as.push_mem(rbx, off);
        }
    }
    as.call_rel(entry.name);
    as.store(rbx, kPinnedResultOffset, rax);
    as.mov_imm(rax, kNativeSuccess);
    as.mov(rsp, r15);
    for (Reg r : {r15, r14, r13, r12, rbp, rbx}) as.pop(r);
    as.ret();
    as.bind(fail);
    emit_trap_tail(as);
}

NativeArtifact assemble(std::string_view entry_name, const std::vector<const ir::IrFunction*>& fns,
                        const std::vector<const FrameLayout*>& layouts) {
    Assembler as;
    NativeArtifact art;
    art.selector = std::string(entry_name);
    art.entry_offset = 0;
    emit_stub(as, *fns[0]);
    for (std::size_t i = 0; i < fns.size(); ++i) {
        art.functions.emplace(fns[i]->name, as.size());
        FunctionEmitter(as, *fns[i], *layouts[i]).run();
    }
    as.finish();
    art.code = as.code();
    art.relocations = as.relocations();
    art.listing = as.listing();
    art.frame_size = layouts[0]->frame_words;
    return art;
}

}  // namespace

NativeArtifact generate_native(std::string_view entry,
                               const std::map<std::string, ir::IrFunction, std::less<>>& functions) {
    auto it = functions.find(entry);
    if (it == functions.end()) throw UnresolvedSymbol(std::string(entry));
    std::vector<const ir::IrFunction*> fns{&it->second};
    for (const auto& [sel, f] : functions)
        if (sel != entry) fns.push_back(&f);
    std::vector<FrameLayout> layouts;
    layouts.reserve(fns.size());
    for (const auto* f : fns) layouts.push_back(layout_frames(*f));
    std::vector<const FrameLayout*> lp;
    for (const auto& l : layouts) lp.push_back(&l);
    return assemble(entry, fns, lp);
}

void relocate(NativeArtifact& art, const SymbolTable& symbols) {
    // Resolve everything first so a failure leaves the artifact untouched.
    std::vector<Word> values;
    for (const auto& r : art.relocations) {
        if (r.kind == RelocKind::Absolute64) {
            auto a = symbols.find(r.symbol);
            if (!a) throw UnresolvedSymbol(r.symbol);
            values.push_back(*a);
        } else {
            auto f = art.functions.find(r.symbol);
            if (f == art.functions.end()) throw UnresolvedSymbol(r.symbol);
            auto rel = static_cast<std::int64_t>(f->second) - static_cast<std::int64_t>(r.offset + 4);
            values.push_back(static_cast<Word>(rel));
        }
    }
    for (std::size_t i = 0; i < art.relocations.size(); ++i) {
        const auto& r = art.relocations[i];
        std::size_t width = r.kind == RelocKind::Absolute64 ? 8 : 4;
        for (std::size_t b = 0; b < width; ++b) art.code[r.offset + b] = static_cast<std::uint8_t>(values[i] >> (8 * b));
        art.applied.push_back(r);
    }
    art.relocations.clear();
}

bool has_placeholders(const NativeArtifact& art) {
    for (const auto& r : art.applied) {
        if (r.kind == RelocKind::Absolute64) {
            Word v;
            std::memcpy(&v, art.code.data() + r.offset, 8);
            if (v == kAbsPlaceholder) return true;
        } else {
            std::uint32_t v;
            std::memcpy(&v, art.code.data() + r.offset, 4);
            if (v == kRelPlaceholder) return true;
        }
    }
    return !art.relocations.empty();
}

NativeArtifact emit_native(const ir::IrFunction& f, const FrameLayout& layout, const SymbolTable& symbols) {
    auto art = assemble(f.name, {&f}, {&layout});
    relocate(art, symbols);
    return art;
}

std::string format_listing(const NativeArtifact& art) {
    std::ostringstream out;
    for (const auto& line : art.listing) {
        bool label = line.size() < 6 || line.compare(4, 2, "  ") != 0;
        out << (label ? "" : "  ") << line << '\n';
    }
    return out.str();
}

Converter native_stage(const SymbolTable& symbols) {
    return {"native", ReprKind::Ssa, ReprKind::Native, [&symbols](std::any in) -> std::any {
                const auto& f = std::any_cast<const ir::IrFunction&>(in);
                return emit_native(f, layout_frames(f), symbols);
            }};
}

// ---------------------------------------------------------------------------
// executable memory

ExecutableCode::ExecutableCode(std::span<const std::uint8_t> bytes) {
    const auto page = static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
    size_ = bytes.size();
    mapped_ = std::max<std::size_t>(page, (size_ + page - 1) / page * page);
    void* p = mmap(nullptr, mapped_, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (p == MAP_FAILED) throw Error("mmap failed for code buffer");
    std::memcpy(p, bytes.data(), size_);
    if (mprotect(p, mapped_, PROT_READ | PROT_EXEC) != 0) {
        munmap(p, mapped_);
        throw Error("mprotect failed for code buffer");
    }
    base_ = p;
}

ExecutableCode::ExecutableCode(ExecutableCode&& other) noexcept
    : base_(other.base_), size_(other.size_), mapped_(other.mapped_) {
    other.base_ = nullptr;
    other.size_ = other.mapped_ = 0;
}

ExecutableCode& ExecutableCode::operator=(ExecutableCode&& other) noexcept {
    if (this != &other) {
        release();
        base_ = other.base_;
        size_ = other.size_;
        mapped_ = other.mapped_;
        other.base_ = nullptr;
        other.size_ = other.mapped_ = 0;
    }
    return *this;
}

ExecutableCode::~ExecutableCode() { release(); }

void ExecutableCode::release() {
    if (base_) munmap(base_, mapped_);
    base_ = nullptr;
}

bool ExecutableCode::writable() const {
    std::ifstream maps("/proc/self/maps");
    auto start = reinterpret_cast<std::uintptr_t>(base_);
    std::string line;
    while (std::getline(maps, line)) {
        std::uintptr_t lo = 0, hi = 0;
        char perms[5] = {};
        if (std::sscanf(line.c_str(), "%lx-%lx %4s", &lo, &hi, perms) != 3) continue;
        if (start >= lo && start < hi) return perms[1] == 'w';
    }
    return false;
}

}  // namespace cascade::codegen
