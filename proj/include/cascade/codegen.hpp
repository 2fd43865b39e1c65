#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/chain.hpp"
#include "cascade/ir.hpp"
#include "cascade/reachability.hpp"
#include "cascade/symbols.hpp"
#include "cascade/x64.hpp"

namespace cascade::codegen {

// ---- frames ----

/// One lexical context of a function. Inlined blocks get their own context
/// whose parent is the enclosing one; all contexts share the physical frame.
struct FrameContext {
    std::string name;
    int parent = -1;  // index into FrameLayout::contexts
    /// variable -> rbp-relative byte offset. SSA versions of a variable are
    /// keyed `name.N`; the first version is also keyed by the bare name.
    std::map<std::string, std::int32_t, std::less<>> slots;
};

struct VarAccess {
    int depth = 0;  // number of parent links followed
    std::int32_t offset = 0;
};

struct FrameLayout {
    std::string function;
    std::vector<FrameContext> contexts;
    /// rbp-relative byte offset for every virtual register. Receiver and
    /// parameters are positive (caller pushed), locals negative.
    std::vector<std::int32_t> vreg_offset;
    /// Local words reserved below rbp.
    std::uint32_t frame_words = 0;

    const FrameContext& root() const { return contexts.front(); }
    std::optional<VarAccess> resolve(int context, std::string_view name) const;
};

FrameLayout layout_frames(const ir::IrFunction& f);

// ---- send classification ----

enum class SendCategory { InternalCall, VmFunctionCall, InlinedTemplate };

struct SendKind {
    SendCategory category = SendCategory::InternalCall;
    std::string template_id;  // set for InlinedTemplate
    friend bool operator==(const SendKind&, const SendKind&) = default;
};

SendKind classify_send(std::string_view selector, const MethodTable& table);

// ---- primitive templates ----

/// Where a template operand lives.
struct Loc {
    enum class Kind { Slot, Imm, Sym };
    Kind kind = Kind::Imm;
    std::int32_t offset = 0;  // Slot: rbp-relative
    Word imm = 0;
    std::string sym;

    static Loc slot(std::int32_t off) { return Loc{Kind::Slot, off, 0, {}}; }
    static Loc immediate(Word v) { return Loc{Kind::Imm, 0, v, {}}; }
    static Loc symbol(std::string s) { return Loc{Kind::Sym, 0, 0, std::move(s)}; }
};

/// Emits a fixed sequence: operands are loaded into scratch registers and the
/// result (if any) is left in rax. Control templates only evaluate their
/// condition operand and leave the flags for the caller's branch. Traps jump
/// to `fail`.
using TemplateEmitter =
    std::function<void(x64::Assembler&, std::span<const Loc> operands, bool is_signed, x64::Label fail)>;

struct PrimitiveTemplate {
    std::string id;
    int operand_count = 0;
    bool control = false;
    bool produces_value = true;
    TemplateEmitter emit;
};

const std::map<std::string, PrimitiveTemplate, std::less<>>& primitive_templates();
const PrimitiveTemplate& find_template(std::string_view id);
/// Template id for a template selector, e.g. "+" -> "add".
std::string template_for_selector(std::string_view selector);

struct NativeSequence {
    std::vector<std::uint8_t> bytes;
    std::vector<std::string> listing;
    std::vector<x64::Relocation> relocations;
};

/// Standalone expansion of one template, with its own failure tail.
/// Throws ArityMismatch when the operand count is wrong.
NativeSequence inline_template(const PrimitiveTemplate& t, std::span<const Loc> operands, bool is_signed = false);

// ---- artifacts ----

struct NativeArtifact {
    std::string selector;
    std::vector<std::uint8_t> code;
    /// Offset of the activation stub: `Word stub()` returning a status word.
    std::size_t entry_offset = 0;
    /// Function start offsets, by selector.
    std::map<std::string, std::size_t, std::less<>> functions;
    /// Records still to patch. Empty once relocated.
    std::vector<x64::Relocation> relocations;
    /// Records already patched.
    std::vector<x64::Relocation> applied;
    std::uint32_t frame_size = 0;
    std::vector<std::string> listing;

    bool relocated() const { return relocations.empty(); }
};

/// Emit the stub for `entry` plus every function in `functions` (SSA form).
/// The result still carries relocation records.
NativeArtifact generate_native(std::string_view entry, const std::map<std::string, ir::IrFunction, std::less<>>& functions);

/// Patch every record: absolute64 from the symbol table, relative32 from the
/// artifact's own function table. Throws UnresolvedSymbol.
void relocate(NativeArtifact& artifact, const SymbolTable& symbols);

/// True if any patched field still holds its placeholder bytes.
bool has_placeholders(const NativeArtifact& artifact);

/// Single-function emission with an explicit layout, relocated.
NativeArtifact emit_native(const ir::IrFunction& f, const FrameLayout& layout, const SymbolTable& symbols);

std::string format_listing(const NativeArtifact& artifact);

/// Converter from SSA to a relocated single-function artifact.
Converter native_stage(const SymbolTable& symbols);

// ---- executable memory ----

/// Code copied into an anonymous mapping that is flipped from RW to RX
/// before it can be called.
class ExecutableCode {
public:
    explicit ExecutableCode(std::span<const std::uint8_t> bytes);
    ExecutableCode(const ExecutableCode&) = delete;
    ExecutableCode& operator=(const ExecutableCode&) = delete;
    ExecutableCode(ExecutableCode&& other) noexcept;
    ExecutableCode& operator=(ExecutableCode&& other) noexcept;
    ~ExecutableCode();

    const std::uint8_t* base() const { return static_cast<const std::uint8_t*>(base_); }
    std::size_t size() const { return size_; }
    bool writable() const;

    using StubFn = Word (*)();
    StubFn stub(std::size_t offset) const { return reinterpret_cast<StubFn>(const_cast<std::uint8_t*>(base()) + offset); }

private:
    void release();
    void* base_ = nullptr;
    std::size_t size_ = 0;
    std::size_t mapped_ = 0;
};

}  // namespace cascade::codegen
