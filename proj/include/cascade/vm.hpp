#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/ast.hpp"
#include "cascade/codegen.hpp"
#include "cascade/filesystem.hpp"
#include "cascade/heap.hpp"
#include "cascade/ir.hpp"
#include "cascade/pinned.hpp"
#include "cascade/reachability.hpp"
#include "cascade/symbols.hpp"

namespace cascade {

/// How a compiled primitive is executed.
enum class Backend { Native, IrTac, IrSsa, Ast };
std::string_view backend_name(Backend b);
std::optional<Backend> backend_from_name(std::string_view name);

/// The process-wide pinned argument slot.
PinnedArgSlot& pinned_arg_slot();

// ---- output ----

class PrintSink {
public:
    virtual ~PrintSink() = default;
    virtual void write(std::string_view text) = 0;
};

class MemorySink final : public PrintSink {
public:
    void write(std::string_view text) override { buffer_.append(text); }
    const std::string& text() const { return buffer_; }
    void clear() { buffer_.clear(); }

private:
    std::string buffer_;
};

class StdoutSink final : public PrintSink {
public:
    void write(std::string_view text) override;
};

// ---- native boundary ----

/// The five-entry interface between the VM and generated code.
class NativeActivation {
public:
    explicit NativeActivation(const SymbolTable& symbols, PinnedArgSlot& slot = pinned_arg_slot())
        : symbols_(symbols), slot_(slot) {}

    /// Copy bytes into executable memory owned by this object.
    std::uintptr_t load_code(std::span<const std::uint8_t> bytes);
    Word resolve_symbol(std::string_view name) const { return symbols_.resolve(name); }
    void write_arg_slot(Oop receiver, std::span<const Oop> args);
    /// Run a stub; returns its status word. Throws ActivationReentered or
    /// ContractViolation (no preceding write_arg_slot).
    Word invoke(std::uintptr_t entry);
    /// Only legal after a successful invoke.
    Word read_result() const;
    bool in_flight() const { return in_flight_; }

private:
    const SymbolTable& symbols_;
    PinnedArgSlot& slot_;
    std::vector<codegen::ExecutableCode> loaded_;
    bool written_ = false;
    bool succeeded_ = false;
    bool in_flight_ = false;
};

/// write_arg_slot + invoke + read_result. Throws PrimitiveFailed on the
/// failure status.
Word native_activation(NativeActivation& iface, std::uintptr_t entry, Oop receiver, std::span<const Oop> args);

// ---- primitives ----

struct VmFunction {
    std::string name;
    int arity = 0;
    bool returns_oop = false;
    const void* address = nullptr;
};

struct PrimitiveSignature {
    std::vector<BasicType> params;
    std::vector<bool> by_ref;
    BasicType result = BasicType::OopRef;
};

struct CompiledPrimitive {
    MethodNode method;
    std::vector<std::string> reachable;
    std::map<std::string, MethodNode, std::less<>> methods;
    std::map<std::string, ir::IrFunction, std::less<>> tac;
    std::map<std::string, ir::IrFunction, std::less<>> ssa;
    codegen::NativeArtifact artifact;
    std::optional<codegen::ExecutableCode> code;
    std::uintptr_t entry = 0;
};

class VM;
using BuiltinFn = std::function<Oop(VM&, Oop receiver, std::span<const Oop> args)>;

struct PrimitiveSlot {
    enum class State { Source, Compiled, Reflective, Builtin };

    std::string selector;
    State state = State::Source;
    SourceMethod source;
    std::shared_ptr<CompiledPrimitive> compiled;
    std::optional<MethodNode> reflective;
    BuiltinFn builtin;
    PrimitiveSignature signature;
    int compile_count = 0;
    bool dirty = false;
    /// Language-side method to run when the primitive fails.
    std::optional<std::string> fallback;
};

std::string_view slot_state_name(PrimitiveSlot::State s);

struct RawOutcome {
    bool failed = false;
    Word raw = 0;
};

struct VmOptions {
    std::size_t semispace_bytes = Heap::kDefaultSemispaceBytes;
    /// Unset: read CASCADE_GC_TORTURE from the environment.
    std::optional<bool> gc_torture;
    ir::InterpOptions interp{};
    Backend backend = Backend::Native;
};

/// True iff `selector` occurs in the stack below its top entry.
bool guard_check(std::span<const std::string> call_stack, std::string_view selector);

class Interpreter;

/// The miniature object VM. Single-threaded; the instance that last entered
/// an operation is the one VM functions talk to.
class VM {
public:
    static constexpr Word kNilClassId = 1;
    static constexpr Word kClassClassId = 2;
    static constexpr Word kTrueClassId = 3;
    static constexpr Word kFalseClassId = 4;

    explicit VM(VmOptions options = {});
    ~VM();
    VM(const VM&) = delete;
    VM& operator=(const VM&) = delete;

    static VM* active();

    Heap& heap() { return heap_; }
    SymbolTable& symbols() { return symbols_; }
    MethodTable& methods() { return methods_; }
    PinnedArgSlot& pinned() { return pinned_; }
    const VmOptions& options() const { return options_; }
    void set_backend(Backend b) { options_.backend = b; }
    void set_interp_options(ir::InterpOptions o) { options_.interp = o; }

    // objects
    Oop define_class(const std::string& name, Word instance_slots, bool bytes = false);
    Oop class_named(std::string_view name) const;
    Oop instantiate(Oop cls, Word extra_slots = 0);
    Oop new_string(std::string_view text);
    static bool is_class(Oop o);
    Oop nil() const { return heap_.nil(); }
    Oop true_object() const { return true_; }
    Oop false_object() const { return false_; }

    // globals
    Word& define_global(const std::string& name, Word initial = 0, bool is_oop = false);
    Word* global(std::string_view name);

    // VM functions
    void register_vm_function(const std::string& name, int arity, bool returns_oop, const void* address);
    const VmFunction* vm_function(std::string_view name) const;
    /// Call from C++; throws PrimitiveFailed when the function signals failure.
    Word call_vm_function(std::string_view name, std::span<const Word> args);
    Word& prim_failed() { return prim_failed_; }
    void note_vm_error(std::string message) { last_vm_error_ = std::move(message); }
    const std::string& last_vm_error() const { return last_vm_error_; }

    // language-side methods
    void add_method(const SourceMethod& src);
    void add_source(std::string_view text, std::string_view default_class = "Slang");

    // primitive slots
    PrimitiveSlot& install_primitive(const SourceMethod& src, std::optional<std::string> fallback = std::nullopt);
    PrimitiveSlot& install_reflective(const SourceMethod& src);
    PrimitiveSlot& install_builtin(const std::string& selector, BuiltinFn fn, PrimitiveSignature signature = {});
    /// Replace the source of a primitive; it is recompiled on the next call.
    void update_source(std::string_view selector, std::string source);
    void mark_dirty(std::string_view selector);
    void remove_primitive(std::string_view selector);
    PrimitiveSlot* primitive(std::string_view selector);
    const PrimitiveSlot* primitive(std::string_view selector) const;
    std::vector<std::string> primitive_selectors() const;
    /// Compile if the slot is Source or dirty. Throws CompileError; the slot
    /// keeps its previous state on failure.
    void ensure_compiled(std::string_view selector);

    Oop call_primitive(std::string_view selector, Oop receiver, std::span<const Oop> args,
                       std::optional<Backend> backend = std::nullopt);
    /// Run without tagging the result or falling back.
    RawOutcome invoke_raw(std::string_view selector, Oop receiver, std::span<const Oop> args,
                          std::optional<Backend> backend = std::nullopt);
    /// Primitive call from Slang code: arguments and result are plain words,
    /// tagged and untagged according to the primitive's signature.
    Word send_primitive_words(std::string_view selector, Word receiver, std::span<const Word> args);

    // interpretation
    Word ast_interpret(const MethodNode& m, Word receiver, std::span<const Word> args);
    /// Send to a language-side method or primitive through the interpreter.
    Word send(std::string_view selector, Word receiver, std::span<const Word> args);
    std::vector<std::string> call_stack() const;
    bool stack_contains(std::string_view selector) const;
    Word stack_contains_symbol(Word symbol);
    std::uint64_t guard_checks() const { return guard_checks_; }
    void reset_guard_checks() { guard_checks_ = 0; }

    // environment
    void set_sink(PrintSink* sink) { sink_ = sink ? sink : &stdout_sink_; }
    PrintSink& sink() { return *sink_; }
    void set_filesystem(FileSystem* fs) { fs_ = fs ? fs : &host_fs_; }
    FileSystem& filesystem() { return *fs_; }

    // bookkeeping used by the interpreter and activation paths
    // `selector` must outlive the frame.
    void push_frame(std::string_view selector) { frames_.push_back(selector); }
    void pop_frame() { frames_.pop_back(); }

private:
    friend class Interpreter;
    friend class VmScope;

    void install_vm_functions();
    void register_global_symbols();
    std::shared_ptr<CompiledPrimitive> compile(const PrimitiveSlot& slot) const;
    RawOutcome run_slot(PrimitiveSlot& slot, Backend backend);
    bool prepare_words(const MethodNode& m, std::vector<Word>& out);
    Oop call_language(const MethodNode& m, Oop receiver, std::span<const Oop> args);
    Oop retag(Word raw, BasicType type) const;

    VmOptions options_;
    Heap heap_;
    PinnedArgSlot& pinned_;
    SymbolTable symbols_;
    MethodTable methods_;
    std::map<std::string, PrimitiveSlot, std::less<>> primitives_;
    std::map<std::string, VmFunction, std::less<>> vm_functions_;
    struct Global {
        Word value = 0;
        bool is_oop = false;
    };
    std::map<std::string, std::unique_ptr<Global>, std::less<>> globals_;
    std::map<std::string, Oop, std::less<>> classes_;
    Word next_class_id_ = 16;
    Oop true_;
    Oop false_;
    Word prim_failed_ = 0;
    std::string last_vm_error_;
    std::uint64_t guard_checks_ = 0;
    std::vector<std::string_view> frames_;
    std::vector<PinnedArgSlot> saved_slots_;
    int slot_depth_ = 0;
    int root_source_ = -1;
    NativeActivation activation_;
    std::unique_ptr<Interpreter> interp_;
    StdoutSink stdout_sink_;
    PrintSink* sink_ = &stdout_sink_;
    HostFileSystem host_fs_;
    FileSystem* fs_ = &host_fs_;
    VM* previous_active_ = nullptr;
};

/// Makes `vm` the active VM for the current thread while in scope.
class VmScope {
public:
    explicit VmScope(VM& vm);
    ~VmScope();
    VmScope(const VmScope&) = delete;
    VmScope& operator=(const VmScope&) = delete;

private:
    VM* previous_;
};

}  // namespace cascade
