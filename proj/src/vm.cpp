#include "cascade/vm.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"
#include "interpreter.hpp"

namespace cascade {

namespace {

thread_local VM* t_active = nullptr;

bool is_int_type(BasicType t) { return t == BasicType::Word || t == BasicType::SignedWord; }

bool env_torture() {
    const char* v = std::getenv("CASCADE_GC_TORTURE");
    return v != nullptr && *v != '\0' && std::strcmp(v, "0") != 0;
}

// ---- VM functions ----
// Called from generated code with plain words. They never throw: errors set
// the failure flag, which the caller checks after the call returns.

VM& vm() { return *VM::active(); }

template <class F>
Word guarded(F&& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        vm().note_vm_error(e.what());
        vm().prim_failed() = 1;
        return 0;
    }
}

Word fail_word(const char* why) {
    vm().note_vm_error(why);
    vm().prim_failed() = 1;
    return 0;
}

std::string string_arg(Word oop) {
    Oop o = Oop::from_bits(oop);
    if (!o.is_reference() || oop == 0 || !Heap::is_bytes(o)) throw ContractViolation("expected a byte object");
    return std::string(Heap::bytes_of(o));
}

Word fn_print_oop(Word oop) {
    return guarded([&] {
        char buf[24];
        auto res = std::to_chars(buf, buf + sizeof buf - 1, oop, 16);
        *res.ptr++ = '\n';
        vm().sink().write(std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)));
        return oop;
    });
}

Word fn_primitive_new() {
    return guarded([] {
        Oop cls = Oop::from_bits(vm().pinned().receiver);
        if (!VM::is_class(cls)) return fail_word("primitiveNew: receiver is not a class");
        return vm().instantiate(cls).bits();
    });
}

Word fn_instantiate_class(Word cls, Word extra) {
    return guarded([&] {
        if (!VM::is_class(Oop::from_bits(cls))) return fail_word("instantiateClass: not a class");
        return vm().instantiate(Oop::from_bits(cls), extra).bits();
    });
}

Word fn_create_directory(Word path) {
    return guarded([&] {
        if (!vm().filesystem().create_directory(string_arg(path))) return fail_word("createDirectory failed");
        return Word{1};
    });
}

Word fn_write_file(Word path, Word data) {
    return guarded([&] {
        std::string bytes = string_arg(data);
        if (!vm().filesystem().write_file(string_arg(path), bytes)) return fail_word("writeFile failed");
        return static_cast<Word>(bytes.size());
    });
}

Word fn_read_file(Word path) {
    return guarded([&] {
        auto data = vm().filesystem().read_file(string_arg(path));
        if (!data) return fail_word("readFile failed");
        return vm().new_string(*data).bits();
    });
}

Word fn_collect_garbage() {
    return guarded([] { return static_cast<Word>(vm().heap().collect().live_bytes); });
}

Word fn_stack_contains(Word symbol) {
    return guarded([&] { return vm().stack_contains_symbol(symbol); });
}

Word fn_primitive_fail() {
    vm().prim_failed() = 1;
    return 0;
}

Word fn_hash_mix(Word a, Word b) { return std::rotl(a ^ (b * 0x9e3779b97f4a7c15ull), 13); }

Word fn_clamp_word(Word x, Word lo, Word hi) {
    auto v = static_cast<SignedWord>(x);
    v = std::max(v, static_cast<SignedWord>(lo));
    v = std::min(v, static_cast<SignedWord>(hi));
    return static_cast<Word>(v);
}

Word call_with(const void* address, int arity, std::span<const Word> a) {
    switch (arity) {
        case 0: return reinterpret_cast<Word (*)()>(address)();
        case 1: return reinterpret_cast<Word (*)(Word)>(address)(a[0]);
        case 2: return reinterpret_cast<Word (*)(Word, Word)>(address)(a[0], a[1]);
        case 3: return reinterpret_cast<Word (*)(Word, Word, Word)>(address)(a[0], a[1], a[2]);
        case 4: return reinterpret_cast<Word (*)(Word, Word, Word, Word)>(address)(a[0], a[1], a[2], a[3]);
        case 5: return reinterpret_cast<Word (*)(Word, Word, Word, Word, Word)>(address)(a[0], a[1], a[2], a[3], a[4]);
        case 6:
            return reinterpret_cast<Word (*)(Word, Word, Word, Word, Word, Word)>(address)(a[0], a[1], a[2], a[3], a[4],
                                                                                          a[5]);
        default: throw UnsupportedInstr("VM function with more than 6 arguments");
    }
}

// IR execution environment backed by the VM.
class VmEnv final : public ir::SymbolEnv {
public:
    VmEnv(VM& vm, const std::map<std::string, ir::IrFunction, std::less<>>& fns) : vm_(vm), fns_(fns) {}

    const ir::IrFunction* find_function(std::string_view selector) const override {
        auto it = fns_.find(selector);
        return it == fns_.end() ? nullptr : &it->second;
    }
    Word call_vm(std::string_view name, std::span<const Word> args) override { return vm_.call_vm_function(name, args); }
    Word symbol_address(std::string_view name) const override { return vm_.symbols().resolve(name); }
    Word arg_slot_read(Word index) const override {
        if (index > kMaxPrimitiveArgs) throw PrimitiveFailed("stackAt:");
        return reinterpret_cast<const Word*>(&vm_.pinned())[index];
    }

private:
    VM& vm_;
    const std::map<std::string, ir::IrFunction, std::less<>>& fns_;
};

}  // namespace

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::Native: return "native";
        case Backend::IrTac: return "ir-tac";
        case Backend::IrSsa: return "ir-ssa";
        case Backend::Ast: return "ast";
    }
    return "?";
}

std::optional<Backend> backend_from_name(std::string_view name) {
    for (Backend b : {Backend::Native, Backend::IrTac, Backend::IrSsa, Backend::Ast})
        if (backend_name(b) == name) return b;
    if (name == "ir") return Backend::IrSsa;
    return std::nullopt;
}

std::string_view slot_state_name(PrimitiveSlot::State s) {
    switch (s) {
        case PrimitiveSlot::State::Source: return "source";
        case PrimitiveSlot::State::Compiled: return "compiled";
        case PrimitiveSlot::State::Reflective: return "reflective";
        case PrimitiveSlot::State::Builtin: return "builtin";
    }
    return "?";
}

PinnedArgSlot& pinned_arg_slot() {
    static PinnedArgSlot slot;
    return slot;
}

void StdoutSink::write(std::string_view text) { std::fwrite(text.data(), 1, text.size(), stdout); }

bool guard_check(std::span<const std::string> call_stack, std::string_view selector) {
    if (call_stack.empty()) return false;
    return std::find(call_stack.begin(), call_stack.end() - 1, selector) != call_stack.end() - 1;
}

// ---- NativeActivation ----

std::uintptr_t NativeActivation::load_code(std::span<const std::uint8_t> bytes) {
    loaded_.emplace_back(bytes);
    return reinterpret_cast<std::uintptr_t>(loaded_.back().base());
}

void NativeActivation::write_arg_slot(Oop receiver, std::span<const Oop> args) {
    if (args.size() > kMaxPrimitiveArgs)
        throw ContractViolation("at most " + std::to_string(kMaxPrimitiveArgs) + " arguments fit the pinned slot");
    slot_.receiver = receiver.bits();
    for (std::size_t i = 0; i < kMaxPrimitiveArgs; ++i) slot_.args[i] = i < args.size() ? args[i].bits() : 0;
    slot_.arg_count = args.size();
    slot_.result = 0;
    written_ = true;
    succeeded_ = false;
}

Word NativeActivation::invoke(std::uintptr_t entry) {
    if (in_flight_) throw ActivationReentered();
    if (!written_) throw ContractViolation("invoke without write_arg_slot");
    in_flight_ = true;
    written_ = false;
    Word status = reinterpret_cast<Word (*)()>(entry)();
    in_flight_ = false;
    succeeded_ = status == kNativeSuccess;
    return status;
}

Word NativeActivation::read_result() const {
    if (!succeeded_) throw ContractViolation("read_result without a successful invoke");
    return slot_.result;
}

Word native_activation(NativeActivation& iface, std::uintptr_t entry, Oop receiver, std::span<const Oop> args) {
    iface.write_arg_slot(receiver, args);
    if (iface.invoke(entry) != kNativeSuccess) throw PrimitiveFailed("native activation");
    return iface.read_result();
}

// ---- VM ----

VmScope::VmScope(VM& vm) : previous_(t_active) { t_active = &vm; }
VmScope::~VmScope() { t_active = previous_; }

VM* VM::active() { return t_active; }

VM::VM(VmOptions options)
    : options_(options),
      heap_(options.semispace_bytes),
      pinned_(pinned_arg_slot()),
      activation_(symbols_, pinned_),
      interp_(std::make_unique<Interpreter>(*this)) {
    heap_.set_torture(options_.gc_torture.value_or(env_torture()));
    true_ = heap_.allocate_static(kTrueClassId, 0);
    false_ = heap_.allocate_static(kFalseClassId, 0);
    pinned_ = PinnedArgSlot{};
    root_source_ = heap_.add_root_source([this](const Heap::RootVisitor& visit) {
        visit(pinned_.receiver);
        for (Word i = 0; i < std::min<Word>(pinned_.arg_count, kMaxPrimitiveArgs); ++i) visit(pinned_.args[i]);
        for (auto& saved : saved_slots_) {
            visit(saved.receiver);
            for (Word i = 0; i < std::min<Word>(saved.arg_count, kMaxPrimitiveArgs); ++i) visit(saved.args[i]);
        }
        for (auto& [name, g] : globals_)
            if (g->is_oop) visit(g->value);
        interp_->visit_roots(visit);
    });
    register_global_symbols();
    install_vm_functions();
    define_class("Object", 0);
    define_class("ByteString", 0, true);
    define_class("Point", 2);
    if (t_active == nullptr) t_active = this;
}

VM::~VM() {
    heap_.remove_root_source(root_source_);
    if (t_active == this) t_active = nullptr;
}

void VM::register_global_symbols() {
    symbols_.add_internal(kArgSlotSymbol, &pinned_);
    symbols_.add_internal(kPrimFailedSymbol, &prim_failed_);
    define_global("trueOop", true_.bits());
    define_global("falseOop", false_.bits());
    define_global("nilOop", heap_.nil().bits());
    define_global("allocationCount", 0);
}

void VM::install_vm_functions() {
    register_vm_function("printOop", 1, true, reinterpret_cast<const void*>(&fn_print_oop));
    register_vm_function("primitiveNew", 0, true, reinterpret_cast<const void*>(&fn_primitive_new));
    register_vm_function("instantiateClass", 2, true, reinterpret_cast<const void*>(&fn_instantiate_class));
    register_vm_function("createDirectory", 1, false, reinterpret_cast<const void*>(&fn_create_directory));
    register_vm_function("writeFile", 2, false, reinterpret_cast<const void*>(&fn_write_file));
    register_vm_function("readFile", 1, true, reinterpret_cast<const void*>(&fn_read_file));
    register_vm_function("collectGarbage", 0, false, reinterpret_cast<const void*>(&fn_collect_garbage));
    register_vm_function("stackContains", 1, false, reinterpret_cast<const void*>(&fn_stack_contains));
    register_vm_function("primitiveFail", 0, false, reinterpret_cast<const void*>(&fn_primitive_fail));
    register_vm_function("hashMix", 2, false, reinterpret_cast<const void*>(&fn_hash_mix));
    register_vm_function("clampWord", 3, false, reinterpret_cast<const void*>(&fn_clamp_word));
}

// ---- objects ----

Oop VM::define_class(const std::string& name, Word instance_slots, bool bytes) {
    if (auto it = classes_.find(name); it != classes_.end()) return it->second;
    Oop cls = heap_.allocate_static(kClassClassId, 3);
    Heap::slot(cls, 0) = tag_int(next_class_id_++);
    Heap::slot(cls, 1) = tag_int(instance_slots);
    Heap::slot(cls, 2) = tag_int(bytes ? 1 : 0);
    classes_.emplace(name, cls);
    return cls;
}

Oop VM::class_named(std::string_view name) const {
    auto it = classes_.find(name);
    if (it == classes_.end()) throw Error("no class named " + std::string(name));
    return it->second;
}

bool VM::is_class(Oop o) {
    return o.is_reference() && o.bits() != 0 && Heap::class_id_of(o) == kClassClassId;
}

Oop VM::instantiate(Oop cls, Word extra_slots) {
    if (!is_class(cls)) throw ContractViolation("instantiate: not a class");
    Word id = untag_int(Heap::slot(cls, 0));
    Word n = untag_int(Heap::slot(cls, 1)) + extra_slots;
    bool bytes = untag_int(Heap::slot(cls, 2)) != 0;
    Oop o = bytes ? heap_.allocate_bytes(id, std::string(n, '\0')) : heap_.allocate(id, n);
    ++*global("allocationCount");
    return o;
}

Oop VM::new_string(std::string_view text) {
    Word id = untag_int(Heap::slot(class_named("ByteString"), 0));
    return heap_.allocate_bytes(id, text);
}

// ---- globals and VM functions ----

Word& VM::define_global(const std::string& name, Word initial, bool is_oop) {
    auto& g = globals_[name];
    if (!g) g = std::make_unique<Global>();
    g->value = initial;
    g->is_oop = is_oop;
    symbols_.add_internal(name, &g->value);
    methods_.globals.insert(name);
    return g->value;
}

Word* VM::global(std::string_view name) {
    auto it = globals_.find(name);
    return it == globals_.end() ? nullptr : &it->second->value;
}

void VM::register_vm_function(const std::string& name, int arity, bool returns_oop, const void* address) {
    vm_functions_[name] = VmFunction{name, arity, returns_oop, address};
    methods_.add_vm_function(VmFunctionSig{name, arity, returns_oop});
    symbols_.add_internal(name, address);
}

const VmFunction* VM::vm_function(std::string_view name) const {
    auto it = vm_functions_.find(name);
    return it == vm_functions_.end() ? nullptr : &it->second;
}

Word VM::call_vm_function(std::string_view name, std::span<const Word> args) {
    const VmFunction* fn = vm_function(name);
    if (fn == nullptr) throw UnresolvedVmFunction(std::string(name));
    if (static_cast<std::size_t>(fn->arity) != args.size())
        throw ArityMismatch("VM function " + fn->name + " takes " + std::to_string(fn->arity) + " arguments");
    VmScope scope(*this);
    prim_failed_ = 0;
    Word result = call_with(fn->address, fn->arity, args);
    if (prim_failed_ != 0) {
        prim_failed_ = 0;
        throw PrimitiveFailed(fn->name);
    }
    return result;
}

// ---- language side ----

void VM::add_method(const SourceMethod& src) { methods_.add_method(compile_front(src)); }

void VM::add_source(std::string_view text, std::string_view default_class) {
    for (const auto& m : split_source_bundle(text, default_class)) add_method(m);
}

// ---- primitive slots ----

namespace {

PrimitiveSignature signature_of(const MethodNode& m) {
    PrimitiveSignature sig;
    for (const auto& p : m.params) {
        VarInfo info = m.var_info(p);
        sig.params.push_back(info.type);
        sig.by_ref.push_back(info.by_reference);
    }
    sig.result = m.return_type;
    return sig;
}

}  // namespace

PrimitiveSlot& VM::install_primitive(const SourceMethod& src, std::optional<std::string> fallback) {
    MethodNode m = compile_front(src);
    std::string selector = m.selector;
    PrimitiveSlot slot;
    slot.selector = selector;
    slot.state = PrimitiveSlot::State::Source;
    slot.signature = signature_of(m);
    slot.source = src;
    slot.source.selector = selector;
    slot.fallback = std::move(fallback);
    auto& placed = primitives_[selector];
    placed = std::move(slot);
    return placed;
}

PrimitiveSlot& VM::install_reflective(const SourceMethod& src) {
    MethodNode m = compile_front(src);
    PrimitiveSlot slot;
    slot.selector = m.selector;
    slot.state = PrimitiveSlot::State::Reflective;
    slot.source = src;
    slot.source.selector = m.selector;
    slot.signature = signature_of(m);
    slot.reflective = std::move(m);
    auto& placed = primitives_[slot.selector];
    placed = std::move(slot);
    return placed;
}

PrimitiveSlot& VM::install_builtin(const std::string& selector, BuiltinFn fn, PrimitiveSignature signature) {
    PrimitiveSlot slot;
    slot.selector = selector;
    slot.state = PrimitiveSlot::State::Builtin;
    slot.builtin = std::move(fn);
    slot.signature = std::move(signature);
    auto& placed = primitives_[selector];
    placed = std::move(slot);
    return placed;
}

void VM::update_source(std::string_view selector, std::string source) {
    PrimitiveSlot* slot = primitive(selector);
    if (slot == nullptr) throw UnknownSelector(std::string(selector), "");
    if (slot->state == PrimitiveSlot::State::Reflective) {
        SourceMethod src = slot->source;
        src.source = std::move(source);
        MethodNode m = compile_front(src);
        slot->source = std::move(src);
        slot->signature = signature_of(m);
        slot->reflective = std::move(m);
        return;
    }
    slot->source.source = std::move(source);
    if (slot->state == PrimitiveSlot::State::Compiled) slot->dirty = true;
    if (slot->state == PrimitiveSlot::State::Builtin) slot->state = PrimitiveSlot::State::Source;
}

void VM::mark_dirty(std::string_view selector) {
    PrimitiveSlot* slot = primitive(selector);
    if (slot == nullptr) throw UnknownSelector(std::string(selector), "");
    slot->dirty = true;
}

void VM::remove_primitive(std::string_view selector) {
    if (auto it = primitives_.find(selector); it != primitives_.end()) primitives_.erase(it);
}

PrimitiveSlot* VM::primitive(std::string_view selector) {
    auto it = primitives_.find(selector);
    return it == primitives_.end() ? nullptr : &it->second;
}

const PrimitiveSlot* VM::primitive(std::string_view selector) const {
    auto it = primitives_.find(selector);
    return it == primitives_.end() ? nullptr : &it->second;
}

std::vector<std::string> VM::primitive_selectors() const {
    std::vector<std::string> out;
    for (const auto& [sel, slot] : primitives_) out.push_back(sel);
    return out;
}

std::shared_ptr<CompiledPrimitive> VM::compile(const PrimitiveSlot& slot) const {
    auto cp = std::make_shared<CompiledPrimitive>();
    std::string stage = "purify";
    try {
        std::string text = purify(slot.source.source);
        stage = "parse";
        MethodNode m = parse_method(SourceMethod{slot.source.class_name, slot.source.selector, text});
        stage = "annotate";
        m = annotate_types(std::move(m));
        stage = "reachability";
        MethodTable table = methods_;
        table.add_method(m);
        ReachableSet reach = reachable_methods(m.selector, table);
        cp->reachable = reach.selectors;
        stage = "lower";
        for (const auto& sel : reach.selectors) {
            const MethodNode* callee = table.find_method(sel);
            cp->methods.emplace(sel, *callee);
            cp->tac.emplace(sel, ir::lower(*callee, table));
        }
        stage = "ssa";
        for (const auto& [sel, fn] : cp->tac) {
            ir::IrFunction ssa = ir::to_ssa(fn);
            if (auto problem = ir::verify(ssa); !problem.empty()) throw Error(problem);
            cp->ssa.emplace(sel, std::move(ssa));
        }
        stage = "emit";
        cp->artifact = codegen::generate_native(m.selector, cp->ssa);
        stage = "relocate";
        codegen::relocate(cp->artifact, symbols_);
        cp->code.emplace(cp->artifact.code);
        cp->entry = reinterpret_cast<std::uintptr_t>(cp->code->base()) + cp->artifact.entry_offset;
        cp->method = std::move(m);
    } catch (const CompileError&) {
        throw;
    } catch (const std::exception& e) {
        throw CompileError(stage, e.what());
    }
    return cp;
}

void VM::ensure_compiled(std::string_view selector) {
    PrimitiveSlot* slot = primitive(selector);
    if (slot == nullptr) throw UnknownSelector(std::string(selector), "");
    bool stale = slot->state == PrimitiveSlot::State::Source ||
                 (slot->state == PrimitiveSlot::State::Compiled && slot->dirty);
    if (!stale) return;
    auto cp = compile(*slot);
    slot->signature = signature_of(cp->method);
    slot->compiled = std::move(cp);
    slot->state = PrimitiveSlot::State::Compiled;
    slot->dirty = false;
    ++slot->compile_count;
}

bool VM::prepare_words(const MethodNode& m, std::vector<Word>& out) {
    out.clear();
    if (pinned_.arg_count != m.params.size()) return false;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        VarInfo info = m.var_info(m.params[i]);
        Word a = pinned_.args[i];
        if (info.by_reference) {
            out.push_back(reinterpret_cast<Word>(&pinned_.args[i]));
        } else if (is_int_type(info.type)) {
            if (!Oop::from_bits(a).is_small_int()) return false;
            out.push_back(untag_int(a));
        } else {
            out.push_back(a);
        }
    }
    return true;
}

Oop VM::retag(Word raw, BasicType type) const {
    return Oop::from_bits(is_int_type(type) ? tag_int(raw) : raw);
}

RawOutcome VM::run_slot(PrimitiveSlot& slot, Backend backend) {
    using State = PrimitiveSlot::State;
    std::vector<Word> words;
    try {
        switch (slot.state) {
            case State::Builtin: {
                push_frame(slot.selector);
                struct Pop {
                    VM& vm;
                    ~Pop() { vm.pop_frame(); }
                } pop{*this};
                std::vector<Oop> args;
                for (Word i = 0; i < pinned_.arg_count; ++i) args.push_back(Oop::from_bits(pinned_.args[i]));
                Oop r = slot.builtin(*this, Oop::from_bits(pinned_.receiver), args);
                if (prim_failed_) return {true, 0};
                return {false, r.bits()};
            }
            case State::Reflective: {
                if (!prepare_words(*slot.reflective, words)) return {true, 0};
                Word r = interp_->invoke(*slot.reflective, pinned_.receiver, words, nullptr);
                return {false, r};
            }
            case State::Source: throw ContractViolation("primitive #" + slot.selector + " is not compiled");
            case State::Compiled: break;
        }
        std::shared_ptr<CompiledPrimitive> cp = slot.compiled;
        if (backend == Backend::Native) {
            Oop receiver = Oop::from_bits(pinned_.receiver);
            std::vector<Oop> args;
            for (Word i = 0; i < pinned_.arg_count; ++i) args.push_back(Oop::from_bits(pinned_.args[i]));
            activation_.write_arg_slot(receiver, args);
            push_frame(slot.selector);
            Word status = activation_.invoke(cp->entry);
            pop_frame();
            if (status != kNativeSuccess) return {true, 0};
            return {false, activation_.read_result()};
        }
        if (!prepare_words(cp->method, words)) return {true, 0};
        if (backend == Backend::Ast) {
            Word r = interp_->invoke(cp->methods.at(cp->method.selector), pinned_.receiver, words, &cp->methods);
            return {false, r};
        }
        const auto& fns = backend == Backend::IrSsa ? cp->ssa : cp->tac;
        VmEnv env(*this, fns);
        push_frame(slot.selector);
        struct Pop {
            VM& vm;
            ~Pop() { vm.pop_frame(); }
        } pop{*this};
        Word r = ir::interpret_ir(fns.at(cp->method.selector), words, env, options_.interp, pinned_.receiver);
        return {false, r};
    } catch (const PrimitiveFailed& e) {
        note_vm_error(e.what());
        return {true, 0};
    } catch (const DivisionByZero& e) {
        note_vm_error(e.what());
        return {true, 0};
    }
}

RawOutcome VM::invoke_raw(std::string_view selector, Oop receiver, std::span<const Oop> args,
                          std::optional<Backend> backend) {
    VmScope scope(*this);
    PrimitiveSlot* slot = primitive(selector);
    if (slot == nullptr) throw UnknownSelector(std::string(selector), "");
    ensure_compiled(selector);
    if (args.size() > kMaxPrimitiveArgs)
        throw ArityMismatch("at most " + std::to_string(kMaxPrimitiveArgs) + " primitive arguments");

    if (slot_depth_ > 0) saved_slots_.push_back(pinned_);
    ++slot_depth_;
    struct Restore {
        VM& vm;
        ~Restore() {
            if (--vm.slot_depth_ > 0) {
                vm.pinned_ = vm.saved_slots_.back();
                vm.saved_slots_.pop_back();
            }
        }
    } restore{*this};

    pinned_.receiver = receiver.bits();
    for (std::size_t i = 0; i < kMaxPrimitiveArgs; ++i) pinned_.args[i] = i < args.size() ? args[i].bits() : 0;
    pinned_.arg_count = args.size();
    pinned_.result = 0;
    prim_failed_ = 0;
    RawOutcome out = run_slot(*slot, backend.value_or(options_.backend));
    prim_failed_ = 0;
    return out;
}

Oop VM::call_language(const MethodNode& m, Oop receiver, std::span<const Oop> args) {
    std::vector<Word> words;
    for (std::size_t i = 0; i < args.size(); ++i) {
        VarInfo info = i < m.params.size() ? m.var_info(m.params[i]) : VarInfo{};
        words.push_back(is_int_type(info.type) && !info.by_reference ? untag_int(args[i].bits()) : args[i].bits());
    }
    Word r = interp_->invoke(m, receiver.bits(), words, nullptr);
    return retag(r, m.return_type);
}

Oop VM::call_primitive(std::string_view selector, Oop receiver, std::span<const Oop> args,
                       std::optional<Backend> backend) {
    VmScope scope(*this);
    RawOutcome out = invoke_raw(selector, receiver, args, backend);
    PrimitiveSlot* slot = primitive(selector);
    if (!out.failed) return retag(out.raw, slot->signature.result);
    if (slot->fallback) {
        const MethodNode* m = methods_.find_method(*slot->fallback);
        if (m == nullptr) throw UnknownSelector(*slot->fallback, std::string(selector));
        return call_language(*m, receiver, args);
    }
    throw PrimitiveFailed(std::string(selector));
}

Word VM::send_primitive_words(std::string_view selector, Word receiver, std::span<const Word> args) {
    ensure_compiled(selector);
    PrimitiveSlot* slot = primitive(selector);
    const PrimitiveSignature& sig = slot->signature;
    Oop oops[kMaxPrimitiveArgs];
    if (args.size() > kMaxPrimitiveArgs)
        throw ArityMismatch("at most " + std::to_string(kMaxPrimitiveArgs) + " primitive arguments");
    for (std::size_t i = 0; i < args.size(); ++i) {
        bool tag = i < sig.params.size() && is_int_type(sig.params[i]) && !sig.by_ref[i];
        oops[i] = Oop::from_bits(tag ? tag_int(args[i]) : args[i]);
    }
    std::span<const Oop> oop_args(oops, args.size());
    Oop r;
    if (slot->state == PrimitiveSlot::State::Builtin && !slot->fallback) {
        // VM-internal primitives run in place; no native boundary to cross.
        push_frame(slot->selector);
        struct Pop {
            VM& vm;
            ~Pop() { vm.pop_frame(); }
        } pop{*this};
        prim_failed_ = 0;
        r = slot->builtin(*this, Oop::from_bits(receiver), oop_args);
        if (prim_failed_) {
            prim_failed_ = 0;
            throw PrimitiveFailed(slot->selector);
        }
    } else {
        r = call_primitive(selector, Oop::from_bits(receiver), oop_args);
    }
    return is_int_type(sig.result) ? untag_int(r.bits()) : r.bits();
}

// ---- interpretation ----

Word VM::ast_interpret(const MethodNode& m, Word receiver, std::span<const Word> args) {
    VmScope scope(*this);
    return interp_->invoke(m, receiver, args, nullptr);
}

Word VM::send(std::string_view selector, Word receiver, std::span<const Word> args) {
    VmScope scope(*this);
    return interp_->send(selector, receiver, args, nullptr);
}

std::vector<std::string> VM::call_stack() const { return {frames_.begin(), frames_.end()}; }

bool VM::stack_contains(std::string_view selector) const {
    if (frames_.empty()) return false;
    return std::find(frames_.begin(), frames_.end() - 1, selector) != frames_.end() - 1;
}

Word VM::stack_contains_symbol(Word symbol) {
    ++guard_checks_;
    if (frames_.empty()) return 0;
    for (std::size_t i = 0; i + 1 < frames_.size(); ++i)
        if (symbol_id(frames_[i]) == symbol) return 1;
    return 0;
}

}  // namespace cascade
