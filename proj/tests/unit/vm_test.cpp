#include <gtest/gtest.h>

#include <charconv>
#include <cstdio>
#include <fstream>

#include "cascade/bench.hpp"
#include "cascade/errors.hpp"
#include "cascade/frontend.hpp"
#include "cascade/symbols.hpp"
#include "cascade/vm.hpp"

using namespace cascade;

namespace {

std::string hex(Word w) {
    char buf[20];
    auto r = std::to_chars(buf, buf + sizeof buf, w, 16);
    return std::string(buf, r.ptr);
}

}  // namespace

// ---- lazy compilation ----

TEST(Lazy, CompilesOnceOnFirstCall) {
    VM vm;
    MemorySink sink;
    vm.set_sink(&sink);
    install_basicnew(vm, kWaterfallInstrumented);
    Oop point = vm.class_named("Point");
    EXPECT_EQ(vm.primitive("basicNew")->compile_count, 0);
    EXPECT_EQ(vm.primitive("basicNew")->state, PrimitiveSlot::State::Source);
    Oop first = vm.call_primitive("basicNew", point, {});
    EXPECT_EQ(vm.primitive("basicNew")->compile_count, 1);
    EXPECT_EQ(vm.primitive("basicNew")->state, PrimitiveSlot::State::Compiled);
    EXPECT_EQ(Heap::class_id_of(first), untag_int(Heap::slot(point, 0)));
    vm.call_primitive("basicNew", point, {});
    EXPECT_EQ(vm.primitive("basicNew")->compile_count, 1);
}

TEST(Lazy, InstrumentedBasicNewPrintsThenAllocates) {
    VM vm;
    MemorySink sink;
    vm.set_sink(&sink);
    install_basicnew(vm, kWaterfallInstrumented);
    Oop point = vm.class_named("Point");
    std::uint64_t before = vm.heap().allocations();
    Oop obj = vm.call_primitive("basicNew", point, {});
    EXPECT_EQ(vm.heap().allocations(), before + 1);
    EXPECT_TRUE(vm.heap().is_movable(obj));
    // the printed oop is the one at stack slot 0
    EXPECT_EQ(sink.text(), hex(point.bits()) + "\n");
}

TEST(Lazy, UnknownSendIsCompileErrorWithoutStateChange) {
    VM vm;
    vm.install_primitive({"Slang", "", "broken ^ self nowhere"});
    try {
        vm.ensure_compiled("broken");
        FAIL();
    } catch (const CompileError& e) {
        EXPECT_EQ(e.stage(), "reachability");
    }
    EXPECT_EQ(vm.primitive("broken")->state, PrimitiveSlot::State::Source);
    EXPECT_EQ(vm.primitive("broken")->compile_count, 0);
}

TEST(Lazy, DirtyRecompilesOnce) {
    VM vm;
    vm.install_primitive({"Slang", "", "f: x ^ x + 1"});
    Oop two = Oop::from_int(2);
    EXPECT_EQ(vm.call_primitive("f:", vm.nil(), std::span<const Oop>(&two, 1)).to_int(), 3);
    vm.update_source("f:", "f: x ^ x + 10");
    vm.mark_dirty("f:");
    vm.mark_dirty("f:");
    EXPECT_EQ(vm.call_primitive("f:", vm.nil(), std::span<const Oop>(&two, 1)).to_int(), 12);
    EXPECT_EQ(vm.call_primitive("f:", vm.nil(), std::span<const Oop>(&two, 1)).to_int(), 12);
    EXPECT_EQ(vm.primitive("f:")->compile_count, 2);
}

TEST(Lazy, FailedPrimitiveRunsFallback) {
    VM vm;
    vm.add_source("safeDiv: a by: b ^ 0");
    vm.install_primitive({"Slang", "", "safeDiv: a by: b ^ a // b"}, std::string("safeDiv:by:"));
    Oop args[] = {Oop::from_int(9), Oop::from_int(0)};
    EXPECT_EQ(vm.call_primitive("safeDiv:by:", vm.nil(), args).to_int(), 0);
    Oop ok[] = {Oop::from_int(9), Oop::from_int(3)};
    EXPECT_EQ(vm.call_primitive("safeDiv:by:", vm.nil(), ok).to_int(), 3);
}

// ---- interpreter ----

TEST(Interpreter, Double) {
    VM vm;
    MethodNode m = compile_front({"Slang", "", "double: x ^ x + x"});
    Word arg = 21;
    EXPECT_EQ(vm.ast_interpret(m, vm.nil().bits(), std::span<const Word>(&arg, 1)), 42u);
}

TEST(Interpreter, StepBudget) {
    VmOptions o;
    o.interp.step_budget = 10'000;
    VM vm(o);
    MethodNode m = compile_front({"Slang", "", "spin [true] whileTrue: [0]. ^ 0"});
    EXPECT_THROW(vm.ast_interpret(m, vm.nil().bits(), {}), StepBudgetExceeded);
    // the budget is per top-level activation
    MethodNode ok = compile_front({"Slang", "", "ok ^ 1"});
    EXPECT_EQ(vm.ast_interpret(ok, vm.nil().bits(), {}), 1u);
}

TEST(Interpreter, SendsReachLanguageMethodsAndPrimitives) {
    VM vm;
    vm.add_source("twice: x ^ (self inc: x) + (self inc: x)");
    vm.install_primitive({"Slang", "", "inc: x ^ x + 1"});
    Word arg = 4;
    EXPECT_EQ(vm.send("twice:", vm.nil().bits(), std::span<const Word>(&arg, 1)), 10u);
    EXPECT_THROW(vm.send("nowhere", vm.nil().bits(), {}), UnknownSelector);
}

// ---- recursion guard ----

TEST(Guard, StackQueries) {
    std::vector<std::string> stack{"main", "basicNew", "print", "basicNew"};
    EXPECT_TRUE(guard_check(stack, "basicNew"));
    EXPECT_FALSE(guard_check(std::vector<std::string>{"main"}, "basicNew"));
    EXPECT_FALSE(guard_check(std::vector<std::string>{}, "basicNew"));
    EXPECT_FALSE(guard_check(std::vector<std::string>{"main", "basicNew"}, "basicNew"));
}

TEST(Guard, CallStackIsVisibleToBuiltins) {
    VM vm;
    std::vector<std::string> seen;
    vm.install_builtin("probe", [&](VM& v, Oop, std::span<const Oop>) {
        seen = v.call_stack();
        return v.nil();
    });
    vm.add_source("outer ^ self probe");
    vm.send("outer", vm.nil().bits(), {});
    EXPECT_EQ(seen, (std::vector<std::string>{"outer", "probe"}));
    EXPECT_TRUE(vm.call_stack().empty());
}

// ---- symbols ----

TEST(Symbols, InternalRegistrations) {
    VM vm;
    EXPECT_EQ(vm.symbols().resolve("primitiveNew"), reinterpret_cast<Word>(vm.vm_function("primitiveNew")->address));
    EXPECT_EQ(vm.symbols().resolve(kArgSlotSymbol), reinterpret_cast<Word>(&vm.pinned()));
    EXPECT_THROW(vm.symbols().resolve("no_such_fn"), SymbolNotFound);
}

TEST(Symbols, MapLines) {
    auto entries = parse_symbol_map("0000000000401120 T printOop\n");
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0].name, "printOop");
    EXPECT_EQ(entries[0].address, 0x401120u);
    EXPECT_TRUE(parse_symbol_map("                 U externref\n").empty());
    EXPECT_THROW(parse_symbol_map("zzzz T broken\n"), MapParseError);
    EXPECT_EQ(parse_symbol_map("# comment\n00000000000000ff d data_sym\n0000000000000010 r ro\n").size(), 1u);
}

TEST(Symbols, MapFileRoundTrip) {
    auto path = std::filesystem::temp_directory_path() / "cascade-symbols-test.map";
    {
        std::ofstream f(path);
        f << "0000000000abc000 T onlyInMap\n0000000000000001 T primitiveNew\n";
    }
    VM vm;
    Word internal = vm.symbols().resolve("primitiveNew");
    vm.symbols().merge(load_symbol_map(path));
    EXPECT_EQ(vm.symbols().resolve("onlyInMap"), 0xabc000u);
    EXPECT_EQ(vm.symbols().resolve("primitiveNew"), internal);
    std::filesystem::remove(path);
}

// ---- native activation ----

namespace {

NativeActivation* g_activation = nullptr;
std::uintptr_t g_entry = 0;
bool g_reentered = false;

// VM function that tries to start a second activation while the first is
// running. The error must be caught here, never unwound through native code.
Word reenter(Word x) {
    try {
        g_activation->invoke(g_entry);
    } catch (const ActivationReentered&) {
        g_reentered = true;
    }
    return x + 1;
}

}  // namespace

TEST(Activation, CompiledAdd) {
    VM vm;
    vm.install_primitive({"Slang", "", "add: a with: b ^ a + b"});
    vm.ensure_compiled("add:with:");
    NativeActivation act(vm.symbols(), vm.pinned());
    Oop args[] = {Oop::from_int(2), Oop::from_int(3)};
    EXPECT_EQ(native_activation(act, vm.primitive("add:with:")->compiled->entry, vm.nil(), args), 5u);
}

TEST(Activation, InvokeBeforeWriteIsContractViolation) {
    VM vm;
    vm.install_primitive({"Slang", "", "one ^ 1"});
    vm.ensure_compiled("one");
    NativeActivation act(vm.symbols(), vm.pinned());
    EXPECT_THROW(act.invoke(vm.primitive("one")->compiled->entry), ContractViolation);
    EXPECT_THROW(act.read_result(), ContractViolation);
}

TEST(Activation, SecondConcurrentInvokeIsRejected) {
    VM vm;
    vm.register_vm_function("reenter", 1, false, reinterpret_cast<const void*>(&reenter));
    vm.install_primitive({"Slang", "", "f: x ^ self callVMFunction: #reenter withArguments: {x}"});
    vm.ensure_compiled("f:");
    NativeActivation act(vm.symbols(), vm.pinned());
    g_activation = &act;
    g_entry = vm.primitive("f:")->compiled->entry;
    g_reentered = false;
    VmScope scope(vm);
    Oop arg = Oop::from_int(41);
    EXPECT_EQ(native_activation(act, g_entry, vm.nil(), std::span<const Oop>(&arg, 1)), 42u);
    EXPECT_TRUE(g_reentered);
    EXPECT_FALSE(act.in_flight());
}

TEST(Activation, VmFunctionFailureSurfacesAsPrimitiveFailed) {
    VM vm;
    vm.install_primitive({"Slang", "", "f ^ self callVMFunction: #primitiveFail withArguments: {}"});
    EXPECT_THROW(vm.call_primitive("f", vm.nil(), {}), PrimitiveFailed);
    // the VM stays usable
    vm.install_primitive({"Slang", "", "g ^ 3"});
    EXPECT_EQ(vm.call_primitive("g", vm.nil(), {}).to_int(), 3);
}

TEST(Activation, ArgumentCountChecked) {
    VM vm;
    vm.install_primitive({"Slang", "", "f: x ^ x"});
    EXPECT_TRUE(vm.invoke_raw("f:", vm.nil(), {}, Backend::Native).failed);
}

TEST(Activation, NonIntegerWordArgumentFails) {
    VM vm;
    vm.install_primitive({"Slang", "", "f: x ^ x"});
    Oop obj = vm.instantiate(vm.class_named("Point"));
    for (Backend b : {Backend::Native, Backend::IrTac, Backend::IrSsa, Backend::Ast})
        EXPECT_TRUE(vm.invoke_raw("f:", vm.nil(), std::span<const Oop>(&obj, 1), b).failed) << backend_name(b);
}

TEST(Activation, StackAtBoundsChecked) {
    VM vm;
    vm.install_primitive({"Slang", "", "f: i ^ self stackAt: i"});
    for (Backend b : {Backend::Native, Backend::IrTac, Backend::IrSsa, Backend::Ast}) {
        Oop nine = Oop::from_int(9);
        EXPECT_TRUE(vm.invoke_raw("f:", vm.nil(), std::span<const Oop>(&nine, 1), b).failed) << backend_name(b);
        Oop one = Oop::from_int(1);
        auto ok = vm.invoke_raw("f:", vm.nil(), std::span<const Oop>(&one, 1), b);
        EXPECT_FALSE(ok.failed);
        EXPECT_EQ(ok.raw, one.bits()) << backend_name(b);
    }
}

// ---- backends ----

TEST(Backend, Names) {
    EXPECT_EQ(backend_from_name("ir"), Backend::IrSsa);
    EXPECT_EQ(backend_from_name("native"), Backend::Native);
    EXPECT_EQ(backend_from_name("ast"), Backend::Ast);
    EXPECT_FALSE(backend_from_name("jit").has_value());
    for (Backend b : {Backend::Native, Backend::IrTac, Backend::IrSsa, Backend::Ast})
        EXPECT_EQ(backend_from_name(backend_name(b)), b);
}
