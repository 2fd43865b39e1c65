#include <cstdio>

#include "cascade/errors.hpp"
#include "cascade/x64.hpp"

namespace cascade::x64 {

std::string_view reg_name(Reg r) {
    static constexpr std::string_view kNames[] = {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
                                                  "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};
    return kNames[r];
}

namespace {

std::string_view cond_name(Cond c) {
    switch (c) {
        case Cond::b: return "b";
        case Cond::ae: return "ae";
        case Cond::e: return "e";
        case Cond::ne: return "ne";
        case Cond::be: return "be";
        case Cond::a: return "a";
        case Cond::l: return "l";
        case Cond::ge: return "ge";
        case Cond::le: return "le";
        case Cond::g: return "g";
    }
    return "?";
}

std::string hex(Word v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string r(Reg x) { return std::string(reg_name(x)); }

}  // namespace

std::string mem_text(Reg base, std::int32_t disp) {
    std::string s = "[" + r(base);
    if (disp > 0) s += "+" + std::to_string(disp);
    if (disp < 0) s += std::to_string(disp);
    return s + "]";
}

Label Assembler::new_label() {
    labels_.push_back(-1);
    return Label{static_cast<int>(labels_.size()) - 1};
}

void Assembler::bind(Label l) {
    labels_.at(l.id) = static_cast<std::int64_t>(code_.size());
    listing_.push_back(".l" + std::to_string(l.id) + ":");
}

void Assembler::mark(const std::string& name) { listing_.push_back(name + ":"); }

void Assembler::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Assembler::u64(Word v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Assembler::note(std::size_t start, std::string text) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%04zx  ", start);
    listing_.push_back(prefix + text);
}

void Assembler::rex(bool w, Reg reg, Reg base) {
    std::uint8_t b = 0x40;
    if (w) b |= 0x08;
    if (reg & 8) b |= 0x04;
    if (base & 8) b |= 0x01;
    if (b != 0x40) byte(b);
}

// op r/m, reg  with a register r/m.
void Assembler::modrm_reg(std::uint8_t op, Reg reg, Reg rm, bool w) {
    rex(w, reg, rm);
    byte(op);
    byte(static_cast<std::uint8_t>(0xc0 | ((reg & 7) << 3) | (rm & 7)));
}

// op with a [base+disp32] memory operand. Always disp32 so sizes are fixed.
void Assembler::modrm_mem(std::uint8_t op, Reg reg, Reg base, std::int32_t disp) {
    rex(true, reg, base);
    byte(op);
    byte(static_cast<std::uint8_t>(0x80 | ((reg & 7) << 3) | (base & 7)));
    if ((base & 7) == 4) byte(0x24);  // SIB for rsp/r12
    u32(static_cast<std::uint32_t>(disp));
}

// Opcode-extension group with a register operand (F7 /6 etc).
void Assembler::group(std::uint8_t op, std::uint8_t ext, Reg rm) {
    rex(true, Reg{0}, rm);
    byte(op);
    byte(static_cast<std::uint8_t>(0xc0 | (ext << 3) | (rm & 7)));
}

void Assembler::push(Reg x) {
    auto at = size();
    if (x & 8) byte(0x41);
    byte(static_cast<std::uint8_t>(0x50 + (x & 7)));
    note(at, "push " + r(x));
}

void Assembler::pop(Reg x) {
    auto at = size();
    if (x & 8) byte(0x41);
    byte(static_cast<std::uint8_t>(0x58 + (x & 7)));
    note(at, "pop " + r(x));
}

void Assembler::push_mem(Reg base, std::int32_t disp) {
    auto at = size();
    if (base & 8) byte(0x41);
    byte(0xff);
    byte(static_cast<std::uint8_t>(0x80 | (6 << 3) | (base & 7)));
    if ((base & 7) == 4) byte(0x24);
    u32(static_cast<std::uint32_t>(disp));
    note(at, "push qword " + mem_text(base, disp));
}

void Assembler::mov(Reg dst, Reg src) {
    auto at = size();
    modrm_reg(0x89, src, dst);
    note(at, "mov " + r(dst) + ", " + r(src));
}

void Assembler::mov_imm(Reg dst, Word value) {
    auto at = size();
    auto sv = static_cast<SignedWord>(value);
    if (sv >= INT32_MIN && sv <= INT32_MAX) {
        rex(true, Reg{0}, dst);
        byte(0xc7);
        byte(static_cast<std::uint8_t>(0xc0 | (dst & 7)));
        u32(static_cast<std::uint32_t>(value));
    } else {
        rex(true, Reg{0}, dst);
        byte(static_cast<std::uint8_t>(0xb8 + (dst & 7)));
        u64(value);
    }
    note(at, "mov " + r(dst) + ", " + (sv < 0 && sv >= INT32_MIN ? std::to_string(sv) : hex(value)));
}

void Assembler::mov_abs(Reg dst, const std::string& symbol) {
    auto at = size();
    rex(true, Reg{0}, dst);
    byte(static_cast<std::uint8_t>(0xb8 + (dst & 7)));
    relocs_.push_back(Relocation{size(), symbol, RelocKind::Absolute64});
    u64(kAbsPlaceholder);
    note(at, "mov " + r(dst) + ", @" + symbol);
}

void Assembler::load(Reg dst, Reg base, std::int32_t disp) {
    auto at = size();
    modrm_mem(0x8b, dst, base, disp);
    note(at, "mov " + r(dst) + ", " + mem_text(base, disp));
}

void Assembler::store(Reg base, std::int32_t disp, Reg src) {
    auto at = size();
    modrm_mem(0x89, src, base, disp);
    note(at, "mov " + mem_text(base, disp) + ", " + r(src));
}

void Assembler::lea(Reg dst, Reg base, std::int32_t disp) {
    auto at = size();
    modrm_mem(0x8d, dst, base, disp);
    note(at, "lea " + r(dst) + ", " + mem_text(base, disp));
}

#define CASCADE_ALU(name, opcode, text)                       \
    void Assembler::name(Reg dst, Reg src) {                  \
        auto at = size();                                     \
        modrm_reg(opcode, src, dst);                          \
        note(at, text " " + r(dst) + ", " + r(src));          \
    }
CASCADE_ALU(add, 0x01, "add")
CASCADE_ALU(sub, 0x29, "sub")
CASCADE_ALU(and_, 0x21, "and")
CASCADE_ALU(or_, 0x09, "or")
CASCADE_ALU(xor_, 0x31, "xor")
CASCADE_ALU(cmp, 0x39, "cmp")
CASCADE_ALU(test, 0x85, "test")
#undef CASCADE_ALU

void Assembler::imul(Reg dst, Reg src) {
    auto at = size();
    rex(true, dst, src);
    byte(0x0f);
    byte(0xaf);
    byte(static_cast<std::uint8_t>(0xc0 | ((dst & 7) << 3) | (src & 7)));
    note(at, "imul " + r(dst) + ", " + r(src));
}

namespace {
constexpr std::uint8_t kAddExt = 0, kOrExt = 1, kAndExt = 4, kSubExt = 5, kCmpExt = 7;
}

void Assembler::add_imm(Reg dst, std::int32_t imm) {
    auto at = size();
    group(0x81, kAddExt, dst);
    u32(static_cast<std::uint32_t>(imm));
    note(at, "add " + r(dst) + ", " + std::to_string(imm));
}

void Assembler::sub_imm(Reg dst, std::int32_t imm) {
    auto at = size();
    group(0x81, kSubExt, dst);
    u32(static_cast<std::uint32_t>(imm));
    note(at, "sub " + r(dst) + ", " + std::to_string(imm));
}

void Assembler::and_imm(Reg dst, std::int32_t imm) {
    auto at = size();
    group(0x81, kAndExt, dst);
    u32(static_cast<std::uint32_t>(imm));
    note(at, "and " + r(dst) + ", " + std::to_string(imm));
}

void Assembler::cmp_imm(Reg x, std::int32_t imm) {
    auto at = size();
    group(0x81, kCmpExt, x);
    u32(static_cast<std::uint32_t>(imm));
    note(at, "cmp " + r(x) + ", " + std::to_string(imm));
}

void Assembler::cmp_mem_imm(Reg base, std::int32_t disp, std::int32_t imm) {
    auto at = size();
    modrm_mem(0x81, Reg{kCmpExt}, base, disp);
    u32(static_cast<std::uint32_t>(imm));
    note(at, "cmp qword " + mem_text(base, disp) + ", " + std::to_string(imm));
}

void Assembler::test_low_bit(Reg x) {
    if (x > rbx) throw Error("test_low_bit needs a legacy byte register");
    auto at = size();
    byte(0xf6);
    byte(static_cast<std::uint8_t>(0xc0 | (x & 7)));
    byte(0x01);
    note(at, "test " + std::string(reg_name(x)).substr(1, 1) + "l, 1");
}

void Assembler::div(Reg src) {
    auto at = size();
    group(0xf7, 6, src);
    note(at, "div " + r(src));
}

void Assembler::idiv(Reg src) {
    auto at = size();
    group(0xf7, 7, src);
    note(at, "idiv " + r(src));
}

void Assembler::neg(Reg x) {
    auto at = size();
    group(0xf7, 3, x);
    note(at, "neg " + r(x));
}

void Assembler::cqo() {
    auto at = size();
    byte(0x48);
    byte(0x99);
    note(at, "cqo");
}

void Assembler::shl_cl(Reg x) {
    auto at = size();
    group(0xd3, 4, x);
    note(at, "shl " + r(x) + ", cl");
}

void Assembler::shr_cl(Reg x) {
    auto at = size();
    group(0xd3, 5, x);
    note(at, "shr " + r(x) + ", cl");
}

void Assembler::sar_cl(Reg x) {
    auto at = size();
    group(0xd3, 7, x);
    note(at, "sar " + r(x) + ", cl");
}

void Assembler::sar1(Reg x) {
    auto at = size();
    group(0xd1, 7, x);
    note(at, "sar " + r(x) + ", 1");
}

void Assembler::shl_imm(Reg x, std::uint8_t n) {
    auto at = size();
    group(0xc1, 4, x);
    byte(n);
    note(at, "shl " + r(x) + ", " + std::to_string(n));
}

void Assembler::setcc(Cond c, Reg x) {
    if (x > rbx) throw Error("setcc needs a legacy byte register");
    auto at = size();
    byte(0x0f);
    byte(static_cast<std::uint8_t>(0x90 + static_cast<std::uint8_t>(c)));
    byte(static_cast<std::uint8_t>(0xc0 | (x & 7)));
    // movzx r32, r8
    byte(0x0f);
    byte(0xb6);
    byte(static_cast<std::uint8_t>(0xc0 | ((x & 7) << 3) | (x & 7)));
    note(at, "set" + std::string(cond_name(c)) + " " + r(x));
}

void Assembler::jmp(Label l) {
    auto at = size();
    byte(0xe9);
    fixups_.push_back(Fixup{size(), l.id});
    u32(0);
    note(at, "jmp .l" + std::to_string(l.id));
}

void Assembler::jcc(Cond c, Label l) {
    auto at = size();
    byte(0x0f);
    byte(static_cast<std::uint8_t>(0x80 + static_cast<std::uint8_t>(c)));
    fixups_.push_back(Fixup{size(), l.id});
    u32(0);
    note(at, "j" + std::string(cond_name(c)) + " .l" + std::to_string(l.id));
}

void Assembler::call_rel(const std::string& symbol) {
    auto at = size();
    byte(0xe8);
    relocs_.push_back(Relocation{size(), symbol, RelocKind::Relative32});
    u32(kRelPlaceholder);
    note(at, "call #" + symbol);
}

void Assembler::call(Reg x) {
    auto at = size();
    if (x & 8) byte(0x41);
    byte(0xff);
    byte(static_cast<std::uint8_t>(0xd0 | (x & 7)));
    note(at, "call " + r(x));
}

void Assembler::ret() {
    auto at = size();
    byte(0xc3);
    note(at, "ret");
}

void Assembler::finish() {
    for (const auto& f : fixups_) {
        std::int64_t target = labels_.at(f.label);
        if (target < 0) throw Error("assembler: unbound label .l" + std::to_string(f.label));
        auto rel = static_cast<std::int32_t>(target - static_cast<std::int64_t>(f.at + 4));
        for (int i = 0; i < 4; ++i) code_[f.at + i] = static_cast<std::uint8_t>(static_cast<std::uint32_t>(rel) >> (8 * i));
    }
    fixups_.clear();
}

}  // namespace cascade::x64
