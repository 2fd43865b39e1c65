#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/word.hpp"

namespace cascade::x64 {

enum Reg : std::uint8_t {
    rax, rcx, rdx, rbx, rsp, rbp, rsi, rdi,
    r8, r9, r10, r11, r12, r13, r14, r15,
};

std::string_view reg_name(Reg r);

enum class Cond : std::uint8_t {
    b = 0x2, ae = 0x3, e = 0x4, ne = 0x5, be = 0x6, a = 0x7,
    l = 0xc, ge = 0xd, le = 0xe, g = 0xf,
};

enum class RelocKind { Absolute64, Relative32 };

struct Relocation {
    std::size_t offset = 0;  // position of the patched field in the code
    std::string symbol;
    RelocKind kind = RelocKind::Absolute64;
    friend bool operator==(const Relocation&, const Relocation&) = default;
};

/// Bytes written in place of an unpatched absolute address.
inline constexpr Word kAbsPlaceholder = 0xcafebabedeadbeefull;
/// Bytes written in place of an unpatched rel32 displacement.
inline constexpr std::uint32_t kRelPlaceholder = 0xdeadbeefu;

struct Label {
    int id = -1;
};

/// Straight-line x86-64 encoder with local labels. Every emitted instruction
/// also appends a line to the listing.
class Assembler {
public:
    Label new_label();
    void bind(Label l);
    /// Named position in the listing (function or stub start).
    void mark(const std::string& name);

    void push(Reg r);
    void pop(Reg r);
    void push_mem(Reg base, std::int32_t disp);

    void mov(Reg dst, Reg src);
    void mov_imm(Reg dst, Word value);
    void mov_abs(Reg dst, const std::string& symbol);  // imm64 with an absolute relocation
    void load(Reg dst, Reg base, std::int32_t disp);
    void store(Reg base, std::int32_t disp, Reg src);
    void lea(Reg dst, Reg base, std::int32_t disp);

    void add(Reg dst, Reg src);
    void sub(Reg dst, Reg src);
    void and_(Reg dst, Reg src);
    void or_(Reg dst, Reg src);
    void xor_(Reg dst, Reg src);
    void cmp(Reg a, Reg b);
    void test(Reg a, Reg b);
    void imul(Reg dst, Reg src);
    void add_imm(Reg dst, std::int32_t imm);
    void sub_imm(Reg dst, std::int32_t imm);
    void and_imm(Reg dst, std::int32_t imm);
    void cmp_imm(Reg r, std::int32_t imm);
    void cmp_mem_imm(Reg base, std::int32_t disp, std::int32_t imm);
    void test_low_bit(Reg r);  // test r8 low byte with 1 (rax..rbx only)

    void div(Reg src);
    void idiv(Reg src);
    void neg(Reg r);
    void cqo();
    void shl_cl(Reg r);
    void shr_cl(Reg r);
    void sar_cl(Reg r);
    void sar1(Reg r);
    void shl_imm(Reg r, std::uint8_t n);
    void setcc(Cond c, Reg r);  // setcc + zero-extend into the full register

    void jmp(Label l);
    void jcc(Cond c, Label l);
    void call_rel(const std::string& symbol);  // rel32 relocation
    void call(Reg r);
    void ret();

    std::size_t size() const { return code_.size(); }
    const std::vector<std::uint8_t>& code() const { return code_; }
    const std::vector<Relocation>& relocations() const { return relocs_; }
    const std::vector<std::string>& listing() const { return listing_; }

    /// Resolve local label fixups. Throws if a used label was never bound.
    void finish();

private:
    void byte(std::uint8_t b) { code_.push_back(b); }
    void u32(std::uint32_t v);
    void u64(Word v);
    void rex(bool w, Reg reg, Reg base);
    void modrm_reg(std::uint8_t op, Reg reg, Reg rm, bool w = true);
    void modrm_mem(std::uint8_t op, Reg reg, Reg base, std::int32_t disp);
    void group(std::uint8_t op, std::uint8_t ext, Reg rm);
    void note(std::size_t start, std::string text);

    struct Fixup {
        std::size_t at;
        int label;
    };

    std::vector<std::uint8_t> code_;
    std::vector<Relocation> relocs_;
    std::vector<std::string> listing_;
    std::vector<std::int64_t> labels_;
    std::vector<Fixup> fixups_;
};

std::string mem_text(Reg base, std::int32_t disp);

}  // namespace cascade::x64
