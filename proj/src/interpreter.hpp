#pragma once

// Tree-walking evaluator for Slang methods. Mirrors the lowering exactly:
// inlined control templates, word arithmetic, methods without a return
// answer self.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascade/ast.hpp"
#include "cascade/heap.hpp"

namespace cascade {

class VM;

using MethodMap = std::map<std::string, MethodNode, std::less<>>;

class Interpreter {
public:
    static constexpr std::size_t kMaxDepth = 1000;

    explicit Interpreter(VM& vm) : vm_(vm) {}

    /// Run `m`. Sends resolve against `scope` first, then the VM's methods,
    /// then primitive slots.
    Word invoke(const MethodNode& m, Word receiver, std::span<const Word> args, const MethodMap* scope);
    Word send(std::string_view selector, Word receiver, std::span<const Word> args, const MethodMap* scope);

    void visit_roots(const Heap::RootVisitor& visit);
    std::size_t depth() const { return frames_.size(); }

private:
    struct Var {
        std::string_view name;
        Word value = 0;
        bool oop = false;
    };
    struct Frame {
        const MethodNode* method = nullptr;
        Word receiver = 0;
        std::vector<Var> vars;
        const MethodMap* scope = nullptr;
        bool returning = false;
        Word result = 0;
    };

    std::optional<Word> statements(Frame& f, const std::vector<Statement>& body);
    Word eval(Frame& f, const Expr& e);
    Word eval_send(Frame& f, const SendExpr& s);
    Word eval_control(Frame& f, const SendExpr& s);
    Word eval_template(const SendExpr& s, std::span<const Word> ops);
    std::optional<Word> inline_block(Frame& f, const BlockExpr& b, std::span<const Word> params);
    Word* lookup(Frame& f, std::string_view name);
    void tick();
    std::size_t max_depth() const;

    VM& vm_;
    std::vector<Frame*> frames_;
    std::uint64_t steps_ = 0;
};

}  // namespace cascade
