#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cascade/word.hpp"

namespace cascade {

/// Value interpretation of a Slang variable. Storage is always one word.
enum class BasicType { Word, SignedWord, OopRef, Address };

std::string_view basic_type_name(BasicType type);
std::optional<BasicType> basic_type_from_name(std::string_view name);

struct SourcePos {
    int line = 0;
    int column = 0;
};

/// Owning pointer with value semantics, for recursive AST nodes.
template <class T>
class Box {
public:
    Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
    Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
    Box(Box&&) noexcept = default;
    Box& operator=(const Box& other) {
        if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;
    ~Box() = default;

    T& operator*() { return *ptr_; }
    const T& operator*() const { return *ptr_; }
    T* operator->() { return ptr_.get(); }
    const T* operator->() const { return ptr_.get(); }

    friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

private:
    std::unique_ptr<T> ptr_;
};

struct Expr;
struct Statement;

struct LiteralExpr {
    enum class Kind { Integer, Character, Symbol, Nil, True, False };
    Kind kind = Kind::Integer;
    Word value = 0;
    std::string text;  // symbol name for symbols, empty otherwise
    friend bool operator==(const LiteralExpr&, const LiteralExpr&) = default;
};

struct VarRefExpr {
    std::string name;
    friend bool operator==(const VarRefExpr&, const VarRefExpr&) = default;
};

struct SendExpr {
    Box<Expr> receiver;
    std::string selector;
    std::vector<Expr> args;
    /// Set by annotate_types: the operation uses signed semantics.
    bool is_signed = false;
    friend bool operator==(const SendExpr& a, const SendExpr& b);
};

struct BlockExpr {
    std::vector<std::string> params;
    std::vector<std::string> temps;
    std::vector<Statement> body;
    friend bool operator==(const BlockExpr& a, const BlockExpr& b);
};

/// `self callVMFunction: #name withArguments: {args}`
struct VmCallExpr {
    std::string function;
    std::vector<Expr> args;
    friend bool operator==(const VmCallExpr& a, const VmCallExpr& b);
};

struct Expr {
    std::variant<LiteralExpr, VarRefExpr, SendExpr, BlockExpr, VmCallExpr> node;
    SourcePos pos;

    template <class T>
    const T* as() const { return std::get_if<T>(&node); }
    template <class T>
    T* as() { return std::get_if<T>(&node); }

    /// Structural equality; source positions are ignored.
    friend bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }
};

struct AssignStmt {
    std::string target;
    Expr value;
    friend bool operator==(const AssignStmt&, const AssignStmt&) = default;
};

struct ReturnStmt {
    Expr value;
    friend bool operator==(const ReturnStmt&, const ReturnStmt&) = default;
};

struct ExprStmt {
    Expr value;
    friend bool operator==(const ExprStmt&, const ExprStmt&) = default;
};

struct Statement {
    std::variant<AssignStmt, ReturnStmt, ExprStmt> node;
    SourcePos pos;

    template <class T>
    const T* as() const { return std::get_if<T>(&node); }

    friend bool operator==(const Statement& a, const Statement& b) { return a.node == b.node; }
};

inline bool operator==(const SendExpr& a, const SendExpr& b) {
    return a.receiver == b.receiver && a.selector == b.selector && a.args == b.args &&
           a.is_signed == b.is_signed;
}
inline bool operator==(const BlockExpr& a, const BlockExpr& b) {
    return a.params == b.params && a.temps == b.temps && a.body == b.body;
}
inline bool operator==(const VmCallExpr& a, const VmCallExpr& b) {
    return a.function == b.function && a.args == b.args;
}

struct PragmaNode {
    enum class Kind {
        Primitive,       // <primitive>
        TypeAnnotation,  // <var: #x type: #int ref: true>
        ReturnType,      // <returns: #oop>
    };
    Kind kind = Kind::Primitive;
    std::string var_name;
    BasicType type = BasicType::Word;
    bool by_reference = false;
    SourcePos pos;

    friend bool operator==(const PragmaNode& a, const PragmaNode& b) {
        return a.kind == b.kind && a.var_name == b.var_name && a.type == b.type &&
               a.by_reference == b.by_reference;
    }
};

struct VarInfo {
    BasicType type = BasicType::Word;
    bool by_reference = false;
    friend bool operator==(const VarInfo&, const VarInfo&) = default;
};

struct MethodNode {
    std::string class_name;
    std::string selector;
    std::vector<std::string> params;
    std::vector<PragmaNode> pragmas;
    std::vector<std::string> temps;
    std::vector<Statement> body;

    // Filled by annotate_types.
    bool annotated = false;
    std::map<std::string, VarInfo, std::less<>> var_types;
    BasicType return_type = BasicType::Word;

    bool is_primitive() const;
    /// Type of a method-level variable (param or temp). Word if unannotated.
    VarInfo var_info(std::string_view name) const;
    bool declares(std::string_view name) const;

    friend bool operator==(const MethodNode&, const MethodNode&) = default;
};

/// One method of source text, keyed by its owner and selector.
struct SourceMethod {
    std::string class_name;
    std::string selector;
    std::string source;
};

/// Number of arguments a selector takes: colon count for keywords, one for
/// binary operators, zero for unary selectors.
int selector_arity(std::string_view selector);
bool is_binary_selector(std::string_view selector);

}  // namespace cascade
