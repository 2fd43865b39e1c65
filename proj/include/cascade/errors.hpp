#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace cascade {

/// Root of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- frontend ----

class ParseError : public Error {
public:
    ParseError(int line, int column, const std::string& message)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line), column_(column), detail_(message) {}
    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& detail() const { return detail_; }

private:
    int line_;
    int column_;
    std::string detail_;
};

class PragmaPlacementError : public ParseError {
public:
    PragmaPlacementError(int line, int column)
        : ParseError(line, column, "pragma after a statement") {}
};

class UnsupportedIdiom : public Error {
public:
    explicit UnsupportedIdiom(std::string name)
        : Error("unsupported inlined-C idiom: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UnknownVariableInPragma : public Error {
public:
    explicit UnknownVariableInPragma(std::string name)
        : Error("type pragma names unknown variable: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

// ---- reachability / lowering ----

class UnknownSelector : public Error {
public:
    UnknownSelector(std::string selector, std::string caller)
        : Error("unknown selector #" + selector + (caller.empty() ? "" : " sent from #" + caller)),
          selector_(std::move(selector)), caller_(std::move(caller)) {}
    const std::string& selector() const { return selector_; }
    const std::string& caller() const { return caller_; }

private:
    std::string selector_;
    std::string caller_;
};

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(std::string name)
        : Error("unknown variable: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class BlockMisuse : public Error {
public:
    using Error::Error;
};

class ArityMismatch : public Error {
public:
    using Error::Error;
};

// ---- execution ----

class DivisionByZero : public Error {
public:
    DivisionByZero() : Error("division by zero") {}
};

class UnresolvedVmFunction : public Error {
public:
    explicit UnresolvedVmFunction(std::string name)
        : Error("unresolved VM function: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class StepBudgetExceeded : public Error {
public:
    explicit StepBudgetExceeded(std::size_t budget)
        : Error("step budget of " + std::to_string(budget) + " exceeded") {}
};

class StackDepthExceeded : public Error {
public:
    explicit StackDepthExceeded(std::size_t depth)
        : Error("activation depth limit of " + std::to_string(depth) + " exceeded") {}
};

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message, std::exception_ptr inner = nullptr)
        : Error("stage " + stage + ": " + message), stage_(std::move(stage)), inner_(inner) {}
    const std::string& stage() const { return stage_; }
    std::exception_ptr inner() const { return inner_; }

private:
    std::string stage_;
    std::exception_ptr inner_;
};

// ---- codegen ----

class UnresolvedSymbol : public Error {
public:
    explicit UnresolvedSymbol(std::string name)
        : Error("unresolved symbol: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UnsupportedInstr : public Error {
public:
    using Error::Error;
};

// ---- runtime ----

class OutOfMemory : public Error {
public:
    explicit OutOfMemory(std::size_t bytes)
        : Error("out of memory allocating " + std::to_string(bytes) + " bytes") {}
};

class CompileError : public Error {
public:
    CompileError(std::string stage, std::string detail)
        : Error("compile error in " + stage + ": " + detail),
          stage_(std::move(stage)), detail_(std::move(detail)) {}
    const std::string& stage() const { return stage_; }
    const std::string& detail() const { return detail_; }

private:
    std::string stage_;
    std::string detail_;
};

class PrimitiveFailed : public Error {
public:
    explicit PrimitiveFailed(std::string selector)
        : Error("primitive failed: #" + selector), selector_(std::move(selector)) {}
    const std::string& selector() const { return selector_; }

private:
    std::string selector_;
};

class SymbolNotFound : public Error {
public:
    explicit SymbolNotFound(std::string name)
        : Error("symbol not found: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class MapParseError : public Error {
public:
    MapParseError(std::size_t line_no, const std::string& why)
        : Error("symbol map line " + std::to_string(line_no) + ": " + why), line_no_(line_no) {}
    std::size_t line_no() const { return line_no_; }

private:
    std::size_t line_no_;
};

class ActivationReentered : public Error {
public:
    ActivationReentered() : Error("native activation already in flight") {}
};

class ContractViolation : public Error {
public:
    using Error::Error;
};

}  // namespace cascade
