#include "cascade/reachability.hpp"

#include <functional>

#include "cascade/errors.hpp"

namespace cascade {

const std::set<std::string, std::less<>>& template_selectors() {
    static const std::set<std::string, std::less<>> kTemplates = {
        // arithmetic
        "+", "-", "*", "/", "//", "\\\\", "negated",
        // bits
        "bitAnd:", "bitOr:", "bitXor:", "bitShift:", "<<", ">>", "bitInvert",
        // comparison
        "=", "==", "~=", "<", "<=", ">", ">=",
        // memory
        "longAt:", "longAt:put:", "fetchPointer:ofObject:", "storePointer:ofObject:withValue:",
        "classIdOf:", "slotSizeOf:", "stackAt:",
        // control
        "ifTrue:", "ifFalse:", "ifTrue:ifFalse:", "ifFalse:ifTrue:", "whileTrue:", "whileFalse:",
        "whileTrue", "whileFalse", "to:do:", "timesRepeat:", "and:", "or:", "ifStackContains:do:",
    };
    return kTemplates;
}

bool is_control_template(std::string_view selector) {
    static const std::set<std::string, std::less<>> kControl = {
        "ifTrue:", "ifFalse:", "ifTrue:ifFalse:", "ifFalse:ifTrue:", "whileTrue:", "whileFalse:",
        "whileTrue", "whileFalse", "to:do:", "timesRepeat:", "and:", "or:", "ifStackContains:do:",
    };
    return kControl.count(selector) != 0;
}

void MethodTable::add_method(MethodNode method) {
    std::string key = method.selector;
    methods.insert_or_assign(std::move(key), std::move(method));
}

void MethodTable::add_vm_function(VmFunctionSig sig) {
    std::string key = sig.name;
    vm_functions.insert_or_assign(std::move(key), std::move(sig));
}

const MethodNode* MethodTable::find_method(std::string_view selector) const {
    auto it = methods.find(selector);
    return it == methods.end() ? nullptr : &it->second;
}

const VmFunctionSig* MethodTable::find_vm_function(std::string_view name) const {
    auto it = vm_functions.find(name);
    return it == vm_functions.end() ? nullptr : &it->second;
}

void MethodTable::check_disjoint() const {
    for (const auto& [sel, m] : methods) {
        if (templates.count(sel)) throw Error("method #" + sel + " shadows a primitive template");
        if (vm_functions.count(sel)) throw Error("method #" + sel + " shadows a VM function");
    }
    for (const auto& [name, sig] : vm_functions)
        if (templates.count(name)) throw Error("VM function " + name + " shadows a primitive template");
}

namespace {

class Walker {
public:
    Walker(const MethodTable& table, ReachableSet& out) : table_(table), out_(out) {}

    void visit_method(const MethodNode& m) {
        out_.selectors.push_back(m.selector);
        seen_.insert(m.selector);
        std::string caller = m.selector;
        for (const auto& s : m.body) std::visit([&](const auto& n) { expr(n.value, caller); }, s.node);
    }

private:
    void expr(const Expr& e, const std::string& caller) {
        if (const auto* send = e.as<SendExpr>()) {
            expr(*send->receiver, caller);
            for (const auto& a : send->args) expr(a, caller);
            resolve(send->selector, caller);
        } else if (const auto* call = e.as<VmCallExpr>()) {
            for (const auto& a : call->args) expr(a, caller);
            const auto* sig = table_.find_vm_function(call->function);
            if (sig == nullptr) throw UnknownSelector(call->function, caller);
            if (static_cast<std::size_t>(sig->arity) != call->args.size())
                throw ArityMismatch("VM function " + call->function + " takes " + std::to_string(sig->arity) +
                                    " arguments, called with " + std::to_string(call->args.size()));
            out_.vm_functions.insert(call->function);
        } else if (const auto* block = e.as<BlockExpr>()) {
            for (const auto& s : block->body) std::visit([&](const auto& n) { expr(n.value, caller); }, s.node);
        }
    }

    void resolve(const std::string& selector, const std::string& caller) {
        if (table_.is_template(selector)) return;
        if (const auto* callee = table_.find_method(selector)) {
            if (!seen_.count(selector)) visit_method(*callee);
            return;
        }
        throw UnknownSelector(selector, caller);
    }

    const MethodTable& table_;
    ReachableSet& out_;
    std::set<std::string, std::less<>> seen_;
};

}  // namespace

ReachableSet reachable_methods(std::string_view entry, const MethodTable& table) {
    const MethodNode* m = table.find_method(entry);
    if (m == nullptr) throw UnknownSelector(std::string(entry), "");
    ReachableSet out;
    Walker walker(table, out);
    walker.visit_method(*m);
    return out;
}

}  // namespace cascade
